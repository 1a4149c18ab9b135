#include "aqp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aqp {

namespace {

struct Bounds {
    double min_x = 1e18, max_x = -1e18, min_y = 1e18, max_y = -1e18;

    void include(double x, double y) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
};

class SvgCanvas {
public:
    SvgCanvas(Bounds b, double size = 640.0) : b_(b), size_(size) {
        double span = std::max({b_.max_x - b_.min_x, b_.max_y - b_.min_y, 1.0});
        double pad = 0.08 * span;
        b_.min_x -= pad;
        b_.max_x += pad;
        b_.min_y -= pad;
        b_.max_y += pad;
        scale_ = size_ / std::max(b_.max_x - b_.min_x, b_.max_y - b_.min_y);
    }

    double px(double x) const { return (x - b_.min_x) * scale_; }
    double py(double y) const { return size_ - (y - b_.min_y) * scale_; }
    double scale() const { return scale_; }

    void polyline(const std::vector<std::array<double, 2>>& pts, const char* color,
                  double width) {
        if (pts.empty()) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
              << width << "\" points=\"";
        for (const auto& p : pts) body_ << px(p[0]) << "," << py(p[1]) << " ";
        body_ << "\"/>\n";
    }

    void rect(double cx, double cy, double hx, double hy, const char* color) {
        body_ << "<rect x=\"" << px(cx - hx) << "\" y=\"" << py(cy + hy) << "\" width=\""
              << 2 * hx * scale_ << "\" height=\"" << 2 * hy * scale_ << "\" fill=\""
              << color << "\" fill-opacity=\"0.35\" stroke=\"" << color << "\"/>\n";
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw io_error("cannot open SVG for writing: " + path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_
            << "\" height=\"" << size_ << "\" viewBox=\"0 0 " << size_ << " " << size_
            << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
    }

private:
    Bounds b_;
    double size_;
    double scale_;
    std::ostringstream body_;
};

}  // namespace

void write_trajectory_svg(const std::string& path, const Traj& pred, const Traj& gt,
                          const std::vector<ObstacleBox>& boxes) {
    Bounds b;
    b.include(0.0, 0.0);
    for (const auto& p : pred) b.include(p[0], p[1]);
    for (const auto& p : gt) b.include(p[0], p[1]);
    for (const auto& box : boxes) {
        for (const auto& c : box.centers) {
            b.include(c[0] - box.half_length, c[1] - box.half_width);
            b.include(c[0] + box.half_length, c[1] + box.half_width);
        }
    }
    SvgCanvas canvas(b);
    for (const auto& box : boxes) {
        for (const auto& c : box.centers) {
            canvas.rect(c[0], c[1], box.half_length, box.half_width, "#d08030");
        }
    }
    canvas.polyline(gt, "#208020", 2.0);
    canvas.polyline(pred, "#2040c0", 2.0);
    canvas.write(path);
}

void write_rollout_svg(const std::string& path, const RolloutTrace& trace,
                       const ObstacleBox& adversary) {
    Bounds b;
    for (const auto& p : trace.ego_path) b.include(p[0], p[1]);
    for (const auto& p : trace.adversary_path) {
        b.include(p[0] - adversary.half_length, p[1] - adversary.half_width);
        b.include(p[0] + adversary.half_length, p[1] + adversary.half_width);
    }
    SvgCanvas canvas(b);
    for (const auto& c : trace.adversary_path) {
        canvas.rect(c[0], c[1], adversary.half_length, adversary.half_width,
                    trace.collided ? "#c03030" : "#d08030");
    }
    canvas.polyline(trace.adversary_path, "#c08030", 1.5);
    canvas.polyline(trace.ego_path, "#2040c0", 2.0);
    canvas.write(path);
}

}  // namespace aqp
