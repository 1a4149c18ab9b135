#include "aqp/optim.hpp"

#include <cmath>

namespace aqp {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (find(name)) throw contract_error("ParamStore: duplicate parameter " + name);
    items_.emplace_back(name, t);
    return t;
}

const Tensor* ParamStore::find(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return &t;
    }
    return nullptr;
}

Tensor* ParamStore::find(const std::string& name) {
    for (auto& [n, t] : items_) {
        if (n == name) return &t;
    }
    return nullptr;
}

void ParamStore::zero_grads() {
    for (auto& [n, t] : items_) t.zero_grad();
}

size_t ParamStore::total_params() const {
    size_t total = 0;
    for (const auto& [n, t] : items_) total += t.numel();
    return total;
}

double ParamStore::clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto& [n, t] : items_) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (auto& [n, t] : items_) {
            if (!t.has_grad()) continue;
            for (double& g : t.grad()) g *= s;
        }
    }
    return norm;
}

AdamW::AdamW(ParamStore& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw contract_error("AdamW: lr must be positive");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& [n, t] : params.items()) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void AdamW::step() {
    ++step_count_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    size_t pi = 0;
    for (const auto& [name, param] : params_.items()) {
        Tensor t = param;  // shares storage
        auto& m = m_[pi];
        auto& v = v_[pi];
        ++pi;
        auto& p = t.mutable_data();
        const auto& g = t.grad();
        for (size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw numeric_error("AdamW: NaN/Inf gradient in parameter " + name);
            }
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                               cfg_.weight_decay * p[i]);
        }
    }
}

}  // namespace aqp
