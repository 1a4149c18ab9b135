#include "aqp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aqp {

namespace {

thread_local bool g_no_grad = false;

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw shape_error("tensor dimensions must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw numeric_error(std::string("non-finite value in output of ") + op);
        }
    }
}

NodePtr make_node(std::vector<int> shape, std::vector<double> data) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return n;
}

bool any_requires(const std::vector<NodePtr>& parents) {
    if (g_no_grad) return false;
    for (const auto& p : parents) {
        if (p->requires_grad) return true;
    }
    return false;
}

Tensor finish(const char* op, NodePtr out, std::vector<NodePtr> parents,
              std::function<void(TensorNode&)> backprop) {
    check_finite(op, out->data);
    if (any_requires(parents)) {
        out->requires_grad = true;
        out->parents = std::move(parents);
        out->backprop = std::move(backprop);
    }
    return Tensor(std::move(out));
}

void require_2d(const char* op, const Tensor& t) {
    if (t.shape().size() != 2) {
        throw shape_error(std::string(op) + ": expected a 2D tensor");
    }
}

// Whether to bother parallelizing a matmul.
constexpr size_t kParallelWork = 1u << 16;

void mm(const double* a, const double* b, double* c, int m, int k, int n) {
    // c (m x n) += was not wanted: c is zero-initialized by callers. ikj order.
    size_t work = static_cast<size_t>(m) * k * n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (work >= kParallelWork)
#endif
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool grad_enabled() { return !g_no_grad; }

AttentionMask AttentionMask::causal(int n) {
    AttentionMask m;
    m.rows = n;
    m.cols = n;
    m.allow.assign(static_cast<size_t>(n) * n, 0);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c <= r; ++c) m.allow[static_cast<size_t>(r) * n + c] = 1;
    }
    return m;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    size_t n = shape_numel(shape);
    auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    if (!std::isfinite(value)) throw numeric_error("Tensor::full: non-finite fill");
    size_t n = shape_numel(shape);
    auto node = make_node(std::move(shape), std::vector<double>(n, value));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw shape_error("Tensor::from: data length does not match shape");
    }
    check_finite("Tensor::from", data);
    auto node = make_node(std::move(shape), std::move(data));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad) {
    size_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (auto& x : data) x = rng.normal() * stddev;
    return from(std::move(shape), std::move(data), requires_grad);
}

int Tensor::rows() const {
    require_2d("rows", *this);
    return node_->shape[0];
}

int Tensor::cols() const {
    require_2d("cols", *this);
    return node_->shape[1];
}

double Tensor::value() const {
    if (numel() != 1) throw contract_error("Tensor::value: not a scalar");
    return node_->data[0];
}

double Tensor::at(int r, int c) const {
    require_2d("at", *this);
    return node_->data[static_cast<size_t>(r) * cols() + c];
}

Tensor Tensor::detach() const {
    auto node = make_node(node_->shape, node_->data);
    return Tensor(std::move(node));
}

// ---- elementwise ----

namespace {
void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw shape_error(std::string(op) + ": operand shapes differ");
    }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto pa = a.node(), pb = b.node();
    return finish("add", make_node(a.shape(), std::move(out)), {pa, pb},
                  [pa, pb](TensorNode& self) {
                      if (pa->requires_grad) {
                          auto& g = pa->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                      }
                      if (pb->requires_grad) {
                          auto& g = pb->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                      }
                  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto pa = a.node(), pb = b.node();
    return finish("sub", make_node(a.shape(), std::move(out)), {pa, pb},
                  [pa, pb](TensorNode& self) {
                      if (pa->requires_grad) {
                          auto& g = pa->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                      }
                      if (pb->requires_grad) {
                          auto& g = pb->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                      }
                  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto pa = a.node(), pb = b.node();
    return finish("mul", make_node(a.shape(), std::move(out)), {pa, pb},
                  [pa, pb](TensorNode& self) {
                      if (pa->requires_grad) {
                          auto& g = pa->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
                      }
                      if (pb->requires_grad) {
                          auto& g = pb->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
                      }
                  });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    auto pa = a.node();
    return finish("scale", make_node(a.shape(), std::move(out)), {pa},
                  [pa, c](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
                  });
}

Tensor add_const(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    auto pa = a.node();
    return finish("add_const", make_node(a.shape(), std::move(out)), {pa},
                  [pa](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                  });
}

Tensor exp_op(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    auto pa = a.node();
    return finish("exp", make_node(a.shape(), std::move(out)), {pa},
                  [pa](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.data[i];
                  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw contract_error("clamp: lo > hi");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, a.data()[i]));
    auto pa = a.node();
    return finish("clamp", make_node(a.shape(), std::move(out)), {pa},
                  [pa, lo, hi](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < g.size(); ++i) {
                          double x = pa->data[i];
                          if (x > lo && x < hi) g[i] += self.grad[i];
                      }
                  });
}

Tensor gelu(const Tensor& a) {
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    constexpr double kInvSqrt2Pi = 0.3989422804014326779;
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) {
        double x = a.data()[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    auto pa = a.node();
    return finish("gelu", make_node(a.shape(), std::move(out)), {pa},
                  [pa](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < g.size(); ++i) {
                          double x = pa->data[i];
                          double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                          double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                          g[i] += self.grad[i] * (cdf + x * pdf);
                      }
                  });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    auto pa = a.node();
    return finish("sum", make_node({1}, {s}), {pa}, [pa](TensorNode& self) {
        auto& g = pa->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    double inv = 1.0 / static_cast<double>(a.numel());
    auto pa = a.node();
    return finish("mean", make_node({1}, {s * inv}), {pa}, [pa, inv](TensorNode& self) {
        auto& g = pa->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * inv;
    });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw shape_error("matmul: inner dimensions disagree");
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    mm(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto pa = a.node(), pb = b.node();
    return finish("matmul", make_node({m, n}, std::move(out)), {pa, pb},
                  [pa, pb, m, k, n](TensorNode& self) {
                      if (pa->requires_grad) {
                          // gA += G * B^T
                          auto& ga = pa->ensure_grad();
                          const double* G = self.grad.data();
                          const double* B = pb->data.data();
                          for (int i = 0; i < m; ++i) {
                              for (int p = 0; p < k; ++p) {
                                  double acc = 0.0;
                                  const double* gi = G + static_cast<size_t>(i) * n;
                                  const double* bp = B + static_cast<size_t>(p) * n;
                                  for (int j = 0; j < n; ++j) acc += gi[j] * bp[j];
                                  ga[static_cast<size_t>(i) * k + p] += acc;
                              }
                          }
                      }
                      if (pb->requires_grad) {
                          // gB += A^T * G
                          auto& gb = pb->ensure_grad();
                          const double* G = self.grad.data();
                          const double* A = pa->data.data();
                          for (int i = 0; i < m; ++i) {
                              const double* ai = A + static_cast<size_t>(i) * k;
                              const double* gi = G + static_cast<size_t>(i) * n;
                              for (int p = 0; p < k; ++p) {
                                  double av = ai[p];
                                  if (av == 0.0) continue;
                                  double* gbp = gb.data() + static_cast<size_t>(p) * n;
                                  for (int j = 0; j < n; ++j) gbp[j] += av * gi[j];
                              }
                          }
                      }
                  });
}

Tensor transpose(const Tensor& a) {
    require_2d("transpose", a);
    int m = a.rows(), n = a.cols();
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<size_t>(j) * m + i] = a.data()[static_cast<size_t>(i) * n + j];
        }
    }
    auto pa = a.node();
    return finish("transpose", make_node({n, m}, std::move(out)), {pa},
                  [pa, m, n](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (int i = 0; i < m; ++i) {
                          for (int j = 0; j < n; ++j) {
                              g[static_cast<size_t>(i) * n + j] +=
                                  self.grad[static_cast<size_t>(j) * m + i];
                          }
                      }
                  });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    require_2d("slice_cols", a);
    int m = a.rows(), n = a.cols();
    if (c0 < 0 || c1 > n || c0 >= c1) throw shape_error("slice_cols: bad column range");
    int w = c1 - c0;
    std::vector<double> out(static_cast<size_t>(m) * w);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < w; ++j) {
            out[static_cast<size_t>(i) * w + j] = a.data()[static_cast<size_t>(i) * n + c0 + j];
        }
    }
    auto pa = a.node();
    return finish("slice_cols", make_node({m, w}, std::move(out)), {pa},
                  [pa, m, n, c0, w](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (int i = 0; i < m; ++i) {
                          for (int j = 0; j < w; ++j) {
                              g[static_cast<size_t>(i) * n + c0 + j] +=
                                  self.grad[static_cast<size_t>(i) * w + j];
                          }
                      }
                  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: no parts");
    int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        require_2d("concat_cols", p);
        if (p.rows() != m) throw shape_error("concat_cols: row counts differ");
        total += p.cols();
    }
    std::vector<double> out(static_cast<size_t>(m) * total);
    std::vector<NodePtr> parents;
    std::vector<int> offsets;
    int off = 0;
    for (const auto& p : parts) {
        int w = p.cols();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < w; ++j) {
                out[static_cast<size_t>(i) * total + off + j] =
                    p.data()[static_cast<size_t>(i) * w + j];
            }
        }
        parents.push_back(p.node());
        offsets.push_back(off);
        off += w;
    }
    return finish("concat_cols", make_node({m, total}, std::move(out)), parents,
                  [parents, offsets, m, total](TensorNode& self) {
                      for (size_t pi = 0; pi < parents.size(); ++pi) {
                          auto& p = parents[pi];
                          if (!p->requires_grad) continue;
                          int w = p->shape[1];
                          int o = offsets[pi];
                          auto& g = p->ensure_grad();
                          for (int i = 0; i < m; ++i) {
                              for (int j = 0; j < w; ++j) {
                                  g[static_cast<size_t>(i) * w + j] +=
                                      self.grad[static_cast<size_t>(i) * total + o + j];
                              }
                          }
                      }
                  });
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    require_2d("slice_rows", a);
    int m = a.rows(), n = a.cols();
    if (r0 < 0 || r1 > m || r0 >= r1) throw shape_error("slice_rows: bad row range");
    int h = r1 - r0;
    std::vector<double> out(a.data().begin() + static_cast<size_t>(r0) * n,
                            a.data().begin() + static_cast<size_t>(r1) * n);
    auto pa = a.node();
    return finish("slice_rows", make_node({h, n}, std::move(out)), {pa},
                  [pa, r0, h, n](TensorNode& self) {
                      auto& g = pa->ensure_grad();
                      for (size_t i = 0; i < static_cast<size_t>(h) * n; ++i) {
                          g[static_cast<size_t>(r0) * n + i] += self.grad[i];
                      }
                  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: no parts");
    int n = parts[0].cols();
    int total = 0;
    for (const auto& p : parts) {
        require_2d("concat_rows", p);
        if (p.cols() != n) throw shape_error("concat_rows: column counts differ");
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total) * n);
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        parents.push_back(p.node());
    }
    return finish("concat_rows", make_node({total, n}, std::move(out)), parents,
                  [parents](TensorNode& self) {
                      size_t off = 0;
                      for (const auto& p : parents) {
                          size_t sz = p->numel();
                          if (p->requires_grad) {
                              auto& g = p->ensure_grad();
                              for (size_t i = 0; i < sz; ++i) g[i] += self.grad[off + i];
                          }
                          off += sz;
                      }
                  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    require_2d("add_rowvec", a);
    int m = a.rows(), n = a.cols();
    if (static_cast<int>(row.numel()) != n) {
        throw shape_error("add_rowvec: row length does not match columns");
    }
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<size_t>(i) * n + j] =
                a.data()[static_cast<size_t>(i) * n + j] + row.data()[j];
        }
    }
    auto pa = a.node(), pr = row.node();
    return finish("add_rowvec", make_node({m, n}, std::move(out)), {pa, pr},
                  [pa, pr, m, n](TensorNode& self) {
                      if (pa->requires_grad) {
                          auto& g = pa->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                      }
                      if (pr->requires_grad) {
                          auto& g = pr->ensure_grad();
                          for (int i = 0; i < m; ++i) {
                              for (int j = 0; j < n; ++j) {
                                  g[j] += self.grad[static_cast<size_t>(i) * n + j];
                              }
                          }
                      }
                  });
}

Tensor add_row_to_row(const Tensor& a, int r, const Tensor& row) {
    require_2d("add_row_to_row", a);
    int m = a.rows(), n = a.cols();
    if (r < 0 || r >= m) throw shape_error("add_row_to_row: row index out of range");
    if (static_cast<int>(row.numel()) != n) {
        throw shape_error("add_row_to_row: row length does not match columns");
    }
    std::vector<double> out = a.data();
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(r) * n + j] += row.data()[j];
    auto pa = a.node(), pr = row.node();
    return finish("add_row_to_row", make_node({m, n}, std::move(out)), {pa, pr},
                  [pa, pr, r, n](TensorNode& self) {
                      if (pa->requires_grad) {
                          auto& g = pa->ensure_grad();
                          for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                      }
                      if (pr->requires_grad) {
                          auto& g = pr->ensure_grad();
                          for (int j = 0; j < n; ++j) {
                              g[j] += self.grad[static_cast<size_t>(r) * n + j];
                          }
                      }
                  });
}

// ---- softmax / layer norm / attention ----

namespace {
Tensor softmax_impl(const Tensor& x, const AttentionMask* mask) {
    if (x.shape().empty() || x.shape().back() < 1) {
        throw shape_error("softmax_lastdim: empty last dimension");
    }
    int n = x.shape().back();
    int rows = static_cast<int>(x.numel()) / n;
    if (mask && !mask->all_allow()) {
        if (mask->rows != rows || mask->cols != n) {
            throw shape_error("softmax_lastdim: mask shape does not match input");
        }
    }
    std::vector<double> out(x.numel());
    for (int r = 0; r < rows; ++r) {
        const double* xi = x.data().data() + static_cast<size_t>(r) * n;
        double* yi = out.data() + static_cast<size_t>(r) * n;
        const uint8_t* al = (mask && !mask->all_allow())
                                ? mask->allow.data() + static_cast<size_t>(r) * n
                                : nullptr;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (al && !al[j]) continue;
            mx = std::max(mx, xi[j]);
        }
        if (!std::isfinite(mx)) {
            throw contract_error("softmax_lastdim: fully masked row");
        }
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            double e = (al && !al[j]) ? 0.0 : std::exp(xi[j] - mx);
            yi[j] = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) yi[j] /= z;
    }
    auto pa = x.node();
    return finish("softmax_lastdim", make_node(x.shape(), std::move(out)), {pa},
                  [pa, rows, n](TensorNode& self) {
                      // dx = y * (g - sum(g * y)) per row; masked entries have y = 0.
                      auto& g = pa->ensure_grad();
                      for (int r = 0; r < rows; ++r) {
                          const double* y = self.data.data() + static_cast<size_t>(r) * n;
                          const double* gy = self.grad.data() + static_cast<size_t>(r) * n;
                          double dot = 0.0;
                          for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
                          double* gx = g.data() + static_cast<size_t>(r) * n;
                          for (int j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
                      }
                  });
}
}  // namespace

Tensor softmax_lastdim(const Tensor& x) { return softmax_impl(x, nullptr); }

Tensor softmax_lastdim_masked(const Tensor& x, const AttentionMask& mask) {
    return softmax_impl(x, &mask);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.shape().empty()) throw shape_error("layer_norm: scalar input");
    int n = x.shape().back();
    int rows = static_cast<int>(x.numel()) / n;
    if (static_cast<int>(gain.numel()) != n || static_cast<int>(bias.numel()) != n) {
        throw shape_error("layer_norm: gain/bias must span the last dimension");
    }
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (int r = 0; r < rows; ++r) {
        const double* xi = x.data().data() + static_cast<size_t>(r) * n;
        double m = 0.0;
        for (int j = 0; j < n; ++j) m += xi[j];
        m /= n;
        double v = 0.0;
        for (int j = 0; j < n; ++j) v += (xi[j] - m) * (xi[j] - m);
        v /= n;
        double denom = v + eps;
        if (denom <= 0.0) throw numeric_error("layer_norm: zero variance with eps = 0");
        double is = 1.0 / std::sqrt(denom);
        inv_std[r] = is;
        for (int j = 0; j < n; ++j) {
            double xh = (xi[j] - m) * is;
            xhat[static_cast<size_t>(r) * n + j] = xh;
            out[static_cast<size_t>(r) * n + j] = gain.data()[j] * xh + bias.data()[j];
        }
    }
    auto px = x.node(), pg = gain.node(), pb = bias.node();
    auto xh_keep = std::make_shared<std::vector<double>>(std::move(xhat));
    auto is_keep = std::make_shared<std::vector<double>>(std::move(inv_std));
    return finish(
        "layer_norm", make_node(x.shape(), std::move(out)), {px, pg, pb},
        [px, pg, pb, xh_keep, is_keep, rows, n](TensorNode& self) {
            for (int r = 0; r < rows; ++r) {
                const double* gy = self.grad.data() + static_cast<size_t>(r) * n;
                const double* xh = xh_keep->data() + static_cast<size_t>(r) * n;
                if (px->requires_grad) {
                    // d = gain * gy; dx = (d - mean(d) - xh * mean(d*xh)) * inv_std
                    double md = 0.0, mdx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double d = pg->data[j] * gy[j];
                        md += d;
                        mdx += d * xh[j];
                    }
                    md /= n;
                    mdx /= n;
                    auto& gx = px->ensure_grad();
                    double is = (*is_keep)[r];
                    for (int j = 0; j < n; ++j) {
                        double d = pg->data[j] * gy[j];
                        gx[static_cast<size_t>(r) * n + j] += (d - md - xh[j] * mdx) * is;
                    }
                }
                if (pg->requires_grad) {
                    auto& gg = pg->ensure_grad();
                    for (int j = 0; j < n; ++j) gg[j] += gy[j] * xh[j];
                }
                if (pb->requires_grad) {
                    auto& gb = pb->ensure_grad();
                    for (int j = 0; j < n; ++j) gb[j] += gy[j];
                }
            }
        });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask& mask) {
    require_2d("scaled_dot_attention", q);
    require_2d("scaled_dot_attention", k);
    require_2d("scaled_dot_attention", v);
    if (q.cols() != k.cols()) {
        throw shape_error("scaled_dot_attention: q/k head dimensions differ");
    }
    if (k.rows() != v.rows()) {
        throw shape_error("scaled_dot_attention: k/v row counts differ");
    }
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
    Tensor attn = mask.all_allow() ? softmax_lastdim(scores)
                                   : softmax_lastdim_masked(scores, mask);
    return matmul(attn, v);
}

// ---- losses ----

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    Tensor d = sub(pred, target);
    return mean(mul(d, d));
}

Tensor smooth_l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("smooth_l1_loss", pred, target);
    size_t n = pred.numel();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = pred.data()[i] - target.data()[i];
        double a = std::abs(d);
        acc += (a < 1.0) ? 0.5 * d * d : a - 0.5;
    }
    double inv = 1.0 / static_cast<double>(n);
    auto pp = pred.node(), pt = target.node();
    return finish("smooth_l1_loss", make_node({1}, {acc * inv}), {pp, pt},
                  [pp, pt, inv](TensorNode& self) {
                      double g0 = self.grad[0] * inv;
                      for (size_t i = 0; i < pp->numel(); ++i) {
                          double d = pp->data[i] - pt->data[i];
                          double dd = (std::abs(d) < 1.0) ? d : (d > 0 ? 1.0 : -1.0);
                          if (pp->requires_grad) pp->ensure_grad()[i] += g0 * dd;
                          if (pt->requires_grad) pt->ensure_grad()[i] -= g0 * dd;
                      }
                  });
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw contract_error("backward: loss must be scalar");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; cycles are impossible by construction (ops
    // only reference already-built nodes) so a visited set suffices.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop) {
            n->ensure_grad();
            n->backprop(*n);
        }
    }
}

// ---- gradient checking ----

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double eps, size_t max_coords, Rng& rng) {
    if (eps < 1e-7 || eps > 1e-3) throw contract_error("grad_check: eps outside [1e-7, 1e-3]");

    for (auto& t : inputs) t.zero_grad();
    Tensor loss = f(inputs);
    if (loss.numel() != 1) throw contract_error("grad_check: f must return a scalar");
    backward(loss);

    double max_rel = 0.0;
    for (auto& t : inputs) {
        if (!t.requires_grad()) continue;
        size_t n = t.numel();
        std::vector<size_t> coords;
        if (n <= max_coords) {
            coords.resize(n);
            for (size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (size_t i = 0; i < max_coords; ++i) {
                coords.push_back(static_cast<size_t>(rng.next_u64() % n));
            }
        }
        for (size_t idx : coords) {
            double orig = t.mutable_data()[idx];
            t.mutable_data()[idx] = orig + eps;
            double fp;
            {
                NoGradGuard ng;
                fp = f(inputs).value();
            }
            t.mutable_data()[idx] = orig - eps;
            double fm;
            {
                NoGradGuard ng;
                fm = f(inputs).value();
            }
            t.mutable_data()[idx] = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = t.grad()[idx];
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double eps) {
    Rng rng(0);
    return grad_check(f, std::move(inputs), eps,
                      std::numeric_limits<size_t>::max(), rng);
}

}  // namespace aqp
