#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aqp/errors.hpp"
#include "aqp/rng.hpp"

namespace aqp {

// Dense float64 tensor with reverse-mode autodiff. Row-major only.
//
// Semantics:
//  - data is immutable once an op has consumed the tensor; grad buffers are
//    the only mutable state.
//  - gradients ACCUMULATE across backward() calls; zeroing is explicit
//    (ParamStore::zero_grads or Tensor::zero_grad).
//  - every op validates output finiteness and throws numeric_error on NaN/Inf.

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first touched
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    // Reads this->grad, accumulates into parents' grads.
    std::function<void(TensorNode&)> backprop;

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        return n;
    }
    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(numel(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool valid() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    size_t numel() const { return node_->numel(); }
    int rows() const;
    int cols() const;
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& mutable_data() { return node_->data; }
    std::vector<double>& grad() { return node_->ensure_grad(); }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.assign(node_->numel(), 0.0); }

    double value() const;            // scalar tensors only
    double at(int r, int c) const;   // 2D convenience

    // A view on the same data with no graph history (no grad flows through).
    Tensor detach() const;

    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

// When active (thread-local), ops skip graph construction; results carry data
// only. Used by inference/timing paths.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Boolean attention mask: allow[r*cols + c] == 1 means query row r may attend
// to key c. Default-constructed mask means all-allow (bidirectional).
struct AttentionMask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> allow;

    bool all_allow() const { return allow.empty(); }
    static AttentionMask bidirectional() { return {}; }
    static AttentionMask causal(int n);
};

// ---- differentiable ops ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor gelu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor slice_cols(const Tensor& a, int c0, int c1);  // [c0, c1)
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int r1);  // [r0, r1)
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row broadcast over rows
Tensor add_row_to_row(const Tensor& a, int r, const Tensor& row);  // single-row add

// Numerically stabilized softmax over the last dimension; optional mask zeroes
// attention pairs exactly. Fully masked rows are a contract error.
Tensor softmax_lastdim(const Tensor& x);
Tensor softmax_lastdim_masked(const Tensor& x, const AttentionMask& mask);

// Per-row normalization then affine; gain/bias span the last dimension.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// softmax(q k^T / sqrt(d) with mask) v
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask& mask);

// Mean-reduced losses against a constant target.
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor smooth_l1_loss(const Tensor& pred, const Tensor& target);  // beta = 1

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// requires_grad tensor reachable from loss.
void backward(const Tensor& loss);

// Central finite differences vs analytic gradient. Checks at most
// max_coords coordinates per input tensor (sampled with rng when the tensor
// is larger); returns the max relative error with denominator
// max(|analytic|, |numeric|, 1).
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double eps, size_t max_coords,
                  Rng& rng);
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double eps);

}  // namespace aqp
