#pragma once

#include <string>
#include <vector>

#include "aqp/tensor.hpp"

namespace aqp {

// Ordered, named parameter registry. Order is the checkpoint/optimizer
// contract: both iterate parameters in registration order.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t);
    const Tensor* find(const std::string& name) const;
    Tensor* find(const std::string& name);

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    size_t size() const { return items_.size(); }

    void zero_grads();
    size_t total_params() const;

    // Global L2 norm of all gradients; scales grads in place when the norm
    // exceeds max_norm. Returns the pre-clip norm.
    double clip_grad_norm(double max_norm);

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled weight decay Adam with bias correction. Deterministic: identical
// state and gradients give bitwise-identical parameters.
class AdamW {
public:
    AdamW(ParamStore& params, AdamWConfig cfg);

    void step();
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    int64_t step_count() const { return step_count_; }

private:
    ParamStore& params_;
    AdamWConfig cfg_;
    int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace aqp
