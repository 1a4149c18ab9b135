#pragma once

#include <string>

#include "aqp/optim.hpp"
#include "aqp/rng.hpp"
#include "aqp/tensor.hpp"

namespace aqp {

// Shared transformer building blocks. All parameters are registered in a
// ParamStore under a name prefix so checkpoints stay self-describing.

struct LnParams {
    Tensor gain, bias;
};

struct MhaParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    int heads = 1;
};

struct MlpParams {
    Tensor w1, b1, w2, b2;
};

Tensor make_linear_weight(ParamStore& store, const std::string& name, int fan_in,
                          int fan_out, Rng& rng);

LnParams make_ln(ParamStore& store, const std::string& prefix, int d);
MhaParams make_mha(ParamStore& store, const std::string& prefix, int d_model, int heads,
                   Rng& rng);
MlpParams make_mlp(ParamStore& store, const std::string& prefix, int d_in, int d_hidden,
                   Rng& rng);

Tensor ln_forward(const Tensor& x, const LnParams& p, double eps = 1e-5);

// Queries from x_q, keys/values from x_kv; per-head scaled dot attention with
// the given mask, heads concatenated then output-projected.
Tensor multihead_attention(const Tensor& x_q, const Tensor& x_kv, const MhaParams& p,
                           const AttentionMask& mask);

Tensor mlp_forward(const Tensor& x, const MlpParams& p);

}  // namespace aqp
