#include "aqp/nn.hpp"

#include <cmath>

namespace aqp {

Tensor make_linear_weight(ParamStore& store, const std::string& name, int fan_in,
                          int fan_out, Rng& rng) {
    double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return store.add(name, Tensor::randn({fan_in, fan_out}, rng, stddev, true));
}

LnParams make_ln(ParamStore& store, const std::string& prefix, int d) {
    LnParams p;
    p.gain = store.add(prefix + ".gain", Tensor::full({d}, 1.0, true));
    p.bias = store.add(prefix + ".bias", Tensor::zeros({d}, true));
    return p;
}

MhaParams make_mha(ParamStore& store, const std::string& prefix, int d_model, int heads,
                   Rng& rng) {
    if (d_model % heads != 0) throw contract_error("make_mha: d_model % heads != 0");
    MhaParams p;
    p.heads = heads;
    p.wq = make_linear_weight(store, prefix + ".wq", d_model, d_model, rng);
    p.bq = store.add(prefix + ".bq", Tensor::zeros({d_model}, true));
    p.wk = make_linear_weight(store, prefix + ".wk", d_model, d_model, rng);
    p.bk = store.add(prefix + ".bk", Tensor::zeros({d_model}, true));
    p.wv = make_linear_weight(store, prefix + ".wv", d_model, d_model, rng);
    p.bv = store.add(prefix + ".bv", Tensor::zeros({d_model}, true));
    p.wo = make_linear_weight(store, prefix + ".wo", d_model, d_model, rng);
    p.bo = store.add(prefix + ".bo", Tensor::zeros({d_model}, true));
    return p;
}

MlpParams make_mlp(ParamStore& store, const std::string& prefix, int d_in, int d_hidden,
                   Rng& rng) {
    MlpParams p;
    p.w1 = make_linear_weight(store, prefix + ".w1", d_in, d_hidden, rng);
    p.b1 = store.add(prefix + ".b1", Tensor::zeros({d_hidden}, true));
    p.w2 = make_linear_weight(store, prefix + ".w2", d_hidden, d_in, rng);
    p.b2 = store.add(prefix + ".b2", Tensor::zeros({d_in}, true));
    return p;
}

Tensor ln_forward(const Tensor& x, const LnParams& p, double eps) {
    return layer_norm(x, p.gain, p.bias, eps);
}

Tensor multihead_attention(const Tensor& x_q, const Tensor& x_kv, const MhaParams& p,
                           const AttentionMask& mask) {
    Tensor q = add_rowvec(matmul(x_q, p.wq), p.bq);
    Tensor k = add_rowvec(matmul(x_kv, p.wk), p.bk);
    Tensor v = add_rowvec(matmul(x_kv, p.wv), p.bv);
    int d = q.cols();
    int hd = d / p.heads;
    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(p.heads));
    for (int h = 0; h < p.heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
        Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
        Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
        heads.push_back(scaled_dot_attention(qh, kh, vh, mask));
    }
    Tensor cat = (p.heads == 1) ? heads[0] : concat_cols(heads);
    return add_rowvec(matmul(cat, p.wo), p.bo);
}

Tensor mlp_forward(const Tensor& x, const MlpParams& p) {
    return add_rowvec(matmul(gelu(add_rowvec(matmul(x, p.w1), p.b1)), p.w2), p.b2);
}

}  // namespace aqp
