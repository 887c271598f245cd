#pragma once

#include <string>
#include <vector>

#include "regen3d/tensor.hpp"

namespace regen3d {

// Named parameter registry, shared by the optimizer and checkpoint I/O.
struct ParamMap {
    std::vector<std::pair<std::string, Tensor*>> entries;

    void add(const std::string& name, Tensor* t) { entries.push_back({name, t}); }
    void add_all(const std::string& prefix, ParamMap sub) {
        for (auto& [n, t] : sub.entries) entries.push_back({prefix + "." + n, t});
    }
    size_t total_count() const {
        size_t n = 0;
        for (auto& [name, t] : entries) n += t->numel();
        return n;
    }
};

inline Tensor init_linear_weight(int out_dim, int in_dim, Rng& rng) {
    const float std = 1.0f / std::sqrt(float(in_dim));
    Tensor w = Tensor::randn({out_dim, in_dim}, rng, std);
    w.requires_grad = true;
    w.ensure_grad();
    return w;
}

inline Tensor param_zeros(std::vector<int> shape) { return Tensor::zeros(std::move(shape), true); }

inline Tensor param_ones(std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    std::fill(t.data->begin(), t.data->end(), 1.0f);
    return t;
}

struct LinearParams {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    LinearParams() = default;
    LinearParams(int out_dim, int in_dim, Rng& rng)
        : weight(init_linear_weight(out_dim, in_dim, rng)), bias(param_zeros({out_dim})) {}

    static LinearParams zero_init(int out_dim, int in_dim) {
        LinearParams p;
        p.weight = param_zeros({out_dim, in_dim});
        p.bias = param_zeros({out_dim});
        return p;
    }

    Tensor forward(const Tensor& x) const { return ops::linear(x, weight, bias); }

    ParamMap params() {
        ParamMap m;
        m.add("weight", &weight);
        m.add("bias", &bias);
        return m;
    }
};

struct LayerNormParams {
    Tensor gain;
    Tensor bias;

    LayerNormParams() = default;
    explicit LayerNormParams(int dim) : gain(param_ones({dim})), bias(param_zeros({dim})) {}

    Tensor forward(const Tensor& x) const { return ops::layer_norm(x, gain, bias); }

    ParamMap params() {
        ParamMap m;
        m.add("gain", &gain);
        m.add("bias", &bias);
        return m;
    }
};

struct AttentionParams {
    LinearParams q_proj, k_proj, v_proj, out_proj;
    int head_count = 1;
    int model_dim = 0;

    AttentionParams() = default;
    AttentionParams(int dim, int heads, Rng& rng)
        : q_proj(dim, dim, rng),
          k_proj(dim, dim, rng),
          v_proj(dim, dim, rng),
          out_proj(dim, dim, rng),
          head_count(heads),
          model_dim(dim) {
        check(heads >= 1 && dim % heads == 0, "AttentionParams: model_dim must divide by head_count");
    }

    void zero_output_projection() {
        std::fill(out_proj.weight.data->begin(), out_proj.weight.data->end(), 0.0f);
        std::fill(out_proj.bias.data->begin(), out_proj.bias.data->end(), 0.0f);
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("q", q_proj.params());
        m.add_all("k", k_proj.params());
        m.add_all("v", v_proj.params());
        m.add_all("out", out_proj.params());
        return m;
    }
};

// Multi-head attention; cross-attention in general, self-attention when
// q_tokens and kv_tokens are the same tensor. No positional bias: permuting
// kv rows leaves the output unchanged.
inline Tensor attention_block(const Tensor& q_tokens, const Tensor& kv_tokens,
                              const AttentionParams& params) {
    check(q_tokens.shape.size() == 2 && kv_tokens.shape.size() == 2,
          "attention_block: rank-2 token matrices required");
    check(q_tokens.shape[1] == params.model_dim && kv_tokens.shape[1] == params.model_dim,
          "attention_block: token dim does not match model_dim");
    check(q_tokens.shape[0] >= 1 && kv_tokens.shape[0] >= 1, "attention_block: empty token set");
    const int heads = params.head_count;
    const int dh = params.model_dim / heads;
    Tensor q = params.q_proj.forward(q_tokens);
    Tensor k = params.k_proj.forward(kv_tokens);
    Tensor v = params.v_proj.forward(kv_tokens);
    const float scale = 1.0f / std::sqrt(float(dh));
    std::vector<Tensor> head_outs;
    head_outs.reserve(size_t(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
        Tensor logits = ops::scale(ops::matmul_nt(qh, kh), scale);
        Tensor weights = ops::softmax_rows(logits);
        head_outs.push_back(ops::matmul(weights, vh));
    }
    Tensor merged = heads == 1 ? head_outs[0] : ops::concat_cols(head_outs);
    return params.out_proj.forward(merged);
}

struct FeedForwardParams {
    LinearParams fc1, fc2;

    FeedForwardParams() = default;
    FeedForwardParams(int dim, int hidden, Rng& rng) : fc1(hidden, dim, rng), fc2(dim, hidden, rng) {}

    Tensor forward(const Tensor& x) const { return fc2.forward(ops::gelu(fc1.forward(x))); }

    void zero_output_projection() {
        std::fill(fc2.weight.data->begin(), fc2.weight.data->end(), 0.0f);
        std::fill(fc2.bias.data->begin(), fc2.bias.data->end(), 0.0f);
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("fc1", fc1.params());
        m.add_all("fc2", fc2.params());
        return m;
    }
};

// Pre-norm block: self-attention, optional cross-attention to a context
// sequence, feed-forward; residual around each sublayer.
struct TransformerLayerParams {
    LayerNormParams ln_self, ln_cross, ln_ffn;
    AttentionParams self_attn, cross_attn;
    FeedForwardParams ffn;
    bool has_cross = false;

    TransformerLayerParams() = default;
    TransformerLayerParams(int dim, int heads, bool with_cross, Rng& rng, int ffn_hidden = 0)
        : ln_self(dim),
          ln_cross(dim),
          ln_ffn(dim),
          self_attn(dim, heads, rng),
          ffn(dim, ffn_hidden > 0 ? ffn_hidden : 4 * dim, rng),
          has_cross(with_cross) {
        if (with_cross) cross_attn = AttentionParams(dim, heads, rng);
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("ln_self", ln_self.params());
        m.add_all("self", self_attn.params());
        if (has_cross) {
            m.add_all("ln_cross", ln_cross.params());
            m.add_all("cross", cross_attn.params());
        }
        m.add_all("ln_ffn", ln_ffn.params());
        m.add_all("ffn", ffn.params());
        return m;
    }
};

// context with zero rows (or null) skips the cross-attention sublayer.
inline Tensor transformer_layer(const Tensor& tokens, const Tensor* context,
                                const TransformerLayerParams& params) {
    Tensor normed = params.ln_self.forward(tokens);
    Tensor x = ops::add(tokens, attention_block(normed, normed, params.self_attn));
    if (params.has_cross && context && context->shape.size() == 2 && context->shape[0] > 0) {
        x = ops::add(x, attention_block(params.ln_cross.forward(x), *context, params.cross_attn));
    }
    return ops::add(x, params.ffn.forward(params.ln_ffn.forward(x)));
}

// Cross-attention-only block for decoder-style stacks (queries never see
// each other, so batched query evaluation is exact).
struct CrossAttnLayerParams {
    LayerNormParams ln_q, ln_ffn;
    AttentionParams cross_attn;
    FeedForwardParams ffn;

    CrossAttnLayerParams() = default;
    CrossAttnLayerParams(int dim, int heads, Rng& rng, int ffn_hidden = 0)
        : ln_q(dim), ln_ffn(dim), cross_attn(dim, heads, rng), ffn(dim, ffn_hidden > 0 ? ffn_hidden : 4 * dim, rng) {}

    Tensor forward(const Tensor& queries, const Tensor& context) const {
        Tensor x = ops::add(queries, attention_block(ln_q.forward(queries), context, cross_attn));
        return ops::add(x, ffn.forward(ln_ffn.forward(x)));
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("ln_q", ln_q.params());
        m.add_all("cross", cross_attn.params());
        m.add_all("ln_ffn", ln_ffn.params());
        m.add_all("ffn", ffn.params());
        return m;
    }
};

// Sinusoidal embedding of a (possibly fractional) timestep.
inline Tensor sinusoidal_embedding(float t, int dim) {
    check(dim % 2 == 0, "sinusoidal_embedding: dim must be even");
    Tensor e = Tensor::zeros({1, dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const float freq = std::exp(-std::log(10000.0f) * float(i) / float(half));
        (*e.data)[size_t(i)] = std::sin(t * freq);
        (*e.data)[size_t(half + i)] = std::cos(t * freq);
    }
    return e;
}

// Broadcast-add a [1,n] row vector to every row of x.
inline Tensor add_row_vector(const Tensor& x, const Tensor& row) {
    check(row.numel() == size_t(x.shape[1]), "add_row_vector: width mismatch");
    Tensor flat = row;
    flat.shape = {x.shape[1]};
    return ops::add_row(x, flat);
}

}  // namespace regen3d
