#pragma once

#include "regen3d/conditioner.hpp"
#include "regen3d/image.hpp"
#include "regen3d/schedule.hpp"

namespace regen3d {

enum class Parameterization { DdpmV, Flow };

inline const char* parameterization_name(Parameterization p) {
    return p == Parameterization::DdpmV ? "ddpm_v" : "flow";
}

inline Parameterization parameterization_from_name(const std::string& n) {
    if (n == "ddpm_v") return Parameterization::DdpmV;
    if (n == "flow") return Parameterization::Flow;
    throw std::runtime_error("unknown parameterization: " + n);
}

// Patch tokenizer for the (silhouette, depth) conditioning image: a linear
// projection of flattened patches plus a learned per-position embedding.
struct ImageTokenizerParams {
    LinearParams patch_proj;
    Tensor pos_embed;  // [tokens, D]
    int patch_size = 8;
    int image_size = 64;

    ImageTokenizerParams() = default;
    ImageTokenizerParams(int img, int patch, int dim, Rng& rng)
        : patch_proj(dim, 2 * patch * patch, rng),
          pos_embed(Tensor::randn({(img / patch) * (img / patch), dim}, rng, 0.02f)),
          patch_size(patch),
          image_size(img) {
        check(img % patch == 0, "ImageTokenizerParams: image size not divisible by patch size");
        pos_embed.requires_grad = true;
        pos_embed.ensure_grad();
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("proj", patch_proj.params());
        m.add("pos", &pos_embed);
        return m;
    }
};

// image channels: R = silhouette, G = depth (the condition_image layout)
inline Tensor encode_image_tokens(const Image& image, const ImageTokenizerParams& params) {
    check(image.width == params.image_size && image.height == params.image_size,
          "encode_image_tokens: image size mismatch");
    const int p = params.patch_size;
    check(image.width % p == 0 && image.height % p == 0,
          "encode_image_tokens: image size not divisible by patch size");
    const int per_axis = image.width / p;
    const int n_tokens = per_axis * per_axis;
    Tensor patches = Tensor::zeros({n_tokens, 2 * p * p});
    for (int ty = 0; ty < per_axis; ++ty)
        for (int tx = 0; tx < per_axis; ++tx) {
            const int row = ty * per_axis + tx;
            int col = 0;
            for (int c = 0; c < 2; ++c)
                for (int y = 0; y < p; ++y)
                    for (int x = 0; x < p; ++x)
                        patches.at(row, col++) = image.at(tx * p + x, ty * p + y, std::min(c, image.channels - 1));
        }
    return ops::add(params.patch_proj.forward(patches), params.pos_embed);
}

// Transformer denoiser over token sequences. Self-attention over the
// assembled sequence, cross-attention to image tokens, optional dedicated
// cross-attention to condition tokens (additional_ca variant).
struct DitModel {
    int dim = 64;
    int heads = 4;
    int layer_count = 4;
    ConditioningVariant variant = ConditioningVariant::Concat;
    Parameterization parameterization = Parameterization::DdpmV;

    LinearParams in_proj;
    std::vector<TransformerLayerParams> blocks;
    std::vector<LayerNormParams> cond_ca_norms;      // additional_ca only
    std::vector<AttentionParams> cond_ca_blocks;     // additional_ca only
    LayerNormParams out_norm;
    LinearParams out_proj;
    ImageTokenizerParams image_tokenizer;
    ConditionerParams conditioner;

    DitModel() = default;
    DitModel(int d, int h, int layers, ConditioningVariant var, int bank_capacity, Rng& rng,
             int image_size = 64, int patch = 8)
        : dim(d),
          heads(h),
          layer_count(layers),
          variant(var),
          in_proj(d, d, rng),
          out_norm(d),
          out_proj(d, d, rng),
          image_tokenizer(image_size, patch, d, rng),
          conditioner(d, bank_capacity, rng) {
        for (int i = 0; i < layers; ++i) {
            blocks.emplace_back(d, h, true, rng);
            if (variant == ConditioningVariant::AdditionalCA) {
                cond_ca_norms.emplace_back(d);
                cond_ca_blocks.emplace_back(d, h, rng);
                cond_ca_blocks.back().zero_output_projection();
            }
        }
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("in", in_proj.params());
        for (size_t i = 0; i < blocks.size(); ++i) m.add_all("block" + std::to_string(i), blocks[i].params());
        for (size_t i = 0; i < cond_ca_blocks.size(); ++i) {
            m.add_all("cond_ln" + std::to_string(i), cond_ca_norms[i].params());
            m.add_all("cond_ca" + std::to_string(i), cond_ca_blocks[i].params());
        }
        m.add_all("out_norm", out_norm.params());
        m.add_all("out", out_proj.params());
        m.add_all("img", image_tokenizer.params());
        m.add_all("cond", conditioner.params());
        return m;
    }
};

// Assembled denoiser input: noisy target rows plus the (preprocessed)
// condition and image contexts, with the row-role record needed to strip
// condition rows from the output.
struct DenoiserInput {
    Tensor z_t;             // [K, D]
    Tensor cond_tokens;     // [C', D] preprocessed (empty shape for unconditional)
    Tensor image_tokens;    // [Ti, D] or 0 rows
    float t = 0;
    int target_rows = 0;    // K
};

inline DenoiserInput assemble_input(const Tensor& z_t, const Tensor& preprocessed_cond,
                                    const Tensor& image_tokens, float t) {
    check(z_t.shape.size() == 2, "assemble_input: z_t must be rank 2");
    DenoiserInput in;
    in.z_t = z_t;
    in.cond_tokens = preprocessed_cond;
    in.image_tokens = image_tokens;
    in.t = t;
    in.target_rows = z_t.shape[0];
    if (preprocessed_cond.shape.size() == 2 && preprocessed_cond.shape[0] > 0)
        check(preprocessed_cond.shape[1] == z_t.shape[1], "assemble_input: token dim mismatch");
    return in;
}

// Returns the prediction over the K target rows only; condition rows are
// discarded and never receive loss.
inline Tensor dit_denoise(const DenoiserInput& input, const DitModel& model) {
    const int k = input.target_rows;
    const bool has_cond = input.cond_tokens.shape.size() == 2 && input.cond_tokens.shape[0] > 0;
    ConditionWiring wiring;
    if (has_cond) {
        wiring = conditioning_variant(model.variant, k, input.cond_tokens.shape[0]);
    } else {
        wiring.variant = model.variant;
        wiring.target_rows = k;
        wiring.sequence_rows = k;
    }
    Tensor seq = input.z_t;
    if (has_cond && wiring.variant == ConditioningVariant::Concat)
        seq = ops::concat_rows(input.z_t, input.cond_tokens);
    if (has_cond && wiring.variant == ConditioningVariant::Additive)
        seq = ops::add(input.z_t, input.cond_tokens);

    Tensor x = model.in_proj.forward(seq);
    x = add_row_vector(x, sinusoidal_embedding(input.t, model.dim));

    const bool has_image = input.image_tokens.shape.size() == 2 && input.image_tokens.shape[0] > 0;
    Tensor context = input.image_tokens;
    if (has_cond && wiring.condition_in_image_context)
        context = has_image ? ops::concat_rows(input.image_tokens, input.cond_tokens) : input.cond_tokens;

    for (int li = 0; li < model.layer_count; ++li) {
        x = transformer_layer(x, &context, model.blocks[size_t(li)]);
        if (has_cond && wiring.dedicated_cross_attention) {
            x = ops::add(x, attention_block(model.cond_ca_norms[size_t(li)].forward(x), input.cond_tokens,
                                            model.cond_ca_blocks[size_t(li)]));
        }
    }
    Tensor out = model.out_proj.forward(model.out_norm.forward(x));
    if (out.shape[0] != k) out = ops::slice_rows(out, 0, k);
    return out;
}

// v = v_uncond + s * (v_cond - v_uncond); s == 1 short-circuits to v_cond.
inline Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_uncond, float scale) {
    check(v_cond.shape == v_uncond.shape, "cfg_combine: shape mismatch");
    if (scale == 1.0f) return v_cond;
    Tensor out = Tensor::zeros(v_cond.shape);
    for (size_t i = 0; i < out.numel(); ++i)
        (*out.data)[i] = (*v_uncond.data)[i] + scale * ((*v_cond.data)[i] - (*v_uncond.data)[i]);
    return out;
}

// Denoiser interface for the sampler: (z_t, t, with_image) -> v over K rows.
using DenoiseFn = std::function<Tensor(const Tensor&, int, bool)>;

// Ancestral DDPM over an evenly strided timestep subset. Condition tokens are
// re-injected unchanged each step (inside denoise_fn); CFG applies to the
// image condition only. The final t=0 denoise adds no noise.
inline Tensor ddpm_sample(const DenoiseFn& denoise_fn, const std::vector<int>& k_d_shape,
                          int sample_steps, float cfg_scale, uint64_t seed,
                          const NoiseSchedule& sched) {
    check(sample_steps >= 1 && sample_steps <= sched.steps, "ddpm_sample: steps must be <= T");
    Rng rng(hash_combine(seed, 0xddb3ULL));
    Tensor z = Tensor::randn(k_d_shape, rng);
    const std::vector<int> ts = strided_timesteps(sample_steps, sched.steps);
    // static threshold on x0; latents are unit-scale, so this only catches
    // guidance blow-ups
    constexpr float x0_clamp = 6.0f;
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : -1;
        Tensor v = denoise_fn(z, t, true);
        if (cfg_scale != 1.0f) v = cfg_combine(v, denoise_fn(z, t, false), cfg_scale);
        Tensor x0 = v_convert(VConvert::ToX0, z, v, t, sched);
        for (float& x : *x0.data) x = std::clamp(x, -x0_clamp, x0_clamp);
        if (t_prev < 0) {
            z = x0;
            break;
        }
        const float abar_t = sched.alpha_bars[size_t(t)];
        const float abar_prev = sched.alpha_bars[size_t(t_prev)];
        const float alpha_eff = abar_t / abar_prev;
        const float beta_eff = 1.0f - alpha_eff;
        const float var = beta_eff * (1.0f - abar_prev) / (1.0f - abar_t);
        const float c_x0 = std::sqrt(abar_prev) * beta_eff / (1.0f - abar_t);
        const float c_zt = std::sqrt(alpha_eff) * (1.0f - abar_prev) / (1.0f - abar_t);
        Tensor next = Tensor::zeros(z.shape);
        const float sigma = std::sqrt(std::max(var, 0.0f));
        for (size_t j = 0; j < next.numel(); ++j)
            (*next.data)[j] = c_zt * (*z.data)[j] + c_x0 * (*x0.data)[j] + sigma * rng.normal();
        z = next;
    }
    return z;
}

// Rectified-flow baseline: linear path x_tau = (1-tau) z_coarse + tau z_target
// with constant velocity target (z_target - z_coarse).
struct FlowPair {
    Tensor coarse;  // z^L encoded at the full K tokens
    Tensor target;  // z^H
};

inline Tensor flow_interpolate(const FlowPair& pair, float tau) {
    check(pair.coarse.shape == pair.target.shape, "flow: token-count mismatch between z^L_K and z^H");
    Tensor x = Tensor::zeros(pair.coarse.shape);
    for (size_t i = 0; i < x.numel(); ++i)
        (*x.data)[i] = (1.0f - tau) * (*pair.coarse.data)[i] + tau * (*pair.target.data)[i];
    return x;
}

inline Tensor flow_velocity_target(const FlowPair& pair) {
    check(pair.coarse.shape == pair.target.shape, "flow: token-count mismatch between z^L_K and z^H");
    Tensor v = Tensor::zeros(pair.coarse.shape);
    for (size_t i = 0; i < v.numel(); ++i) (*v.data)[i] = (*pair.target.data)[i] - (*pair.coarse.data)[i];
    return v;
}

// velocity_fn(x, tau, with_image) -> velocity; Euler integration from the
// coarse latent over [0,1].
using VelocityFn = std::function<Tensor(const Tensor&, float, bool)>;

inline Tensor flow_sample(const VelocityFn& velocity_fn, const Tensor& coarse, int steps,
                          float cfg_scale = 1.0f) {
    check(steps >= 1, "flow_sample: steps must be positive");
    Tensor x = coarse.clone();
    x.requires_grad = false;
    x.grad.reset();
    const float dt = 1.0f / float(steps);
    for (int i = 0; i < steps; ++i) {
        const float tau = float(i) * dt;
        Tensor v = velocity_fn(x, tau, true);
        if (cfg_scale != 1.0f) v = cfg_combine(v, velocity_fn(x, tau, false), cfg_scale);
        for (size_t j = 0; j < x.numel(); ++j) (*x.data)[j] += dt * (*v.data)[j];
    }
    return x;
}

}  // namespace regen3d
