#pragma once

#include "regen3d/edit_mask.hpp"
#include "regen3d/vecset_ae.hpp"

namespace regen3d {

enum class ConditioningVariant { Concat, AdditionalCA, ExtendedCA, Additive };

inline const char* variant_name(ConditioningVariant v) {
    switch (v) {
        case ConditioningVariant::Concat: return "concat";
        case ConditioningVariant::AdditionalCA: return "additional_ca";
        case ConditioningVariant::ExtendedCA: return "extended_ca";
        case ConditioningVariant::Additive: return "additive";
    }
    return "concat";
}

inline ConditioningVariant variant_from_name(const std::string& n) {
    if (n == "concat") return ConditioningVariant::Concat;
    if (n == "additional_ca") return ConditioningVariant::AdditionalCA;
    if (n == "extended_ca") return ConditioningVariant::ExtendedCA;
    if (n == "additive") return ConditioningVariant::Additive;
    throw std::runtime_error("unknown conditioning variant: " + n);
}

// Condition tokens plus their anchor positions, before zero-init
// preprocessing. For the edit task the tail rows come from the learnable
// mask-token bank and the anchors are FPS samples inside the mask solid.
struct ConditionBundle {
    Tensor tokens;              // [C', D] raw (encoder output / bank rows)
    std::vector<Vec3> anchors;  // C' positions
    ConditioningVariant variant = ConditioningVariant::Concat;
    int bank_token_count = 0;   // k, trailing rows drawn from the bank

    int count() const { return tokens.shape.empty() ? 0 : tokens.shape[0]; }
};

// Zero-init condition preprocessing: MLP(tokens + PE(anchors)) where both
// the MLP output layer and the learned PE projection start at zero, so a
// fresh model is blind to the condition.
struct ConditionerParams {
    LinearParams pe_proj;   // fourier(anchor) -> D, zero-init
    LinearParams mlp_fc1;   // D -> 2D
    LinearParams mlp_fc2;   // 2D -> D, zero-init
    Tensor edit_bank;       // [C, D] learnable mask tokens z^M
    int dim = 0;
    int bank_rows = 0;

    ConditionerParams() = default;
    ConditionerParams(int d, int bank_capacity, Rng& rng)
        : pe_proj(LinearParams::zero_init(d, 3 * (1 + 2 * kFourierBands))),
          mlp_fc1(2 * d, d, rng),
          mlp_fc2(LinearParams::zero_init(d, 2 * d)),
          edit_bank(Tensor::randn({bank_capacity, d}, rng, 0.02f)),
          dim(d),
          bank_rows(bank_capacity) {
        edit_bank.requires_grad = true;
        edit_bank.ensure_grad();
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("pe", pe_proj.params());
        m.add_all("fc1", mlp_fc1.params());
        m.add_all("fc2", mlp_fc2.params());
        m.add("edit_bank", &edit_bank);
        return m;
    }
};

inline Tensor anchors_tensor(const std::vector<Vec3>& anchors) {
    Tensor t = Tensor::zeros({int(anchors.size()), 3});
    for (size_t i = 0; i < anchors.size(); ++i) {
        t.at(int(i), 0) = anchors[i].x;
        t.at(int(i), 1) = anchors[i].y;
        t.at(int(i), 2) = anchors[i].z;
    }
    return t;
}

inline Tensor preprocess_condition(const ConditionBundle& bundle, const ConditionerParams& params) {
    check(bundle.count() >= 1, "preprocess_condition: empty condition");
    check(bundle.anchors.size() == size_t(bundle.count()),
          "preprocess_condition: anchor/token count mismatch");
    Tensor pe = params.pe_proj.forward(
        ops::fourier_features(anchors_tensor(bundle.anchors), kFourierBands));
    Tensor x = ops::add(bundle.tokens, pe);
    return params.mlp_fc2.forward(ops::gelu(params.mlp_fc1.forward(x)));
}

// k = min(C, max(round(C*r), k_min)); integral and clamped to the budget.
inline int allocate_edit_tokens(int c, float r, int k_min) {
    check(r >= 0.0f && r <= 1.0f, "allocate_edit_tokens: r must be in [0,1]");
    check(k_min >= 0 && k_min < c, "allocate_edit_tokens: need 0 <= k_min < C");
    const int k = int(std::lround(double(c) * double(r)));
    return std::min(c, std::max(k, k_min));
}

// Encode the source minus the masked points at C-k tokens, then append k
// bank tokens anchored at FPS samples inside the mask solid.
inline ConditionBundle build_edit_condition(const OrientedPointCloud& source, const EditMask& mask,
                                            int c, int k_min, const VecSetAE& ae,
                                            const ConditionerParams& conditioner, uint64_t seed) {
    check(conditioner.bank_rows >= c, "build_edit_condition: bank smaller than C");
    const int k = allocate_edit_tokens(c, mask.masked_fraction, k_min);
    check(c - k >= 1, "build_edit_condition: C-k must be at least 1");
    OrientedPointCloud remainder;
    for (size_t i = 0; i < source.size(); ++i) {
        if (!mask.contains(source.points[i])) {
            remainder.points.push_back(source.points[i]);
            remainder.normals.push_back(source.normals[i]);
        }
    }
    check(!remainder.empty(), "build_edit_condition: mask removes every point");
    check(int(remainder.size()) >= c - k, "build_edit_condition: too few points left to encode");
    LatentSet encoded = ae.encode(remainder, c - k);

    std::vector<Vec3> inside = mask.sample_inside(std::max(4 * k, 64), seed);
    const std::vector<int> fps_idx = farthest_point_sample(inside, k);
    ConditionBundle bundle;
    std::vector<int> bank_rows(size_t(k), 0);
    for (int i = 0; i < k; ++i) bank_rows[size_t(i)] = i;
    {
        NoGradGuard ng;
        bundle.tokens = ops::concat_rows(encoded.tokens, ops::gather_rows(conditioner.edit_bank, bank_rows));
    }
    bundle.anchors = encoded.anchors;
    for (int i : fps_idx) bundle.anchors.push_back(inside[size_t(i)]);
    bundle.bank_token_count = k;
    return bundle;
}

// Rebuild the bundle's bank rows on the tape so bank gradients flow during
// training (encoded rows stay constant inputs).
inline Tensor bundle_tokens_for_training(const ConditionBundle& bundle,
                                         const ConditionerParams& conditioner) {
    if (bundle.bank_token_count == 0) return bundle.tokens.detach();
    const int total = bundle.count();
    const int k = bundle.bank_token_count;
    Tensor encoded = ops::slice_rows(bundle.tokens.detach(), 0, total - k);
    std::vector<int> rows(size_t(k), 0);
    for (int i = 0; i < k; ++i) rows[size_t(i)] = i;
    return ops::concat_rows(encoded, ops::gather_rows(conditioner.edit_bank, rows));
}

// Wiring descriptor for the denoiser: how condition tokens reach the model.
struct ConditionWiring {
    ConditioningVariant variant = ConditioningVariant::Concat;
    int target_rows = 0;     // K
    int condition_rows = 0;  // C'
    int sequence_rows = 0;   // rows entering the transformer
    bool dedicated_cross_attention = false;
    bool condition_in_image_context = false;
};

inline ConditionWiring conditioning_variant(ConditioningVariant variant, int k, int c) {
    check(k >= 1, "conditioning_variant: K must be positive");
    check(c >= 1, "conditioning_variant: empty condition rejected");
    ConditionWiring w;
    w.variant = variant;
    w.target_rows = k;
    w.condition_rows = c;
    switch (variant) {
        case ConditioningVariant::Concat:
            w.sequence_rows = k + c;
            break;
        case ConditioningVariant::Additive:
            check(c == k, "conditioning_variant: additive requires C == K");
            w.sequence_rows = k;
            break;
        case ConditioningVariant::AdditionalCA:
            w.sequence_rows = k;
            w.dedicated_cross_attention = true;
            break;
        case ConditioningVariant::ExtendedCA:
            w.sequence_rows = k;
            w.condition_in_image_context = true;
            break;
    }
    return w;
}

}  // namespace regen3d
