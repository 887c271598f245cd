#pragma once

#include "regen3d/marching_cubes.hpp"
#include "regen3d/nn.hpp"
#include "regen3d/pointcloud.hpp"

namespace regen3d {

// Targets are the truncation-normalized SDF clamp(sdf/SdfTruncation, -1, 1),
// so decoded values live in token units of the truncation band; multiply by
// SdfTruncation to read them in scene units.
inline constexpr float kSdfTruncation = 0.1f;
inline constexpr int kFourierBands = 8;

// Set-latent code: K tokens with the FPS anchor positions that seeded them.
// Generated codes (from the diffusion sampler) carry no anchors.
struct LatentSet {
    Tensor tokens;  // [K, D]
    std::vector<Vec3> anchors;

    int token_count() const { return tokens.shape.empty() ? 0 : tokens.shape[0]; }
    int dim() const { return tokens.shape.size() < 2 ? 0 : tokens.shape[1]; }
};

// Set-latent shape autoencoder. The encoder initializes K tokens from FPS
// anchors, pools over all embedded points with one cross-attention block and
// refines with two self-attention layers; the decoder answers SDF queries by
// attending to the tokens.
struct VecSetAE {
    int dim = 64;
    int heads = 4;
    bool variational = false;

    LinearParams point_embed;   // fourier(p, n) -> D
    LinearParams query_embed;   // fourier(q) -> D
    CrossAttnLayerParams pool;
    std::vector<TransformerLayerParams> self_layers;
    std::vector<CrossAttnLayerParams> decoder_layers;
    LayerNormParams decoder_norm;
    LinearParams decoder_head;  // D -> 1
    LinearParams mu_head, logvar_head;  // variational mode only

    VecSetAE() = default;
    VecSetAE(int d, int h, Rng& rng, bool variational_mode = false)
        : dim(d),
          heads(h),
          variational(variational_mode),
          point_embed(d, 6 * (1 + 2 * kFourierBands), rng),
          query_embed(d, 3 * (1 + 2 * kFourierBands), rng),
          pool(d, h, rng),
          decoder_norm(d),
          decoder_head(1, d, rng) {
        for (int i = 0; i < 2; ++i) self_layers.emplace_back(d, h, false, rng);
        // decoder queries dominate runtime: slimmer FFN keeps grid decoding fast
        for (int i = 0; i < 2; ++i) decoder_layers.emplace_back(d, h, rng, 2 * d);
        if (variational) {
            mu_head = LinearParams(d, d, rng);
            logvar_head = LinearParams::zero_init(d, d);
        }
    }

    ParamMap params() {
        ParamMap m;
        m.add_all("point_embed", point_embed.params());
        m.add_all("query_embed", query_embed.params());
        m.add_all("pool", pool.params());
        for (size_t i = 0; i < self_layers.size(); ++i)
            m.add_all("self" + std::to_string(i), self_layers[i].params());
        for (size_t i = 0; i < decoder_layers.size(); ++i)
            m.add_all("dec" + std::to_string(i), decoder_layers[i].params());
        m.add_all("dec_norm", decoder_norm.params());
        m.add_all("head", decoder_head.params());
        if (variational) {
            m.add_all("mu", mu_head.params());
            m.add_all("logvar", logvar_head.params());
        }
        return m;
    }

    Tensor embed_points(const OrientedPointCloud& cloud) const {
        const int n = int(cloud.size());
        Tensor feats = Tensor::zeros({n, 6});
        for (int i = 0; i < n; ++i) {
            feats.at(i, 0) = cloud.points[size_t(i)].x;
            feats.at(i, 1) = cloud.points[size_t(i)].y;
            feats.at(i, 2) = cloud.points[size_t(i)].z;
            feats.at(i, 3) = cloud.normals[size_t(i)].x;
            feats.at(i, 4) = cloud.normals[size_t(i)].y;
            feats.at(i, 5) = cloud.normals[size_t(i)].z;
        }
        return point_embed.forward(ops::fourier_features(feats, kFourierBands));
    }

    Tensor encode_backbone(const OrientedPointCloud& cloud, int k, std::vector<Vec3>* anchors_out) const {
        check(k >= 1 && size_t(k) <= cloud.size(), "encode: need K <= N");
        cloud.validate();
        Tensor embedded = embed_points(cloud);
        const std::vector<int> anchor_idx = farthest_point_sample(cloud.points, k);
        if (anchors_out) {
            anchors_out->clear();
            for (int i : anchor_idx) anchors_out->push_back(cloud.points[size_t(i)]);
        }
        Tensor tokens = ops::gather_rows(embedded, anchor_idx);
        tokens = pool.forward(tokens, embedded);
        for (const auto& layer : self_layers) tokens = transformer_layer(tokens, nullptr, layer);
        return tokens;
    }

    // Encoder forward on the tape (training); variational mode returns the
    // mean path here (sampling happens in encode_variational).
    Tensor encode_tokens(const OrientedPointCloud& cloud, int k,
                         std::vector<Vec3>* anchors_out = nullptr) const {
        Tensor tokens = encode_backbone(cloud, k, anchors_out);
        if (variational) tokens = mu_head.forward(tokens);
        return tokens;
    }

    struct VariationalOut {
        Tensor tokens, mu, logvar;
    };

    VariationalOut encode_variational(const OrientedPointCloud& cloud, int k, Rng& rng) const {
        check(variational, "encode_variational: model is not in variational mode");
        Tensor backbone = encode_backbone(cloud, k, nullptr);
        VariationalOut out;
        out.mu = mu_head.forward(backbone);
        out.logvar = logvar_head.forward(backbone);
        Tensor eps = Tensor::randn(out.mu.shape, rng);
        out.tokens = ops::add(out.mu, ops::mul(ops::exp(ops::scale(out.logvar, 0.5f)), eps));
        return out;
    }

    LatentSet encode(const OrientedPointCloud& cloud, int k) const {
        NoGradGuard ng;
        LatentSet z;
        z.tokens = encode_tokens(cloud, k, &z.anchors);
        return z;
    }

    // Decoder forward; queries [Q,3] on the tape when training.
    Tensor decode_tokens(const Tensor& tokens, const Tensor& queries) const {
        check(queries.shape.size() == 2 && queries.shape[1] == 3, "decode_sdf: queries must be Qx3");
        if (queries.shape[0] == 0) return Tensor::zeros({0, 1});
        Tensor q = query_embed.forward(ops::fourier_features(queries, kFourierBands));
        for (const auto& layer : decoder_layers) q = layer.forward(q, tokens);
        return decoder_head.forward(decoder_norm.forward(q));
    }

    // Truncation-normalized SDF at each query (scene units = value * 0.1).
    std::vector<float> decode_sdf(const LatentSet& z, const std::vector<Vec3>& queries) const {
        NoGradGuard ng;
        Tensor q = Tensor::zeros({int(queries.size()), 3});
        for (size_t i = 0; i < queries.size(); ++i) {
            q.at(int(i), 0) = queries[i].x;
            q.at(int(i), 1) = queries[i].y;
            q.at(int(i), 2) = queries[i].z;
        }
        Tensor out = decode_tokens(z.tokens, q);
        return *out.data;
    }

    SdfGrid decode_grid(const LatentSet& z, int resolution) const {
        SdfGrid grid;
        grid.resolution = resolution;
        const int n = resolution + 1;
        grid.values.resize(size_t(n) * n * n);
        // decode plane by plane to bound peak memory
        std::vector<Vec3> queries(size_t(n) * n);
        for (int zi = 0; zi < n; ++zi) {
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) queries[size_t(y) * n + x] = grid.position(x, y, zi);
            const std::vector<float> vals = decode_sdf(z, queries);
            std::copy(vals.begin(), vals.end(), grid.values.begin() + size_t(zi) * n * n);
        }
        return grid;
    }

    TriangleMesh extract_mesh(const LatentSet& z, int resolution) const {
        check(resolution >= 16, "extract_mesh: resolution must be >= 16");
        return marching_cubes(decode_grid(z, resolution));
    }
};

struct AeLossReport {
    float total = 0;
    float sdf_mse = 0;
    float kl = 0;
    bool finite = true;
};

struct AeQueryBatch {
    Tensor queries;  // [Q,3]
    Tensor targets;  // [Q,1], truncation-normalized
};

// 2048 near-surface queries (surface points + isotropic sigma=0.02 jitter)
// and 2048 uniform queries, with clamp(sdf/0.1, +-1) targets.
inline AeQueryBatch make_ae_queries(const OrientedPointCloud& cloud, const ShapeSpec& shape, Rng& rng,
                                    int near_count = 2048, int uniform_count = 2048) {
    const int total = near_count + uniform_count;
    AeQueryBatch b;
    b.queries = Tensor::zeros({total, 3});
    b.targets = Tensor::zeros({total, 1});
    for (int i = 0; i < total; ++i) {
        Vec3 q;
        if (i < near_count) {
            const Vec3& p = cloud.points[rng.uniform_index(cloud.size())];
            q = p + Vec3{rng.normal(0, 0.02f), rng.normal(0, 0.02f), rng.normal(0, 0.02f)};
        } else {
            q = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        }
        b.queries.at(i, 0) = q.x;
        b.queries.at(i, 1) = q.y;
        b.queries.at(i, 2) = q.z;
        const float sdf = sdf_eval(shape, q);
        (*b.targets.data)[size_t(i)] = std::clamp(sdf / kSdfTruncation, -1.0f, 1.0f);
    }
    return b;
}

}  // namespace regen3d
