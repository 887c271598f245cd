#pragma once

#include <functional>
#include <optional>

#include <json.hpp>

#include "regen3d/image.hpp"
#include "regen3d/kdtree.hpp"
#include "regen3d/pointcloud.hpp"

namespace regen3d {

// Unsquared-L2 Chamfer: 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|).
inline double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    check(!a.empty() && !b.empty(), "chamfer_distance: empty cloud");
    const KdTree tree_a(a), tree_b(b);
    double sum_ab = 0, sum_ba = 0;
    for (const Vec3& p : a) sum_ab += std::sqrt(double(tree_b.nearest(p).dist2));
    for (const Vec3& p : b) sum_ba += std::sqrt(double(tree_a.nearest(p).dist2));
    return 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
}

// precision = fraction of A within tau of B, recall likewise; F = 2PR/(P+R).
inline double fscore(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau = 0.01) {
    check(!a.empty() && !b.empty(), "fscore: empty cloud");
    check(tau > 0, "fscore: tau must be positive");
    const KdTree tree_a(a), tree_b(b);
    const double tau2 = tau * tau;
    size_t hit_a = 0, hit_b = 0;
    for (const Vec3& p : a) hit_a += double(tree_b.nearest(p).dist2) <= tau2 ? 1 : 0;
    for (const Vec3& p : b) hit_b += double(tree_a.nearest(p).dist2) <= tau2 ? 1 : 0;
    const double precision = double(hit_a) / double(a.size());
    const double recall = double(hit_b) / double(b.size());
    if (precision + recall <= 0) return 0;
    return 2.0 * precision * recall / (precision + recall);
}

// Occupancy field: true where sdf(p) <= 0.
using OccupancyFn = std::function<void(const std::vector<Vec3>&, std::vector<bool>&)>;

inline OccupancyFn occupancy_from_shape(const ShapeSpec& shape) {
    return [shape](const std::vector<Vec3>& pts, std::vector<bool>& out) {
        out.resize(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) out[i] = sdf_eval(shape, pts[i]) <= 0.0f;
    };
}

// Voxel IoU over [-1,1]^3 at cell centers; 1.0 when both shapes are empty.
inline double voxel_iou(const OccupancyFn& a, const OccupancyFn& b, int resolution) {
    check(resolution >= 16, "voxel_iou: resolution must be >= 16");
    const float step = 2.0f / float(resolution);
    size_t inter = 0, uni = 0;
    std::vector<Vec3> centers(size_t(resolution) * size_t(resolution));
    std::vector<bool> occ_a, occ_b;
    for (int z = 0; z < resolution; ++z) {
        size_t idx = 0;
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x)
                centers[idx++] = Vec3{-1.0f + step * (float(x) + 0.5f), -1.0f + step * (float(y) + 0.5f),
                                      -1.0f + step * (float(z) + 0.5f)};
        a(centers, occ_a);
        b(centers, occ_b);
        for (size_t i = 0; i < centers.size(); ++i) {
            inter += (occ_a[i] && occ_b[i]) ? 1 : 0;
            uni += (occ_a[i] || occ_b[i]) ? 1 : 0;
        }
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

// PSNR between normal maps over the shared foreground (background = exact
// black pixels, excluded on either side). Identical images cap at 99 dB;
// no overlapping foreground -> absent.
inline std::optional<double> normal_psnr(const Image& a, const Image& b) {
    check(a.same_size(b), "normal_psnr: resolution mismatch");
    check(a.channels == 3, "normal_psnr: 3-channel normal maps required");
    double sq = 0;
    size_t count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            bool fg_a = false, fg_b = false;
            for (int c = 0; c < 3; ++c) {
                fg_a = fg_a || a.at(x, y, c) != 0.0f;
                fg_b = fg_b || b.at(x, y, c) != 0.0f;
            }
            if (!fg_a || !fg_b) continue;
            for (int c = 0; c < 3; ++c) {
                const double da = std::lround(std::clamp(a.at(x, y, c), 0.0f, 1.0f) * 255.0f);
                const double db = std::lround(std::clamp(b.at(x, y, c), 0.0f, 1.0f) * 255.0f);
                sq += (da - db) * (da - db);
                ++count;
            }
        }
    if (count == 0) return std::nullopt;
    const double mse = sq / double(count);
    if (mse <= 0) return 99.0;
    return std::min(99.0, 20.0 * std::log10(255.0 / std::sqrt(mse)));
}

struct MetricSample {
    std::string id;
    std::optional<double> cd, fscore, iou, psnr;
};

struct MetricReport {
    std::vector<MetricSample> samples;
    int eval_points = 10000;
    double tau = 0.01;
    int voxel_resolution = 64;
    std::string chamfer_convention = "unsquared_l2_mean_of_means";

    std::optional<double> aggregate(std::optional<double> MetricSample::* field) const {
        double sum = 0;
        size_t n = 0;
        for (const auto& s : samples)
            if (s.*field) {
                sum += *(s.*field);
                ++n;
            }
        if (n == 0) return std::nullopt;
        return sum / double(n);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config"] = {{"eval_points", eval_points},
                       {"tau", tau},
                       {"voxel_resolution", voxel_resolution},
                       {"chamfer", chamfer_convention}};
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : samples) {
            nlohmann::json e;
            e["id"] = s.id;
            if (s.cd) e["cd"] = *s.cd;
            if (s.fscore) e["fscore"] = *s.fscore;
            if (s.iou) e["iou"] = *s.iou;
            if (s.psnr) e["psnr"] = *s.psnr;
            arr.push_back(e);
        }
        j["samples"] = arr;
        nlohmann::json agg;
        if (auto v = aggregate(&MetricSample::cd)) agg["cd"] = *v;
        if (auto v = aggregate(&MetricSample::fscore)) agg["fscore"] = *v;
        if (auto v = aggregate(&MetricSample::iou)) agg["iou"] = *v;
        if (auto v = aggregate(&MetricSample::psnr)) agg["psnr"] = *v;
        j["aggregate"] = agg;
        return j;
    }
};

}  // namespace regen3d
