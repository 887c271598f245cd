#pragma once

#include <vector>

#include "regen3d/kdtree.hpp"
#include "regen3d/sdf.hpp"
#include "regen3d/vec3.hpp"

namespace regen3d {

struct OrientedPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    void validate() const {
        check(!points.empty(), "OrientedPointCloud: empty");
        check(points.size() == normals.size(), "OrientedPointCloud: point/normal count mismatch");
        for (const Vec3& p : points) check(finite(p), "OrientedPointCloud: non-finite point");
        for (const Vec3& n : normals)
            check(std::fabs(norm(n) - 1.0f) < 1e-4f, "OrientedPointCloud: normal not unit length");
    }
};

// Greedy farthest point sampling. Deterministic: starts from the
// lexicographically smallest point, ties broken by lowest index; each next
// pick maximizes the min squared distance to the selected set.
inline std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int k) {
    const int n = int(points.size());
    check(k >= 1 && k <= n, "farthest_point_sample: need 1 <= K <= N");
    int start = 0;
    for (int i = 1; i < n; ++i) {
        const Vec3& p = points[size_t(i)];
        const Vec3& s = points[size_t(start)];
        if (p.x < s.x || (p.x == s.x && (p.y < s.y || (p.y == s.y && p.z < s.z)))) start = i;
    }
    std::vector<int> selected;
    selected.reserve(size_t(k));
    selected.push_back(start);
    std::vector<float> min_d2(points.size());
    for (int i = 0; i < n; ++i) min_d2[size_t(i)] = norm2(points[size_t(i)] - points[size_t(start)]);
    for (int round = 1; round < k; ++round) {
        int best = 0;
        float best_d2 = -1;
        for (int i = 0; i < n; ++i) {
            if (min_d2[size_t(i)] > best_d2) {
                best_d2 = min_d2[size_t(i)];
                best = i;
            }
        }
        selected.push_back(best);
        for (int i = 0; i < n; ++i)
            min_d2[size_t(i)] = std::min(min_d2[size_t(i)], norm2(points[size_t(i)] - points[size_t(best)]));
    }
    return selected;
}

// Rejection + Newton projection onto the zero set. All returned samples
// satisfy |sdf| < 1e-3; normals are normalized central-difference gradients.
inline OrientedPointCloud sample_surface(const ShapeSpec& shape, int n, uint64_t seed) {
    check(n >= 1, "sample_surface: n must be positive");
    Aabb box = shape_bounds(shape);
    check(box.valid(), "sample_surface: shape has empty bounds");
    const Vec3 pad = box.extent() * 0.05f + Vec3{0.01f, 0.01f, 0.01f};
    box.lo -= pad;
    box.hi += pad;
    const float diag = norm(box.extent());
    const float band = 0.15f * diag;

    Rng rng(hash_combine(seed, 0x5a3f11ull));
    OrientedPointCloud cloud;
    cloud.points.reserve(size_t(n));
    cloud.normals.reserve(size_t(n));
    const long cap = 2000ll * n + 100000;
    long attempts = 0;
    while (int(cloud.points.size()) < n) {
        check(attempts++ < cap, "sample_surface: rejection cap exceeded (degenerate shape)");
        Vec3 q{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y),
               rng.uniform(box.lo.z, box.hi.z)};
        float d = sdf_eval(shape, q);
        if (std::fabs(d) > band) continue;
        bool ok = false;
        for (int iter = 0; iter < 24; ++iter) {
            const Vec3 g = sdf_gradient(shape, q);
            const float g2 = norm2(g);
            if (g2 < 1e-12f) break;
            q -= g * (d / g2);
            d = sdf_eval(shape, q);
            if (std::fabs(d) < 2e-4f) {
                ok = true;
                break;
            }
        }
        if (!ok || std::fabs(d) >= 1e-3f) continue;
        const Vec3 g = sdf_gradient(shape, q);
        const float gn = norm(g);
        if (gn < 1e-8f) continue;
        cloud.points.push_back(q);
        cloud.normals.push_back(g / gn);
    }
    return cloud;
}

struct SimilarityTransform {
    float scale = 1.0f;
    Mat3 rotation = Mat3::identity();
    Vec3 translation{0, 0, 0};

    Vec3 apply(const Vec3& p) const { return rotation * (p * scale) + translation; }
    Vec3 apply_normal(const Vec3& n) const { return rotation * n; }

    SimilarityTransform inverse() const {
        SimilarityTransform inv;
        inv.scale = 1.0f / scale;
        inv.rotation = rotation.transposed();
        inv.translation = inv.rotation * translation * (-inv.scale);
        return inv;
    }
};

inline Aabb cloud_bounds(const std::vector<Vec3>& points) {
    Aabb box;
    for (const Vec3& p : points) box.extend(p);
    return box;
}

// Center the bounding box at the origin and scale the longest axis to span
// exactly [-target_half, target_half]. Returns the applied transform.
inline SimilarityTransform normalize_to_cube(std::vector<Vec3>& points, float target_half = 0.95f) {
    check(!points.empty(), "normalize_to_cube: empty geometry");
    const Aabb box = cloud_bounds(points);
    const Vec3 ext = box.extent();
    const float longest = std::max(ext.x, std::max(ext.y, ext.z));
    check(longest > 0, "normalize_to_cube: zero-extent geometry");
    SimilarityTransform t;
    t.scale = 2.0f * target_half / longest;
    t.translation = box.center() * (-t.scale);
    for (Vec3& p : points) p = t.apply(p);
    return t;
}

}  // namespace regen3d
