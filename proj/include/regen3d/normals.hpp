#pragma once

#include "regen3d/kdtree.hpp"
#include "regen3d/pointcloud.hpp"

namespace regen3d {

// Covariance-analysis normals: the eigenvector of the smallest eigenvalue of
// each point's k-nearest-neighbor covariance, sign-flipped toward the
// viewpoint. Degenerate neighborhoods fall back to the viewpoint direction.
inline std::vector<Vec3> estimate_normals_covariance(const std::vector<Vec3>& points, int k_nn,
                                                     const Vec3& viewpoint) {
    const int n = int(points.size());
    check(k_nn >= 3, "estimate_normals_covariance: k_nn must be at least 3");
    check(n > k_nn, "estimate_normals_covariance: need N > k_nn");
    KdTree tree(points);
    std::vector<Vec3> normals(points.size());
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const Vec3& p = points[size_t(i)];
            const auto nbrs = tree.knearest(p, k_nn, int(i));
            Vec3 mean{0, 0, 0};
            for (const auto& h : nbrs) mean += points[size_t(h.index)];
            mean = mean / float(nbrs.size());
            std::array<float, 9> cov{};
            for (const auto& h : nbrs) {
                const Vec3 d = points[size_t(h.index)] - mean;
                cov[0] += d.x * d.x;
                cov[1] += d.x * d.y;
                cov[2] += d.x * d.z;
                cov[4] += d.y * d.y;
                cov[5] += d.y * d.z;
                cov[8] += d.z * d.z;
            }
            cov[3] = cov[1];
            cov[6] = cov[2];
            cov[7] = cov[5];
            float trace = cov[0] + cov[4] + cov[8];
            Vec3 normal;
            if (trace < 1e-20f) {
                normal = normalized(viewpoint - p);
            } else {
                std::array<float, 3> evals;
                std::array<float, 9> evecs;
                jacobi_eigen_symmetric<3>(cov, evals, evecs);
                normal = {evecs[0], evecs[3], evecs[6]};  // smallest-eigenvalue column
                const float nn = norm(normal);
                normal = nn > 1e-12f ? normal / nn : normalized(viewpoint - p);
            }
            if (dot(viewpoint - p, normal) < 0) normal = -normal;
            normals[size_t(i)] = normal;
        }
    }, 256);
    return normals;
}

}  // namespace regen3d
