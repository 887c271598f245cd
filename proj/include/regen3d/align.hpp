#pragma once

#include "regen3d/pointcloud.hpp"

namespace regen3d {

// Closed-form least-squares similarity (scale, rotation, translation) from
// known correspondences: Horn's quaternion method for the rotation, then the
// optimal scale and translation. Requires >= 3 non-collinear pairs.
inline SimilarityTransform similarity_align(const std::vector<Vec3>& source,
                                            const std::vector<Vec3>& target) {
    const size_t n = source.size();
    check(n == target.size(), "similarity_align: correspondence count mismatch");
    check(n >= 3, "similarity_align: need at least 3 pairs");
    Vec3 mu_s{0, 0, 0}, mu_t{0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
        mu_s += source[i];
        mu_t += target[i];
    }
    mu_s = mu_s / float(n);
    mu_t = mu_t / float(n);

    // cross-covariance and source spread
    float cov[3][3] = {};
    double var_s = 0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = source[i] - mu_s;
        const Vec3 b = target[i] - mu_t;
        var_s += double(norm2(a));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[r][c] += a[r] * b[c];
    }
    check(var_s > 1e-20, "similarity_align: degenerate source (coincident points)");

    // collinearity check: two near-zero eigenvalues of the source scatter
    {
        std::array<float, 9> scatter{};
        for (size_t i = 0; i < n; ++i) {
            const Vec3 a = source[i] - mu_s;
            scatter[0] += a.x * a.x;
            scatter[1] += a.x * a.y;
            scatter[2] += a.x * a.z;
            scatter[4] += a.y * a.y;
            scatter[5] += a.y * a.z;
            scatter[8] += a.z * a.z;
        }
        scatter[3] = scatter[1];
        scatter[6] = scatter[2];
        scatter[7] = scatter[5];
        std::array<float, 3> evals;
        std::array<float, 9> evecs;
        jacobi_eigen_symmetric<3>(scatter, evals, evecs);
        const float total = evals[0] + evals[1] + evals[2];
        check(evals[1] > 1e-9f * std::max(total, 1e-12f),
              "similarity_align: collinear or degenerate correspondences");
    }

    // Horn's 4x4 N matrix; its largest eigenvector is the optimal rotation.
    const float sxx = cov[0][0], sxy = cov[0][1], sxz = cov[0][2];
    const float syx = cov[1][0], syy = cov[1][1], syz = cov[1][2];
    const float szx = cov[2][0], szy = cov[2][1], szz = cov[2][2];
    std::array<float, 16> nmat = {
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz};
    std::array<float, 4> evals;
    std::array<float, 16> evecs;
    jacobi_eigen_symmetric<4>(nmat, evals, evecs);
    // largest eigenvalue is last (ascending); eigenvector = column 3
    Quat q{evecs[3], evecs[7], evecs[11], evecs[15]};
    SimilarityTransform t;
    t.rotation = q.normalized().to_matrix();

    double num = 0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = t.rotation * (source[i] - mu_s);
        num += double(dot(a, target[i] - mu_t));
    }
    t.scale = float(num / var_s);
    check(t.scale > 0, "similarity_align: non-positive scale (reflected correspondences)");
    t.translation = mu_t - t.rotation * mu_s * t.scale;
    return t;
}

inline double alignment_rms(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                            const SimilarityTransform& t) {
    double acc = 0;
    for (size_t i = 0; i < source.size(); ++i) acc += double(norm2(t.apply(source[i]) - target[i]));
    return std::sqrt(acc / double(source.size()));
}

}  // namespace regen3d
