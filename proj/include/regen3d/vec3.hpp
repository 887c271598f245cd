#pragma once

#include <array>
#include <cmath>

#include "regen3d/core.hpp"

namespace regen3d {

struct Vec3 {
    float x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(float s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3& operator*=(float s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    float& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline float dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline float norm2(const Vec3& a) { return dot(a, a); }
inline Vec3 normalized(const Vec3& a) {
    const float n = norm(a);
    return n > 0 ? a / n : Vec3{0, 0, 0};
}
inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3 abs(const Vec3& a) { return {std::fabs(a.x), std::fabs(a.y), std::fabs(a.z)}; }
inline bool finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

struct Mat3 {
    // row-major
    std::array<float, 9> m = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }

    float operator()(int r, int c) const { return m[size_t(r) * 3 + size_t(c)]; }
    float& operator()(int r, int c) { return m[size_t(r) * 3 + size_t(c)]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                float acc = 0;
                for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
                r(i, j) = acc;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
};

struct Quat {
    float w = 1, x = 0, y = 0, z = 0;

    static Quat identity() { return {}; }

    Quat normalized() const {
        const float n = std::sqrt(w * w + x * x + y * y + z * z);
        check(n > 0, "Quat: zero norm");
        return {w / n, x / n, y / n, z / n};
    }

    Mat3 to_matrix() const {
        Quat q = normalized();
        Mat3 r;
        const float xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
        const float xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
        const float wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
        r(0, 0) = 1 - 2 * (yy + zz);
        r(0, 1) = 2 * (xy - wz);
        r(0, 2) = 2 * (xz + wy);
        r(1, 0) = 2 * (xy + wz);
        r(1, 1) = 1 - 2 * (xx + zz);
        r(1, 2) = 2 * (yz - wx);
        r(2, 0) = 2 * (xz - wy);
        r(2, 1) = 2 * (yz + wx);
        r(2, 2) = 1 - 2 * (xx + yy);
        return r;
    }

    static Quat from_axis_angle(const Vec3& axis, float angle_rad) {
        const Vec3 a = regen3d::normalized(axis);
        const float h = 0.5f * angle_rad;
        const float s = std::sin(h);
        return {std::cos(h), a.x * s, a.y * s, a.z * s};
    }

    // Shoemake's uniform random rotation
    static Quat random(Rng& rng) {
        const float u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
        constexpr float two_pi = 6.283185307179586f;
        const float a = std::sqrt(1.0f - u1), b = std::sqrt(u1);
        return Quat{b * std::cos(two_pi * u3), a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                    b * std::sin(two_pi * u3)}
            .normalized();
    }
};

// Jacobi eigen-decomposition of a symmetric n x n matrix (n <= 4 here).
// Eigenvalues ascending; eigenvectors as columns of v.
template <int N>
inline void jacobi_eigen_symmetric(std::array<float, N * N> a, std::array<float, N>& eigenvalues,
                                   std::array<float, N * N>& v) {
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) v[size_t(i) * N + j] = (i == j) ? 1.0f : 0.0f;
    for (int sweep = 0; sweep < 64; ++sweep) {
        float off = 0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a[size_t(p) * N + q] * a[size_t(p) * N + q];
        if (off < 1e-18f) break;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) {
                const float apq = a[size_t(p) * N + q];
                if (std::fabs(apq) < 1e-20f) continue;
                const float app = a[size_t(p) * N + p];
                const float aqq = a[size_t(q) * N + q];
                const float theta = 0.5f * (aqq - app) / apq;
                const float t = (theta >= 0 ? 1.0f : -1.0f) /
                                (std::fabs(theta) + std::sqrt(theta * theta + 1.0f));
                const float c = 1.0f / std::sqrt(t * t + 1.0f);
                const float s = t * c;
                for (int k = 0; k < N; ++k) {
                    const float akp = a[size_t(k) * N + p];
                    const float akq = a[size_t(k) * N + q];
                    a[size_t(k) * N + p] = c * akp - s * akq;
                    a[size_t(k) * N + q] = s * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    const float apk = a[size_t(p) * N + k];
                    const float aqk = a[size_t(q) * N + k];
                    a[size_t(p) * N + k] = c * apk - s * aqk;
                    a[size_t(q) * N + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < N; ++k) {
                    const float vkp = v[size_t(k) * N + p];
                    const float vkq = v[size_t(k) * N + q];
                    v[size_t(k) * N + p] = c * vkp - s * vkq;
                    v[size_t(k) * N + q] = s * vkp + c * vkq;
                }
            }
    }
    // sort ascending by eigenvalue, permuting eigenvector columns
    std::array<int, N> idx;
    for (int i = 0; i < N; ++i) idx[size_t(i)] = i;
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
            if (a[size_t(idx[size_t(j)]) * N + idx[size_t(j)]] <
                a[size_t(idx[size_t(i)]) * N + idx[size_t(i)]])
                std::swap(idx[size_t(i)], idx[size_t(j)]);
    std::array<float, N * N> vs = v;
    for (int i = 0; i < N; ++i) {
        eigenvalues[size_t(i)] = a[size_t(idx[size_t(i)]) * N + idx[size_t(i)]];
        for (int k = 0; k < N; ++k) v[size_t(k) * N + i] = vs[size_t(k) * N + idx[size_t(i)]];
    }
}

struct Aabb {
    Vec3 lo{1e30f, 1e30f, 1e30f};
    Vec3 hi{-1e30f, -1e30f, -1e30f};

    void extend(const Vec3& p) {
        lo = min(lo, p);
        hi = max(hi, p);
    }
    void extend(const Aabb& b) {
        lo = min(lo, b.lo);
        hi = max(hi, b.hi);
    }
    Vec3 center() const { return (lo + hi) * 0.5f; }
    Vec3 extent() const { return hi - lo; }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
};

}  // namespace regen3d
