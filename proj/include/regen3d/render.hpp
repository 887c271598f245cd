#pragma once

#include "regen3d/image.hpp"
#include "regen3d/pointcloud.hpp"
#include "regen3d/sdf.hpp"

namespace regen3d {

struct CameraSpec {
    float azimuth_deg = 0;
    float elevation_deg = 0;
    float half_width = 1.0f;
    int resolution = 64;

    void validate() const {
        check(resolution >= 8, "CameraSpec: resolution must be >= 8");
        check(resolution <= 4096, "CameraSpec: resolution overflow");
        check(half_width > 0, "CameraSpec: half_width must be positive");
    }
};

struct CameraFrame {
    Vec3 position;  // camera center, distance 3 from the origin
    Vec3 view;      // unit direction from camera toward the origin
    Vec3 right;
    Vec3 up;
};

inline CameraFrame camera_frame(const CameraSpec& cam) {
    constexpr float deg = 3.14159265358979323846f / 180.0f;
    const float az = cam.azimuth_deg * deg;
    const float el = cam.elevation_deg * deg;
    CameraFrame f;
    f.position = Vec3{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)} * 3.0f;
    f.view = normalized(-f.position);
    const Vec3 world_up{0, 0, 1};
    Vec3 r = cross(f.view, world_up);
    if (norm(r) < 1e-6f) r = Vec3{1, 0, 0};
    f.right = normalized(r);
    f.up = cross(f.right, f.view);
    return f;
}

struct RenderResult {
    Image silhouette;  // 1 channel, 1 = hit
    Image depth;       // 1 channel, normalized, background 0
    Image normal_map;  // 3 channels, (n+1)/2, background exact 0
};

namespace detail {

// depth range along the camera axis mapped to [~1 (near) .. ~0.05 (far)]
inline float normalize_depth(float t) {
    const float lo = 3.0f - 1.8f, hi = 3.0f + 1.8f;
    return std::clamp(1.0f - 0.95f * (t - lo) / (hi - lo), 0.02f, 1.0f);
}

}  // namespace detail

// Sphere tracing along d from origin o; returns hit distance or -1.
inline float sphere_trace(const ShapeSpec& shape, const Vec3& o, const Vec3& d, float t_max = 7.0f) {
    float t = 0.0f;
    for (int i = 0; i < 400 && t < t_max; ++i) {
        const float h = sdf_eval(shape, o + d * t);
        if (h < 1e-4f) return t;
        t += std::max(h, 2e-4f);
    }
    return -1.0f;
}

inline RenderResult render_ortho(const ShapeSpec& shape, const CameraSpec& cam) {
    cam.validate();
    const CameraFrame f = camera_frame(cam);
    const int res = cam.resolution;
    RenderResult out{Image(res, res, 1), Image(res, res, 1), Image(res, res, 3)};
    parallel_for(res, [&](int64_t lo, int64_t hi) {
        for (int64_t y = lo; y < hi; ++y)
            for (int x = 0; x < res; ++x) {
                const float u = (float(x) + 0.5f) / float(res) * 2.0f - 1.0f;
                const float v = 1.0f - (float(y) + 0.5f) / float(res) * 2.0f;
                const Vec3 origin = f.position + f.right * (u * cam.half_width) + f.up * (v * cam.half_width);
                const float t = sphere_trace(shape, origin, f.view);
                if (t < 0) continue;
                out.silhouette.at(x, int(y), 0) = 1.0f;
                out.depth.at(x, int(y), 0) = detail::normalize_depth(t);
                const Vec3 n = normalized(sdf_gradient(shape, origin + f.view * t));
                for (int c = 0; c < 3; ++c) out.normal_map.at(x, int(y), c) = (n[c] + 1.0f) * 0.5f;
            }
    }, 8);
    return out;
}

// Point-splatting renderer for clouds: z-buffered discs of ~1.5 px radius.
inline RenderResult render_ortho(const OrientedPointCloud& cloud, const CameraSpec& cam) {
    cam.validate();
    const CameraFrame f = camera_frame(cam);
    const int res = cam.resolution;
    RenderResult out{Image(res, res, 1), Image(res, res, 1), Image(res, res, 3)};
    std::vector<float> zbuf(size_t(res) * size_t(res), 1e30f);
    const float splat = std::max(1.5f, float(res) / 128.0f);
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3 rel = cloud.points[i] - f.position;
        const float u = dot(rel, f.right) / cam.half_width;
        const float v = dot(rel, f.up) / cam.half_width;
        const float t = dot(rel, f.view);
        const float px = (u + 1.0f) * 0.5f * float(res) - 0.5f;
        const float py = (1.0f - v) * 0.5f * float(res) - 0.5f;
        const int x0 = std::max(0, int(std::floor(px - splat)));
        const int x1 = std::min(res - 1, int(std::ceil(px + splat)));
        const int y0 = std::max(0, int(std::floor(py - splat)));
        const int y1 = std::min(res - 1, int(std::ceil(py + splat)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const float dx = float(x) - px, dy = float(y) - py;
                if (dx * dx + dy * dy > splat * splat) continue;
                float& z = zbuf[size_t(y) * size_t(res) + size_t(x)];
                if (t >= z) continue;
                z = t;
                out.silhouette.at(x, y, 0) = 1.0f;
                out.depth.at(x, y, 0) = detail::normalize_depth(t);
                const Vec3 n = cloud.normals[i];
                for (int c = 0; c < 3; ++c) out.normal_map.at(x, y, c) = (n[c] + 1.0f) * 0.5f;
            }
    }
    return out;
}

// Conditioning image layout: RGB with R = silhouette, G = depth, B = 0.
inline Image condition_image(const RenderResult& r) {
    Image img(r.silhouette.width, r.silhouette.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            img.at(x, y, 0) = r.silhouette.at(x, y, 0);
            img.at(x, y, 1) = r.depth.at(x, y, 0);
        }
    return img;
}

}  // namespace regen3d
