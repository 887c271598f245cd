#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "regen3d/vec3.hpp"

namespace regen3d {

// Analytic SDF tree: posed primitives combined by union / smooth union, with
// an optional similarity transform at any node. Primitive SDFs are exact;
// min-union is a valid lower bound, which sampling and meshing tolerate.
struct ShapeSpec {
    enum class Kind { Sphere, Box, RoundedBox, Torus, Capsule, Cylinder, Union, SmoothUnion, Transform };

    Kind kind = Kind::Sphere;
    // primitive size parameters (meaning depends on kind):
    //   Sphere: a=radius; Box: (a,b,c)=half extents; RoundedBox: half extents + r=corner radius
    //   Torus: a=major radius, r=minor radius; Capsule/Cylinder: a=half height, r=radius
    float a = 1, b = 1, c = 1, r = 0.25f;
    // pose for primitives / Transform nodes; Transform also applies uniform scale
    Quat rotation = Quat::identity();
    Vec3 translation{0, 0, 0};
    float scale = 1.0f;
    float blend = 0.1f;  // SmoothUnion blend radius
    std::vector<std::shared_ptr<ShapeSpec>> children;

    bool is_primitive() const {
        return kind != Kind::Union && kind != Kind::SmoothUnion && kind != Kind::Transform;
    }
};

namespace detail {

inline float sdf_primitive_local(const ShapeSpec& s, const Vec3& p) {
    switch (s.kind) {
        case ShapeSpec::Kind::Sphere:
            return norm(p) - s.a;
        case ShapeSpec::Kind::Box: {
            const Vec3 q = abs(p) - Vec3{s.a, s.b, s.c};
            const Vec3 qp = max(q, Vec3{0, 0, 0});
            return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0f);
        }
        case ShapeSpec::Kind::RoundedBox: {
            const Vec3 q = abs(p) - Vec3{s.a, s.b, s.c};
            const Vec3 qp = max(q, Vec3{0, 0, 0});
            return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0f) - s.r;
        }
        case ShapeSpec::Kind::Torus: {
            const float qx = std::sqrt(p.x * p.x + p.y * p.y) - s.a;
            return std::sqrt(qx * qx + p.z * p.z) - s.r;
        }
        case ShapeSpec::Kind::Capsule: {
            Vec3 q = p;
            q.z -= std::clamp(q.z, -s.a, s.a);
            return norm(q) - s.r;
        }
        case ShapeSpec::Kind::Cylinder: {
            const float dx = std::sqrt(p.x * p.x + p.y * p.y) - s.r;
            const float dz = std::fabs(p.z) - s.a;
            const float mx = std::max(dx, 0.0f), mz = std::max(dz, 0.0f);
            return std::min(std::max(dx, dz), 0.0f) + std::sqrt(mx * mx + mz * mz);
        }
        default:
            throw std::runtime_error("sdf_primitive_local: not a primitive");
    }
}

inline float smooth_min(float d1, float d2, float k) {
    const float h = std::clamp(0.5f + 0.5f * (d2 - d1) / k, 0.0f, 1.0f);
    return d2 + (d1 - d2) * h - k * h * (1.0f - h);
}

}  // namespace detail

inline float sdf_eval(const ShapeSpec& s, const Vec3& q) {
    switch (s.kind) {
        case ShapeSpec::Kind::Union: {
            check(!s.children.empty(), "sdf_eval: union with no children");
            float d = sdf_eval(*s.children[0], q);
            for (size_t i = 1; i < s.children.size(); ++i) d = std::min(d, sdf_eval(*s.children[i], q));
            return d;
        }
        case ShapeSpec::Kind::SmoothUnion: {
            check(!s.children.empty(), "sdf_eval: smooth union with no children");
            float d = sdf_eval(*s.children[0], q);
            for (size_t i = 1; i < s.children.size(); ++i)
                d = detail::smooth_min(d, sdf_eval(*s.children[i], q), s.blend);
            return d;
        }
        case ShapeSpec::Kind::Transform: {
            check(s.children.size() == 1, "sdf_eval: transform needs one child");
            check(s.scale > 0, "sdf_eval: non-positive scale");
            const Vec3 local = s.rotation.to_matrix().transposed() * ((q - s.translation) / s.scale);
            return s.scale * sdf_eval(*s.children[0], local);
        }
        default: {
            const Vec3 local = s.rotation.to_matrix().transposed() * (q - s.translation);
            return detail::sdf_primitive_local(s, local);
        }
    }
}

// Central-difference SDF gradient, h per the surface-sampling contract.
inline Vec3 sdf_gradient(const ShapeSpec& s, const Vec3& q, float h = 1e-4f) {
    return Vec3{sdf_eval(s, {q.x + h, q.y, q.z}) - sdf_eval(s, {q.x - h, q.y, q.z}),
                sdf_eval(s, {q.x, q.y + h, q.z}) - sdf_eval(s, {q.x, q.y - h, q.z}),
                sdf_eval(s, {q.x, q.y, q.z + h}) - sdf_eval(s, {q.x, q.y, q.z - h})} /
           (2.0f * h);
}

// Conservative axis-aligned bounds. Primitive local boxes are rotated to
// AABBs; smooth unions are inflated by blend/4 (the smin expansion bound).
inline Aabb shape_bounds(const ShapeSpec& s) {
    auto local_box = [](const ShapeSpec& p) -> Vec3 {
        switch (p.kind) {
            case ShapeSpec::Kind::Sphere:
                return {p.a, p.a, p.a};
            case ShapeSpec::Kind::Box:
                return {p.a, p.b, p.c};
            case ShapeSpec::Kind::RoundedBox:
                return {p.a + p.r, p.b + p.r, p.c + p.r};
            case ShapeSpec::Kind::Torus:
                return {p.a + p.r, p.a + p.r, p.r};
            case ShapeSpec::Kind::Capsule:
                return {p.r, p.r, p.a + p.r};
            case ShapeSpec::Kind::Cylinder:
                return {p.r, p.r, p.a};
            default:
                throw std::runtime_error("shape_bounds: not a primitive");
        }
    };
    switch (s.kind) {
        case ShapeSpec::Kind::Union:
        case ShapeSpec::Kind::SmoothUnion: {
            Aabb box;
            for (const auto& ch : s.children) box.extend(shape_bounds(*ch));
            if (s.kind == ShapeSpec::Kind::SmoothUnion) {
                const Vec3 pad{s.blend * 0.25f, s.blend * 0.25f, s.blend * 0.25f};
                box.lo -= pad;
                box.hi += pad;
            }
            return box;
        }
        case ShapeSpec::Kind::Transform: {
            const Aabb inner = shape_bounds(*s.children[0]);
            const Mat3 rot = s.rotation.to_matrix();
            Aabb box;
            for (int corner = 0; corner < 8; ++corner) {
                const Vec3 p{corner & 1 ? inner.hi.x : inner.lo.x, corner & 2 ? inner.hi.y : inner.lo.y,
                             corner & 4 ? inner.hi.z : inner.lo.z};
                box.extend(rot * (p * s.scale) + s.translation);
            }
            return box;
        }
        default: {
            const Vec3 he = local_box(s);
            const Mat3 rot = s.rotation.to_matrix();
            // extent of a rotated box: |R| * he
            Vec3 ext{0, 0, 0};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) ext[i] += std::fabs(rot(i, j)) * he[j];
            Aabb box;
            box.extend(s.translation - ext);
            box.extend(s.translation + ext);
            return box;
        }
    }
}

// Wrap a shape so its conservative bounds become a centered cube with the
// longest axis spanning [-target_half, target_half].
inline ShapeSpec normalize_shape(const ShapeSpec& s, float target_half = 0.95f) {
    const Aabb box = shape_bounds(s);
    check(box.valid(), "normalize_shape: empty bounds");
    const Vec3 ext = box.extent();
    const float longest = std::max(ext.x, std::max(ext.y, ext.z));
    check(longest > 0, "normalize_shape: degenerate bounds");
    ShapeSpec out;
    out.kind = ShapeSpec::Kind::Transform;
    out.scale = 2.0f * target_half / longest;
    out.translation = (box.center()) * (-out.scale);
    out.rotation = Quat::identity();
    out.children.push_back(std::make_shared<ShapeSpec>(s));
    return out;
}

// --- JSON (de)serialization, used by dataset metadata and the CLI ---

inline const char* shape_kind_name(ShapeSpec::Kind k) {
    switch (k) {
        case ShapeSpec::Kind::Sphere: return "sphere";
        case ShapeSpec::Kind::Box: return "box";
        case ShapeSpec::Kind::RoundedBox: return "rounded_box";
        case ShapeSpec::Kind::Torus: return "torus";
        case ShapeSpec::Kind::Capsule: return "capsule";
        case ShapeSpec::Kind::Cylinder: return "cylinder";
        case ShapeSpec::Kind::Union: return "union";
        case ShapeSpec::Kind::SmoothUnion: return "smooth_union";
        case ShapeSpec::Kind::Transform: return "transform";
    }
    return "sphere";
}

inline ShapeSpec::Kind shape_kind_from_name(const std::string& name) {
    for (int k = 0; k <= int(ShapeSpec::Kind::Transform); ++k)
        if (name == shape_kind_name(ShapeSpec::Kind(k))) return ShapeSpec::Kind(k);
    throw std::runtime_error("unknown shape kind: " + name);
}

inline nlohmann::json shape_to_json(const ShapeSpec& s) {
    nlohmann::json j;
    j["kind"] = shape_kind_name(s.kind);
    if (s.is_primitive()) {
        j["size"] = {s.a, s.b, s.c, s.r};
        j["rotation"] = {s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z};
        j["translation"] = {s.translation.x, s.translation.y, s.translation.z};
    }
    if (s.kind == ShapeSpec::Kind::SmoothUnion) j["blend"] = s.blend;
    if (s.kind == ShapeSpec::Kind::Transform) {
        j["scale"] = s.scale;
        j["rotation"] = {s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z};
        j["translation"] = {s.translation.x, s.translation.y, s.translation.z};
    }
    if (!s.children.empty()) {
        nlohmann::json kids = nlohmann::json::array();
        for (const auto& ch : s.children) kids.push_back(shape_to_json(*ch));
        j["children"] = kids;
    }
    return j;
}

inline ShapeSpec shape_from_json(const nlohmann::json& j) {
    ShapeSpec s;
    s.kind = shape_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("size")) {
        s.a = j["size"][0];
        s.b = j["size"][1];
        s.c = j["size"][2];
        s.r = j["size"][3];
    }
    if (j.contains("rotation")) {
        s.rotation = Quat{j["rotation"][0], j["rotation"][1], j["rotation"][2], j["rotation"][3]};
    }
    if (j.contains("translation")) {
        s.translation = Vec3{j["translation"][0], j["translation"][1], j["translation"][2]};
    }
    if (j.contains("scale")) s.scale = j["scale"];
    if (j.contains("blend")) s.blend = j["blend"];
    if (j.contains("children"))
        for (const auto& ch : j["children"]) s.children.push_back(std::make_shared<ShapeSpec>(shape_from_json(ch)));
    return s;
}

}  // namespace regen3d
