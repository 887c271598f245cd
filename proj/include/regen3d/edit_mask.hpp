#pragma once

#include <json.hpp>

#include "regen3d/pointcloud.hpp"

namespace regen3d {

// 3D edit region: a posed box, ellipsoid or cylinder solid plus the masked
// fraction r of the source cloud it covers.
struct EditMask {
    enum class Solid { Box, Ellipsoid, Cylinder };

    Solid solid = Solid::Box;
    Vec3 half_size{0.2f, 0.2f, 0.2f};  // ellipsoid semi-axes; cylinder: x=radius, z=half height
    Quat rotation = Quat::identity();
    Vec3 center{0, 0, 0};
    float masked_fraction = 0;  // r

    bool contains(const Vec3& p) const {
        const Vec3 local = rotation.to_matrix().transposed() * (p - center);
        switch (solid) {
            case Solid::Box:
                return std::fabs(local.x) < half_size.x && std::fabs(local.y) < half_size.y &&
                       std::fabs(local.z) < half_size.z;
            case Solid::Ellipsoid: {
                const float a = local.x / half_size.x, b = local.y / half_size.y, c = local.z / half_size.z;
                return a * a + b * b + c * c < 1.0f;
            }
            case Solid::Cylinder:
                return local.x * local.x + local.y * local.y < half_size.x * half_size.x &&
                       std::fabs(local.z) < half_size.z;
        }
        return false;
    }

    float count_fraction(const std::vector<Vec3>& points) const {
        if (points.empty()) return 0;
        size_t inside = 0;
        for (const Vec3& p : points) inside += contains(p) ? 1 : 0;
        return float(inside) / float(points.size());
    }

    // uniform samples strictly inside the solid (rejection from its box)
    std::vector<Vec3> sample_inside(int n, uint64_t seed) const {
        Rng rng(hash_combine(seed, 0xed17ULL));
        std::vector<Vec3> out;
        out.reserve(size_t(n));
        const Mat3 rot = rotation.to_matrix();
        long attempts = 0;
        while (int(out.size()) < n) {
            check(attempts++ < 10000ll * n + 10000, "EditMask::sample_inside: rejection cap exceeded");
            const Vec3 local{rng.uniform(-half_size.x, half_size.x), rng.uniform(-half_size.y, half_size.y),
                             rng.uniform(-half_size.z, half_size.z)};
            const Vec3 p = rot * local + center;
            if (contains(p)) out.push_back(p);
        }
        return out;
    }
};

inline const char* mask_solid_name(EditMask::Solid s) {
    switch (s) {
        case EditMask::Solid::Box: return "box";
        case EditMask::Solid::Ellipsoid: return "ellipsoid";
        case EditMask::Solid::Cylinder: return "cylinder";
    }
    return "box";
}

inline EditMask::Solid mask_solid_from_name(const std::string& n) {
    if (n == "box") return EditMask::Solid::Box;
    if (n == "ellipsoid") return EditMask::Solid::Ellipsoid;
    if (n == "cylinder") return EditMask::Solid::Cylinder;
    throw std::runtime_error("unknown mask solid: " + n);
}

inline nlohmann::json mask_to_json(const EditMask& m) {
    nlohmann::json j;
    j["solid"] = mask_solid_name(m.solid);
    j["half_size"] = {m.half_size.x, m.half_size.y, m.half_size.z};
    j["rotation"] = {m.rotation.w, m.rotation.x, m.rotation.y, m.rotation.z};
    j["center"] = {m.center.x, m.center.y, m.center.z};
    j["masked_fraction"] = m.masked_fraction;
    return j;
}

inline EditMask mask_from_json(const nlohmann::json& j) {
    EditMask m;
    m.solid = mask_solid_from_name(j.at("solid").get<std::string>());
    m.half_size = {j.at("half_size")[0], j.at("half_size")[1], j.at("half_size")[2]};
    if (j.contains("rotation"))
        m.rotation = Quat{j["rotation"][0], j["rotation"][1], j["rotation"][2], j["rotation"][3]};
    m.center = {j.at("center")[0], j.at("center")[1], j.at("center")[2]};
    m.masked_fraction = j.value("masked_fraction", 0.0f);
    return m;
}

}  // namespace regen3d
