#pragma once

#include <filesystem>
#include <optional>

#include "regen3d/align.hpp"
#include "regen3d/edit_mask.hpp"
#include "regen3d/normals.hpp"
#include "regen3d/ply.hpp"
#include "regen3d/render.hpp"
#include "regen3d/vecset_ae.hpp"

namespace regen3d {

// Random 1-4 primitive CSG composite, normalized into [-0.95, 0.95]^3.
inline ShapeSpec sample_primitive_shape(uint64_t seed) {
    Rng rng(hash_combine(seed, 0x51a9ULL));
    const int count = 1 + int(rng.uniform_index(4));
    // size floors keep the corpus desk-scale friendly: very thin features are
    // both unrepresentable at toy token budgets and brutal under voxel IoU
    auto make_primitive = [&]() {
        ShapeSpec p;
        const int kind = int(rng.uniform_index(6));
        p.kind = ShapeSpec::Kind(kind);
        p.a = rng.uniform(0.3f, 0.6f);
        p.b = rng.uniform(0.3f, 0.6f);
        p.c = rng.uniform(0.3f, 0.6f);
        p.r = rng.uniform(0.15f, 0.3f);
        if (p.kind == ShapeSpec::Kind::Torus) {
            p.a = rng.uniform(0.3f, 0.5f);
            p.r = p.a * rng.uniform(0.4f, 0.6f);
        }
        if (p.kind == ShapeSpec::Kind::Capsule || p.kind == ShapeSpec::Kind::Cylinder)
            p.r = rng.uniform(0.2f, 0.38f);
        p.rotation = Quat::random(rng);
        p.translation = {rng.uniform(-0.3f, 0.3f), rng.uniform(-0.3f, 0.3f), rng.uniform(-0.3f, 0.3f)};
        return p;
    };
    ShapeSpec root;
    if (count == 1) {
        root = make_primitive();
        root.translation = {0, 0, 0};
    } else {
        const bool smooth = rng.uniform() < 0.4f;
        root.kind = smooth ? ShapeSpec::Kind::SmoothUnion : ShapeSpec::Kind::Union;
        root.blend = rng.uniform(0.05f, 0.2f);
        ShapeSpec first = make_primitive();
        first.translation = {0, 0, 0};
        root.children.push_back(std::make_shared<ShapeSpec>(first));
        for (int i = 1; i < count; ++i) {
            ShapeSpec p = make_primitive();
            // keep the composite connected: place near an existing child
            const ShapeSpec& anchor = *root.children[rng.uniform_index(root.children.size())];
            p.translation = anchor.translation + Vec3{rng.normal(0, 0.18f), rng.normal(0, 0.18f),
                                                      rng.normal(0, 0.18f)};
            root.children.push_back(std::make_shared<ShapeSpec>(p));
        }
    }
    return normalize_shape(root);
}

// k x k grid composition: slots tile [-1,1]^2 in the ground (x,y) plane and
// each member is uniformly scaled into its slot with a 5% margin; the scene
// is then normalized as a whole.
struct GridScene {
    int k = 2;
    std::vector<ShapeSpec> members;                 // normalized object frames
    std::vector<SimilarityTransform> to_scene;      // object frame -> scene frame
    std::vector<Aabb> slot_cells;                   // scene-frame x,y cells
    ShapeSpec scene_shape;
};

inline GridScene compose_grid_scene(const std::vector<ShapeSpec>& shapes, int k) {
    check(k == 2 || k == 3, "compose_grid_scene: k must be 2 or 3");
    check(int(shapes.size()) == k * k, "compose_grid_scene: need exactly k*k shapes");
    GridScene scene;
    scene.k = k;
    scene.members = shapes;
    const float slot_half = 1.0f / float(k);
    // whole-scene normalization factor: outer member faces reach 1 - 0.05*slot_half
    const float whole = 0.95f / (1.0f - 0.05f * slot_half);
    ShapeSpec root;
    root.kind = ShapeSpec::Kind::Union;
    for (int sy = 0; sy < k; ++sy)
        for (int sx = 0; sx < k; ++sx) {
            const size_t idx = size_t(sy) * size_t(k) + size_t(sx);
            const Vec3 slot_center{(-1.0f + slot_half * (2.0f * float(sx) + 1.0f)),
                                   (-1.0f + slot_half * (2.0f * float(sy) + 1.0f)), 0.0f};
            SimilarityTransform t;
            t.scale = slot_half * whole;  // member spans +-0.95*slot_half before whole-scene scaling
            t.translation = slot_center * whole;
            scene.to_scene.push_back(t);
            ShapeSpec member;
            member.kind = ShapeSpec::Kind::Transform;
            member.scale = t.scale;
            member.translation = t.translation;
            member.children.push_back(std::make_shared<ShapeSpec>(shapes[idx]));
            root.children.push_back(std::make_shared<ShapeSpec>(member));
            Aabb cell;
            cell.extend((slot_center - Vec3{slot_half, slot_half, slot_half}) * whole);
            cell.extend((slot_center + Vec3{slot_half, slot_half, slot_half}) * whole);
            scene.slot_cells.push_back(cell);
        }
    scene.scene_shape = root;
    return scene;
}

enum class DegradeMode { Bottleneck, Sdedit };

// Optional SDEdit hook: takes scene tokens, the scene render and t*, returns
// tokens noised to t* and denoised back by the base generator.
using SdeditFn = std::function<Tensor(const Tensor&, const Image&, int)>;

struct DegradeResult {
    std::vector<std::optional<OrientedPointCloud>> per_slot;  // object-frame clouds
    std::vector<std::string> drop_reasons;
};

// Bottleneck degradation: the whole scene is squeezed through one
// scene-level token budget, decoded, meshed and split back into slots.
// Sdedit mode additionally noises the scene tokens to t* and denoises them
// with the base generator before decoding.
inline DegradeResult degrade_scene(const GridScene& scene, const VecSetAE& ae, int scene_tokens,
                                   DegradeMode mode, const SdeditFn& sdedit, int t_star, uint64_t seed,
                                   int n_scene_points = 4096, int n_cond_points = 4096,
                                   int grid_res = 48) {
    OrientedPointCloud scene_cloud = sample_surface(scene.scene_shape, n_scene_points, hash_combine(seed, 1));
    LatentSet z = ae.encode(scene_cloud, scene_tokens);
    if (mode == DegradeMode::Sdedit) {
        check(bool(sdedit), "degrade_scene: sdedit mode requires a trained base generator");
        CameraSpec cam;
        cam.azimuth_deg = 35.0f;
        cam.elevation_deg = 25.0f;
        cam.half_width = 1.25f;
        cam.resolution = 64;
        const Image render = condition_image(render_ortho(scene.scene_shape, cam));
        z.tokens = sdedit(z.tokens, render, t_star);
    }
    const TriangleMesh mesh = marching_cubes(ae.decode_grid(z, grid_res));
    DegradeResult result;
    result.per_slot.resize(scene.members.size());
    result.drop_reasons.resize(scene.members.size());
    for (size_t slot = 0; slot < scene.members.size(); ++slot) {
        const Aabb& cell = scene.slot_cells[slot];
        TriangleMesh sub;
        std::vector<int> remap(mesh.vertices.size(), -1);
        for (const auto& tri : mesh.triangles) {
            const Vec3 centroid = (mesh.vertices[size_t(tri[0])] + mesh.vertices[size_t(tri[1])] +
                                   mesh.vertices[size_t(tri[2])]) /
                                  3.0f;
            if (centroid.x < cell.lo.x || centroid.x > cell.hi.x || centroid.y < cell.lo.y ||
                centroid.y > cell.hi.y)
                continue;
            std::array<int, 3> nt;
            for (int i = 0; i < 3; ++i) {
                if (remap[size_t(tri[size_t(i)])] < 0) {
                    remap[size_t(tri[size_t(i)])] = int(sub.vertices.size());
                    sub.vertices.push_back(mesh.vertices[size_t(tri[size_t(i)])]);
                }
                nt[size_t(i)] = remap[size_t(tri[size_t(i)])];
            }
            sub.triangles.push_back(nt);
        }
        if (sub.triangles.empty()) {
            result.drop_reasons[slot] = "empty slot after extraction";
            continue;
        }
        OrientedPointCloud cloud = sample_mesh_surface(sub, n_cond_points, hash_combine(seed, 100 + slot));
        const SimilarityTransform inv = scene.to_scene[slot].inverse();
        for (Vec3& p : cloud.points) p = inv.apply(p);
        result.per_slot[slot] = std::move(cloud);
    }
    return result;
}

// Multi-view partial-scan simulator: ray-cast visibility from 1-4 random
// orbital views, isotropic position noise, normals re-estimated by
// covariance analysis with the view centroid as the viewpoint.
inline OrientedPointCloud simulate_partial_scan(const ShapeSpec& shape, int n_views, uint64_t seed,
                                                int n_candidates = 4096, float noise_sigma = 0.005f) {
    check(n_views >= 1 && n_views <= 4, "simulate_partial_scan: n_views must be in 1..4");
    Rng rng(hash_combine(seed, 0x5ca9ULL));
    const OrientedPointCloud dense = sample_surface(shape, n_candidates, hash_combine(seed, 2));
    std::vector<bool> visible(dense.size(), false);
    Vec3 cam_centroid{0, 0, 0};
    for (int v = 0; v < n_views; ++v) {
        CameraSpec cam;
        cam.azimuth_deg = rng.uniform(0.0f, 360.0f);
        cam.elevation_deg = rng.uniform(-10.0f, 30.0f);
        cam.half_width = rng.uniform(0.8f, 1.4f);
        const CameraFrame frame = camera_frame(cam);
        cam_centroid += frame.position;
        parallel_for(int64_t(dense.size()), [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                if (visible[size_t(i)]) continue;
                const Vec3& p = dense.points[size_t(i)];
                const Vec3& n = dense.normals[size_t(i)];
                if (dot(n, frame.view) >= -1e-3f) continue;  // backface
                // occlusion: march from the point toward the camera
                const Vec3 dir = -frame.view;
                float t = 0.02f;
                bool blocked = false;
                for (int step = 0; step < 200 && t < 4.0f; ++step) {
                    const float h = sdf_eval(shape, p + dir * t);
                    if (h < 5e-4f) {
                        blocked = true;
                        break;
                    }
                    t += std::max(h, 5e-4f);
                }
                if (!blocked) visible[size_t(i)] = true;
            }
        }, 256);
    }
    cam_centroid = cam_centroid / float(n_views);
    OrientedPointCloud scan;
    for (size_t i = 0; i < dense.size(); ++i) {
        if (!visible[i]) continue;
        scan.points.push_back(dense.points[i] + Vec3{rng.normal(0, noise_sigma), rng.normal(0, noise_sigma),
                                                     rng.normal(0, noise_sigma)});
    }
    check(!scan.points.empty(), "simulate_partial_scan: zero visible points");
    if (int(scan.points.size()) > 16) {
        scan.normals = estimate_normals_covariance(scan.points, 16, cam_centroid);
    } else {
        scan.normals.clear();
        for (const Vec3& p : scan.points) scan.normals.push_back(normalized(cam_centroid - p));
    }
    return scan;
}

// Random edit region: solid type uniform over box/ellipsoid/cylinder,
// centered at a random surface point, sized so that r lands in [0.05, 0.6]
// within 20 attempts.
inline EditMask sample_edit_mask(const OrientedPointCloud& cloud, uint64_t seed) {
    check(cloud.size() >= 100, "sample_edit_mask: need at least 100 points");
    Rng rng(hash_combine(seed, 0xeb71ULL));
    EditMask mask;
    mask.solid = EditMask::Solid(rng.uniform_index(3));
    mask.center = cloud.points[rng.uniform_index(cloud.size())];
    mask.rotation = Quat::random(rng);
    Vec3 size{rng.uniform(0.18f, 0.45f), rng.uniform(0.18f, 0.45f), rng.uniform(0.18f, 0.45f)};
    for (int attempt = 0; attempt < 20; ++attempt) {
        mask.half_size = size;
        const float r = mask.count_fraction(cloud.points);
        if (r >= 0.05f && r <= 0.6f) {
            mask.masked_fraction = r;
            return mask;
        }
        size *= (r < 0.05f) ? 1.5f : 0.65f;
    }
    throw std::runtime_error("sample_edit_mask: could not reach target masked fraction");
}

// Condition-cloud robustness augmentation: floater blobs with probability
// 0.3 and a <=10 degree random rotation of every normal.
inline OrientedPointCloud augment_condition_cloud(const OrientedPointCloud& cloud, uint64_t seed) {
    Rng rng(hash_combine(seed, 0xaf10ULL));
    OrientedPointCloud out = cloud;
    if (rng.uniform() < 0.3f) {
        const int blobs = 1 + int(rng.uniform_index(3));
        for (int b = 0; b < blobs; ++b) {
            const int count = 50 + int(rng.uniform_index(151));
            const float sigma = rng.uniform(0.02f, 0.05f);
            const Vec3 center{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            for (int i = 0; i < count; ++i) {
                Vec3 p = center + Vec3{rng.normal(0, sigma), rng.normal(0, sigma), rng.normal(0, sigma)};
                // floaters may exceed the unit cube only slightly
                p = {std::clamp(p.x, -1.1f, 1.1f), std::clamp(p.y, -1.1f, 1.1f),
                     std::clamp(p.z, -1.1f, 1.1f)};
                out.points.push_back(p);
                Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
                out.normals.push_back(norm(dir) > 1e-6f ? normalized(dir) : Vec3{0, 0, 1});
            }
        }
    }
    constexpr float max_angle = 10.0f * 3.14159265358979f / 180.0f;
    for (Vec3& n : out.normals) {
        Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
        if (norm(axis) < 1e-6f) axis = {1, 0, 0};
        const float angle = rng.uniform(0.0f, max_angle);
        n = normalized(Quat::from_axis_angle(axis, angle).to_matrix() * n);
    }
    return out;
}

struct TrainingTriplet {
    std::string task;
    OrientedPointCloud target;
    OrientedPointCloud condition;
    std::optional<EditMask> mask;
    Image image;
    ShapeSpec target_shape;
    nlohmann::json meta;
};

struct TripletParams {
    const VecSetAE* ae = nullptr;  // enhance only
    int grid_k = 2;
    int scene_tokens = 64;
    DegradeMode mode = DegradeMode::Bottleneck;
    SdeditFn sdedit;
    int t_star = 350;
    int n_points = 4096;
    int image_size = 64;
};

inline Image render_target_image(const ShapeSpec& shape, Rng& rng, int image_size,
                                 nlohmann::json* meta) {
    CameraSpec cam;
    cam.azimuth_deg = rng.uniform(0.0f, 360.0f);
    cam.elevation_deg = rng.uniform(-10.0f, 30.0f);
    cam.half_width = rng.uniform(0.8f, 1.4f);
    cam.resolution = image_size;
    if (meta)
        (*meta)["camera"] = {{"azimuth", cam.azimuth_deg},
                             {"elevation", cam.elevation_deg},
                             {"half_width", cam.half_width},
                             {"resolution", cam.resolution}};
    return condition_image(render_ortho(shape, cam));
}

// One task triplet, replayable bit-exactly from (global seed, sample index)
// via the caller-provided per-sample seed.
inline TrainingTriplet build_triplet(const std::string& task, const ShapeSpec& shape,
                                     const TripletParams& params, uint64_t seed) {
    TrainingTriplet t;
    t.task = task;
    t.target_shape = shape;
    t.meta["task"] = task;
    t.meta["seed"] = seed;
    Rng rng(hash_combine(seed, 0x7713ULL));
    t.target = sample_surface(shape, params.n_points, hash_combine(seed, 3));

    if (task == "enhance") {
        check(params.ae != nullptr, "build_triplet: enhance requires a trained autoencoder");
        const int slots = params.grid_k * params.grid_k;
        const int slot = int(rng.uniform_index(uint64_t(slots)));
        std::vector<ShapeSpec> members;
        for (int i = 0; i < slots; ++i)
            members.push_back(i == slot ? shape : sample_primitive_shape(hash_combine(seed, 200 + i)));
        const GridScene scene = compose_grid_scene(members, params.grid_k);
        const DegradeResult degraded = degrade_scene(scene, *params.ae, params.scene_tokens, params.mode,
                                                     params.sdedit, params.t_star, hash_combine(seed, 4));
        check(degraded.per_slot[size_t(slot)].has_value(),
              "build_triplet: dropped sample (" + degraded.drop_reasons[size_t(slot)] + ")");
        t.condition = augment_condition_cloud(*degraded.per_slot[size_t(slot)], hash_combine(seed, 5));
        t.meta["k"] = params.grid_k;
        t.meta["slot"] = slot;
        t.meta["t_star"] = params.t_star;
        t.meta["mode"] = params.mode == DegradeMode::Bottleneck ? "bottleneck" : "sdedit";
    } else if (task == "reconstruct") {
        const int n_views = 1 + int(rng.uniform_index(4));
        OrientedPointCloud scan = simulate_partial_scan(shape, n_views, hash_combine(seed, 6));
        // arbitrary scale/pose, then closed-form alignment back to the target frame
        SimilarityTransform perturb;
        perturb.scale = rng.uniform(0.7f, 1.3f);
        perturb.rotation = Quat::from_axis_angle({rng.normal(), rng.normal(), rng.normal() + 1e-3f},
                                                 rng.uniform(0.0f, 0.5f))
                               .to_matrix();
        perturb.translation = {rng.uniform(-0.2f, 0.2f), rng.uniform(-0.2f, 0.2f), rng.uniform(-0.2f, 0.2f)};
        std::vector<Vec3> moved = scan.points;
        for (Vec3& p : moved) p = perturb.apply(p);
        const SimilarityTransform align = similarity_align(moved, scan.points);
        for (size_t i = 0; i < moved.size(); ++i) moved[i] = align.apply(moved[i]);
        scan.points = moved;
        for (Vec3& n : scan.normals) n = normalized(align.rotation * (perturb.rotation * n));
        t.condition = augment_condition_cloud(scan, hash_combine(seed, 7));
        t.meta["n_views"] = n_views;
    } else if (task == "edit") {
        t.mask = sample_edit_mask(t.target, hash_combine(seed, 8));
        OrientedPointCloud masked;
        for (size_t i = 0; i < t.target.size(); ++i) {
            if (!t.mask->contains(t.target.points[i])) {
                masked.points.push_back(t.target.points[i]);
                masked.normals.push_back(t.target.normals[i]);
            }
        }
        check(!masked.empty(), "build_triplet: edit mask removed every point");
        masked = augment_condition_cloud(masked, hash_combine(seed, 9));
        // keep the set-difference contract exact: no augmented point inside M
        OrientedPointCloud cleaned;
        for (size_t i = 0; i < masked.size(); ++i) {
            if (!t.mask->contains(masked.points[i])) {
                cleaned.points.push_back(masked.points[i]);
                cleaned.normals.push_back(masked.normals[i]);
            }
        }
        t.condition = std::move(cleaned);
        t.meta["r"] = t.mask->masked_fraction;
        t.meta["mask"] = mask_to_json(*t.mask);
    } else {
        throw std::runtime_error("build_triplet: unknown task " + task);
    }
    t.image = augment_image(render_target_image(shape, rng, params.image_size, &t.meta),
                            hash_combine(seed, 10));
    t.meta["shape"] = shape_to_json(shape);
    return t;
}

// --- dataset store: one directory per sample + a JSONL manifest ---

inline void write_triplet(const TrainingTriplet& t, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_ply(t.condition, (dir / "condition.ply").string());
    write_ply(t.target, (dir / "target.ply").string());
    save_png(t.image, (dir / "image.png").string());
    std::ofstream meta(dir / "meta.json");
    check(meta.good(), "write_triplet: cannot open meta.json");
    meta << t.meta.dump(2) << "\n";
}

inline TrainingTriplet read_triplet(const std::filesystem::path& dir) {
    TrainingTriplet t;
    t.condition = read_ply((dir / "condition.ply").string());
    t.target = read_ply((dir / "target.ply").string());
    t.image = load_png((dir / "image.png").string());
    std::ifstream meta(dir / "meta.json");
    check(meta.good(), "read_triplet: cannot open meta.json in " + dir.string());
    nlohmann::json j;
    meta >> j;
    t.meta = j;
    t.task = j.value("task", "");
    if (j.contains("shape")) t.target_shape = shape_from_json(j["shape"]);
    if (j.contains("mask")) t.mask = mask_from_json(j["mask"]);
    return t;
}

}  // namespace regen3d
