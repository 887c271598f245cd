#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "regen3d/pointcloud.hpp"

namespace regen3d {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }

    void validate() const {
        for (const auto& t : triangles) {
            for (int i : t) check(i >= 0 && i < int(vertices.size()), "TriangleMesh: index out of range");
            check(t[0] != t[1] && t[1] != t[2] && t[0] != t[2], "TriangleMesh: degenerate triangle");
        }
    }
};

inline double mesh_area(const TriangleMesh& m) {
    double area = 0;
    for (const auto& t : m.triangles) {
        const Vec3 e1 = m.vertices[size_t(t[1])] - m.vertices[size_t(t[0])];
        const Vec3 e2 = m.vertices[size_t(t[2])] - m.vertices[size_t(t[0])];
        area += 0.5 * double(norm(cross(e1, e2)));
    }
    return area;
}

// Signed volume by the divergence theorem; meaningful for closed meshes with
// consistent outward orientation.
inline double mesh_volume(const TriangleMesh& m) {
    double vol = 0;
    for (const auto& t : m.triangles) {
        const Vec3& a = m.vertices[size_t(t[0])];
        const Vec3& b = m.vertices[size_t(t[1])];
        const Vec3& c = m.vertices[size_t(t[2])];
        vol += double(dot(a, cross(b, c))) / 6.0;
    }
    return vol;
}

// Merge vertices closer than eps and drop collapsed triangles.
inline TriangleMesh weld_vertices(const TriangleMesh& m, float eps = 1e-6f) {
    TriangleMesh out;
    const float inv = 1.0f / std::max(eps, 1e-12f);
    std::map<std::array<long, 3>, int> lookup;
    std::vector<int> remap(m.vertices.size());
    for (size_t i = 0; i < m.vertices.size(); ++i) {
        const Vec3& p = m.vertices[i];
        const std::array<long, 3> key{long(std::floor(p.x * inv + 0.5f)), long(std::floor(p.y * inv + 0.5f)),
                                      long(std::floor(p.z * inv + 0.5f))};
        auto it = lookup.find(key);
        if (it == lookup.end()) {
            it = lookup.insert({key, int(out.vertices.size())}).first;
            out.vertices.push_back(p);
        }
        remap[i] = it->second;
    }
    for (const auto& t : m.triangles) {
        const std::array<int, 3> nt{remap[size_t(t[0])], remap[size_t(t[1])], remap[size_t(t[2])]};
        if (nt[0] != nt[1] && nt[1] != nt[2] && nt[0] != nt[2]) out.triangles.push_back(nt);
    }
    return out;
}

inline size_t mesh_unique_edge_count(const TriangleMesh& m) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[size_t(e)], b = t[size_t((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            edges[{a, b}]++;
        }
    return edges.size();
}

// true iff every edge is shared by exactly two triangles
inline bool mesh_is_watertight(const TriangleMesh& m) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[size_t(e)], b = t[size_t((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            edges[{a, b}]++;
        }
    for (const auto& [k, c] : edges)
        if (c != 2) return false;
    return !m.triangles.empty();
}

// Area-weighted surface sampling; normals from triangle planes.
inline OrientedPointCloud sample_mesh_surface(const TriangleMesh& m, int n, uint64_t seed) {
    check(!m.triangles.empty(), "sample_mesh_surface: empty mesh");
    check(n >= 1, "sample_mesh_surface: n must be positive");
    std::vector<double> cum(m.triangles.size());
    double acc = 0;
    for (size_t i = 0; i < m.triangles.size(); ++i) {
        const auto& t = m.triangles[i];
        const Vec3 e1 = m.vertices[size_t(t[1])] - m.vertices[size_t(t[0])];
        const Vec3 e2 = m.vertices[size_t(t[2])] - m.vertices[size_t(t[0])];
        acc += 0.5 * double(norm(cross(e1, e2)));
        cum[i] = acc;
    }
    check(acc > 0, "sample_mesh_surface: zero-area mesh");
    Rng rng(hash_combine(seed, 0x2e5fULL));
    OrientedPointCloud cloud;
    cloud.points.reserve(size_t(n));
    cloud.normals.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        const double r = double(rng.uniform()) * acc;
        const size_t ti = size_t(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
        const auto& t = m.triangles[std::min(ti, m.triangles.size() - 1)];
        float u = rng.uniform(), v = rng.uniform();
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        const Vec3& a = m.vertices[size_t(t[0])];
        const Vec3& b = m.vertices[size_t(t[1])];
        const Vec3& c = m.vertices[size_t(t[2])];
        cloud.points.push_back(a + (b - a) * u + (c - a) * v);
        Vec3 nrm = cross(b - a, c - a);
        const float ln = norm(nrm);
        cloud.normals.push_back(ln > 1e-12f ? nrm / ln : Vec3{0, 0, 1});
    }
    return cloud;
}

inline SimilarityTransform normalize_to_cube(TriangleMesh& mesh, float target_half = 0.95f) {
    return normalize_to_cube(mesh.vertices, target_half);
}

// --- ASCII OBJ (v/f records, 1-based indices) ---

inline void write_obj(const TriangleMesh& m, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "write_obj: cannot open " + path);
    char buf[128];
    for (const Vec3& v : m.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.8g %.8g %.8g\n", double(v.x), double(v.y), double(v.z));
        f << buf;
    }
    for (const auto& t : m.triangles) f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    check(f.good(), "write_obj: write failed for " + path);
}

inline TriangleMesh read_obj(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "read_obj: cannot open " + path);
    TriangleMesh m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.size() < 2) continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x >> v.y >> v.z;
            check(bool(ss), "read_obj: malformed vertex in " + path);
            m.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept "i", "i/j", "i/j/k"
                idx.push_back(std::atoi(tok.c_str()));
            }
            check(idx.size() >= 3, "read_obj: face with fewer than 3 vertices in " + path);
            for (size_t k = 2; k < idx.size(); ++k) {
                std::array<int, 3> t{idx[0] - 1, idx[k - 1] - 1, idx[k] - 1};
                for (int i : t)
                    check(i >= 0 && i < int(m.vertices.size()), "read_obj: index out of range in " + path);
                m.triangles.push_back(t);
            }
        }
    }
    return m;
}

}  // namespace regen3d
