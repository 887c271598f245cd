#pragma once

#include <fstream>
#include <sstream>

#include "regen3d/pointcloud.hpp"

namespace regen3d {

// Binary little-endian PLY with float32 x,y,z,nx,ny,nz vertex properties.
inline void write_ply(const OrientedPointCloud& cloud, const std::string& path) {
    cloud.validate();
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "write_ply: cannot open " + path);
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n"
           << "element vertex " << cloud.points.size() << "\n"
           << "property float x\nproperty float y\nproperty float z\n"
           << "property float nx\nproperty float ny\nproperty float nz\n"
           << "end_header\n";
    const std::string h = header.str();
    f.write(h.data(), long(h.size()));
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const float row[6] = {cloud.points[i].x, cloud.points[i].y, cloud.points[i].z,
                              cloud.normals[i].x, cloud.normals[i].y, cloud.normals[i].z};
        f.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
    check(f.good(), "write_ply: write failed for " + path);
}

inline OrientedPointCloud read_ply(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "read_ply: cannot open " + path);
    std::string line;
    check(std::getline(f, line) && line == "ply", "read_ply: not a PLY file: " + path);
    long vertex_count = -1;
    std::vector<std::string> props;
    bool binary_le = false;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = (fmt == "binary_little_endian");
        } else if (tag == "element") {
            std::string name;
            ss >> name >> vertex_count;
            check(name == "vertex", "read_ply: only vertex elements supported: " + path);
        } else if (tag == "property") {
            std::string type, name;
            ss >> type >> name;
            check(type == "float" || type == "float32",
                  "read_ply: only float32 properties supported: " + path);
            props.push_back(name);
        } else if (tag == "end_header") {
            break;
        }
    }
    check(binary_le, "read_ply: only binary_little_endian supported: " + path);
    check(vertex_count >= 0, "read_ply: missing vertex element: " + path);
    auto index_of = [&](const std::string& n) {
        for (size_t i = 0; i < props.size(); ++i)
            if (props[i] == n) return int(i);
        return -1;
    };
    const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
    check(ix >= 0 && iy >= 0 && iz >= 0, "read_ply: missing x/y/z properties: " + path);
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
    OrientedPointCloud cloud;
    cloud.points.reserve(size_t(vertex_count));
    std::vector<float> row(props.size());
    for (long i = 0; i < vertex_count; ++i) {
        f.read(reinterpret_cast<char*>(row.data()), long(row.size() * sizeof(float)));
        check(f.good(), "read_ply: truncated vertex data: " + path);
        cloud.points.push_back({row[size_t(ix)], row[size_t(iy)], row[size_t(iz)]});
        if (has_normals) {
            Vec3 n{row[size_t(inx)], row[size_t(iny)], row[size_t(inz)]};
            // renormalize only when clearly off-unit, to keep round-trips bit-exact
            if (std::fabs(norm(n) - 1.0f) > 1e-4f) n = normalized(n);
            cloud.normals.push_back(n);
        }
    }
    if (!has_normals) cloud.normals.assign(cloud.points.size(), Vec3{0, 0, 1});
    return cloud;
}

}  // namespace regen3d
