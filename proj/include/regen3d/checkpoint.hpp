#pragma once

#include <fstream>

#include "regen3d/config.hpp"
#include "regen3d/nn.hpp"

namespace regen3d {

// Checkpoint container, bit layout:
//   bytes 0..3   magic "R3GN"
//   bytes 4..7   format version (u32 LE)
//   bytes 8..11  header length (u32 LE)
//   then         header JSON (tensor name -> dtype/shape/offset/nbytes,
//                config snapshot, extra scalars)
//   then         float32 LE payload
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(ParamMap& params, const RunConfig& config, const std::string& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json tensors = nlohmann::json::object();
    uint64_t offset = 0;
    for (auto& [name, t] : params.entries) {
        const uint64_t nbytes = uint64_t(t->numel()) * sizeof(float);
        tensors[name] = {{"dtype", "f32"}, {"shape", t->shape}, {"offset", offset}, {"nbytes", nbytes}};
        offset += nbytes;
    }
    nlohmann::json header;
    header["tensors"] = tensors;
    header["config"] = config.to_json();
    header["extra"] = extra;
    const std::string hstr = header.dump();
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "save_checkpoint: cannot open " + path);
    f.write("R3GN", 4);
    auto put_u32 = [&](uint32_t v) {
        const uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(kCheckpointVersion);
    put_u32(uint32_t(hstr.size()));
    f.write(hstr.data(), long(hstr.size()));
    for (auto& [name, t] : params.entries)
        f.write(reinterpret_cast<const char*>(t->data->data()), long(t->numel() * sizeof(float)));
    check(f.good(), "save_checkpoint: write failed for " + path);
}

struct LoadedCheckpoint {
    RunConfig config;
    nlohmann::json extra;
    nlohmann::json tensors;
    std::vector<uint8_t> payload;

    bool has_tensor(const std::string& name) const { return tensors.contains(name); }

    void read_into(const std::string& name, Tensor& dst) const {
        check(tensors.contains(name), "checkpoint: missing tensor " + name);
        const auto& e = tensors.at(name);
        const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        check(shape == dst.shape, "checkpoint: shape mismatch for " + name);
        const uint64_t offset = e.at("offset").get<uint64_t>();
        const uint64_t nbytes = e.at("nbytes").get<uint64_t>();
        check(nbytes == dst.numel() * sizeof(float), "checkpoint: size mismatch for " + name);
        std::memcpy(dst.data->data(), payload.data() + offset, nbytes);
    }

    void read_all(ParamMap& params) const {
        for (auto& [name, t] : params.entries) read_into(name, *t);
    }
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "load_checkpoint: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    check(buf.size() >= 12, "load_checkpoint: file too small to be a checkpoint");
    check(std::memcmp(buf.data(), "R3GN", 4) == 0, "load_checkpoint: not a checkpoint (bad magic)");
    auto get_u32 = [&](size_t at) {
        return uint32_t(buf[at]) | (uint32_t(buf[at + 1]) << 8) | (uint32_t(buf[at + 2]) << 16) |
               (uint32_t(buf[at + 3]) << 24);
    };
    const uint32_t version = get_u32(4);
    check(version == kCheckpointVersion,
          "load_checkpoint: unsupported version " + std::to_string(version));
    const uint32_t header_len = get_u32(8);
    check(12 + size_t(header_len) <= buf.size(), "load_checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin() + 12, buf.begin() + 12 + header_len);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("load_checkpoint: corrupt header JSON: ") + e.what());
    }
    LoadedCheckpoint out;
    out.config = RunConfig::from_json(header.at("config"));
    out.extra = header.value("extra", nlohmann::json::object());
    out.tensors = header.at("tensors");
    const size_t payload_start = 12 + size_t(header_len);
    out.payload.assign(buf.begin() + long(payload_start), buf.end());
    // bounds / overlap validation
    uint64_t cursor = 0;
    std::vector<std::pair<uint64_t, uint64_t>> spans;
    for (auto it = out.tensors.begin(); it != out.tensors.end(); ++it) {
        const uint64_t off = it.value().at("offset").get<uint64_t>();
        const uint64_t n = it.value().at("nbytes").get<uint64_t>();
        check(off + n <= out.payload.size(),
              "load_checkpoint: tensor '" + it.key() + "' extends past end of payload");
        spans.push_back({off, off + n});
        cursor = std::max(cursor, off + n);
    }
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
        check(spans[i].first >= spans[i - 1].second, "load_checkpoint: overlapping tensor spans");
    return out;
}

}  // namespace regen3d
