#pragma once

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "regen3d/core.hpp"

namespace regen3d {

// JSONL run log: first record is the resolved config, then one record per
// step with loss / lr / wall-clock. Loss traces (not wall-clock) are the
// reproducibility contract.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            check(file_.good(), "RunLog: cannot open " + path);
        }
        start_ = std::chrono::steady_clock::now();
    }

    void config(const nlohmann::json& resolved) { write(nlohmann::json{{"event", "config"}, {"config", resolved}}); }

    void step(long step, double loss, double lr, const nlohmann::json& extra = {}) {
        nlohmann::json j{{"event", "step"}, {"step", step}, {"loss", loss}, {"lr", lr}, {"wall_ms", wall_ms()}};
        if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
        write(j);
    }

    void note(const std::string& message) { write(nlohmann::json{{"event", "note"}, {"message", message}}); }

    double wall_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    void write(const nlohmann::json& j) {
        if (file_.is_open()) {
            file_ << j.dump() << "\n";
            file_.flush();
        }
    }

    std::ofstream file_;
    std::chrono::steady_clock::time_point start_;
};

// Exclusive ownership of an output directory via a lock file.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
        std::filesystem::create_directories(dir);
        check(!std::filesystem::exists(path_),
              "output directory is locked by another run: " + dir.string() +
                  " (remove .lock if that run is dead)");
        std::ofstream f(path_);
        f << "pid " << ::getpid() << "\n";
    }
    ~DirLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path path_;
};

inline uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "file_hash: cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a(buf.data(), buf.size());
}

}  // namespace regen3d
