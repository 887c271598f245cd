#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace regen3d {

// Portable deterministic RNG (splitmix64 core). std:: distributions are
// implementation-defined, so all sampling goes through this.
struct Rng {
    uint64_t state = 0x9e3779b97f4a7c15ull;

    explicit Rng(uint64_t seed = 0) : state(seed + 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    float uniform() { return float(next_u64() >> 40) * 0x1p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

    // Box-Muller, one value per call (the pair's second half is dropped to
    // keep the stream position independent of call parity).
    float normal() {
        float u1 = uniform();
        float u2 = uniform();
        if (u1 < 1e-12f) u1 = 1e-12f;
        return std::sqrt(-2.0f * std::log(u1)) * std::cos(6.2831853071795864f * u2);
    }

    float normal(float mean, float stddev) { return mean + stddev * normal(); }
};

inline uint64_t hash_mix(uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
}

// Per-sample stream derivation: hash(global_seed, sample_index[, tag]).
inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_mix(a ^ (hash_mix(b) + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

inline uint64_t hash_combine(uint64_t a, uint64_t b, uint64_t c) {
    return hash_combine(hash_combine(a, b), c);
}

// FNV-1a 64, used for manifest/content hashes.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[size_t(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Worker cap: REGEN3D_THREADS, default = hardware concurrency.
inline int max_threads() {
    static int cached = [] {
        if (const char* env = std::getenv("REGEN3D_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? int(hw) : 1;
    }();
    return cached;
}

// Static range partition. Each index is processed by exactly one worker with
// a fixed sequential inner order, so results do not depend on thread count.
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body,
                         int64_t grain = 1024) {
    if (n <= 0) return;
    int threads = max_threads();
    if (threads <= 1 || n <= grain) {
        body(0, n);
        return;
    }
    int chunks = int(std::min<int64_t>(threads, (n + grain - 1) / grain));
    std::vector<std::thread> pool;
    pool.reserve(size_t(chunks));
    int64_t per = (n + chunks - 1) / chunks;
    for (int c = 0; c < chunks; ++c) {
        int64_t lo = c * per;
        int64_t hi = std::min<int64_t>(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

}  // namespace regen3d
