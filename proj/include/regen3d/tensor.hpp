#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "regen3d/core.hpp"

namespace regen3d {

struct Node;

// Reverse-mode tensor. Value-semantic handle over shared storage; 32-bit
// floats, row-major. grad is lazily allocated, always shape-matched.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<float>> data;
    std::shared_ptr<std::vector<float>> grad;
    std::shared_ptr<Node> node;
    bool requires_grad = false;

    Tensor() = default;

    // grad is allocated at creation for requires_grad tensors so that all
    // copies of the handle share one accumulation buffer.
    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::make_shared<std::vector<float>>(t.numel(), 0.0f);
        t.requires_grad = requires_grad;
        if (requires_grad) t.ensure_grad();
        return t;
    }

    static Tensor full(std::vector<int> shape, float value) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : *t.data) v = value;
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<float> values) {
        Tensor t;
        t.shape = std::move(shape);
        check(t.numel() == values.size(), "Tensor::from: shape/data length mismatch");
        t.data = std::make_shared<std::vector<float>>(std::move(values));
        return t;
    }

    static Tensor randn(std::vector<int> shape, Rng& rng, float stddev = 1.0f) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : *t.data) v = rng.normal() * stddev;
        return t;
    }

    size_t numel() const {
        size_t n = 1;
        for (int e : shape) n *= size_t(e);
        return n;
    }

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    float& at(int r, int c) { return (*data)[size_t(r) * size_t(cols()) + size_t(c)]; }
    float at(int r, int c) const { return (*data)[size_t(r) * size_t(cols()) + size_t(c)]; }
    float item() const {
        check(numel() == 1, "Tensor::item: not a scalar");
        return (*data)[0];
    }

    void ensure_grad() {
        if (!grad) grad = std::make_shared<std::vector<float>>(numel(), 0.0f);
    }

    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), 0.0f);
    }

    bool all_finite() const {
        for (float v : *data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor detach() const {
        Tensor t;
        t.shape = shape;
        t.data = data;
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.shape = shape;
        t.data = std::make_shared<std::vector<float>>(*data);
        t.requires_grad = requires_grad;
        if (requires_grad) t.ensure_grad();
        return t;
    }
};

struct Node {
    std::vector<Tensor> parents;
    std::function<void(Tensor&)> backward;
};

inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled_flag()) { grad_enabled_flag() = false; }
    ~NoGradGuard() { grad_enabled_flag() = prev; }
};

inline bool track_grad(const Tensor& t) { return grad_enabled_flag() && t.requires_grad; }

// Backprop from a scalar loss through the tape.
inline void backward(Tensor& loss) {
    check(loss.numel() == 1, "backward: loss must be scalar");
    std::vector<Tensor*> order;
    std::unordered_set<Node*> visited;
    // iterative post-order DFS
    std::vector<std::pair<Tensor*, size_t>> stack;
    stack.push_back({&loss, 0});
    while (!stack.empty()) {
        auto& [t, idx] = stack.back();
        if (!t->node || visited.count(t->node.get())) {
            stack.pop_back();
            continue;
        }
        if (idx < t->node->parents.size()) {
            Tensor* p = &t->node->parents[idx];
            ++idx;
            if (p->node && !visited.count(p->node.get())) stack.push_back({p, 0});
        } else {
            visited.insert(t->node.get());
            order.push_back(t);
            stack.pop_back();
        }
    }
    loss.ensure_grad();
    (*loss.grad)[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* t = *it;
        if (t->node->backward) t->node->backward(*t);
    }
}

namespace ops {

// 8-accumulator dot product; unrolling frees the compiler to vectorize the
// reduction without fast-math.
inline float dot_span(const float* a, const float* b, int n) {
    float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    float acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
        acc4 += a[i + 4] * b[i + 4];
        acc5 += a[i + 5] * b[i + 5];
        acc6 += a[i + 6] * b[i + 6];
        acc7 += a[i + 7] * b[i + 7];
    }
    float tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7)) + tail;
}

inline Tensor make_result(std::vector<int> shape, std::vector<Tensor> parents) {
    bool rg = false;
    for (const Tensor& p : parents) rg = rg || track_grad(p);
    Tensor out = Tensor::zeros(std::move(shape), rg);
    if (rg) {
        out.node = std::make_shared<Node>();
        out.node->parents = std::move(parents);
    }
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    check(a.shape == b.shape, std::string(op) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = make_result(a.shape, {a, b});
    const size_t n = out.numel();
    const float* pa = a.data->data();
    const float* pb = b.data->data();
    float* po = out.data->data();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (out.node)
        out.node->backward = [](Tensor& o) {
            const size_t m = o.numel();
            for (Tensor& p : o.node->parents) {
                if (!p.requires_grad) continue;
                float* pg = p.grad->data();
                const float* og = o.grad->data();
                for (size_t i = 0; i < m; ++i) pg[i] += og[i];
            }
        };
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = make_result(a.shape, {a, b});
    const size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    if (out.node)
        out.node->backward = [](Tensor& o) {
            const size_t m = o.numel();
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            if (pa.requires_grad)
                for (size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < m; ++i) (*pb.grad)[i] -= (*o.grad)[i];
        };
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = make_result(a.shape, {a, b});
    const size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    if (out.node)
        out.node->backward = [](Tensor& o) {
            const size_t m = o.numel();
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            if (pa.requires_grad)
                for (size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i] * (*pb.data)[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < m; ++i) (*pb.grad)[i] += (*o.grad)[i] * (*pa.data)[i];
        };
    return out;
}

inline Tensor scale(const Tensor& a, float s) {
    Tensor out = make_result(a.shape, {a});
    const size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * s;
    if (out.node)
        out.node->backward = [s](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            if (!pa.requires_grad) return;
            const size_t m = o.numel();
            for (size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i] * s;
        };
    return out;
}

// C[m,n] = A[m,k] * B[k,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.shape.size() == 2 && b.shape.size() == 2, "matmul: rank-2 tensors required");
    check(a.shape[1] == b.shape[0], "matmul: inner dimension mismatch");
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = make_result({m, n}, {a, b});
    const float* pa = a.data->data();
    const float* pb = b.data->data();
    float* po = out.data->data();
    parallel_for(m, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            float* orow = po + i * n;
            for (int kk = 0; kk < k; ++kk) {
                const float av = pa[i * k + kk];
                const float* brow = pb + size_t(kk) * size_t(n);
                for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }, 16384 / std::max(1, n));
    if (out.node)
        out.node->backward = [m, k, n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            const float* og = o.grad->data();
            if (pa.requires_grad) {
                // dA = dC * B^T
                float* ag = pa.grad->data();
                const float* bd = pb.data->data();
                parallel_for(m, [&](int64_t lo, int64_t hi) {
                    for (int64_t i = lo; i < hi; ++i) {
                        const float* grow = og + i * n;
                        for (int kk = 0; kk < k; ++kk)
                            ag[i * k + kk] += dot_span(grow, bd + size_t(kk) * size_t(n), n);
                    }
                }, 16384 / std::max(1, n));
            }
            if (pb.requires_grad) {
                // dB = A^T * dC; parallel over rows of B
                float* bg = pb.grad->data();
                const float* ad = pa.data->data();
                parallel_for(k, [&](int64_t lo, int64_t hi) {
                    for (int64_t kk = lo; kk < hi; ++kk) {
                        float* brow = bg + size_t(kk) * size_t(n);
                        for (int i = 0; i < m; ++i) {
                            const float av = ad[size_t(i) * size_t(k) + size_t(kk)];
                            if (av == 0.0f) continue;
                            const float* grow = og + size_t(i) * size_t(n);
                            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                        }
                    }
                }, 16384 / std::max(1, n));
            }
        };
    return out;
}

// C[m,n] = A[m,k] * B[n,k]^T  (both operands scanned along contiguous rows)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check(a.shape.size() == 2 && b.shape.size() == 2, "matmul_nt: rank-2 tensors required");
    check(a.shape[1] == b.shape[1], "matmul_nt: inner dimension mismatch");
    const int m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor out = make_result({m, n}, {a, b});
    const float* pa = a.data->data();
    const float* pb = b.data->data();
    float* po = out.data->data();
    parallel_for(m, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const float* arow = pa + i * k;
            float* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] = dot_span(arow, pb + size_t(j) * size_t(k), k);
        }
    }, 16384 / std::max(1, n));
    if (out.node)
        out.node->backward = [m, k, n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            const float* og = o.grad->data();
            if (pa.requires_grad) {
                // dA = dC * B
                float* ag = pa.grad->data();
                const float* bd = pb.data->data();
                parallel_for(m, [&](int64_t lo, int64_t hi) {
                    for (int64_t i = lo; i < hi; ++i) {
                        float* arow = ag + i * k;
                        const float* grow = og + i * n;
                        for (int j = 0; j < n; ++j) {
                            const float gv = grow[j];
                            if (gv == 0.0f) continue;
                            const float* brow = bd + size_t(j) * size_t(k);
                            for (int kk = 0; kk < k; ++kk) arow[kk] += gv * brow[kk];
                        }
                    }
                }, 16384 / std::max(1, k));
            }
            if (pb.requires_grad) {
                // dB[j,:] = sum_i dC[i,j] * A[i,:]
                float* bg = pb.grad->data();
                const float* ad = pa.data->data();
                parallel_for(n, [&](int64_t lo, int64_t hi) {
                    for (int64_t j = lo; j < hi; ++j) {
                        float* brow = bg + j * k;
                        for (int i = 0; i < m; ++i) {
                            const float gv = og[size_t(i) * size_t(n) + size_t(j)];
                            if (gv == 0.0f) continue;
                            const float* arow = ad + size_t(i) * size_t(k);
                            for (int kk = 0; kk < k; ++kk) brow[kk] += gv * arow[kk];
                        }
                    }
                }, 16384 / std::max(1, k));
            }
        };
    return out;
}

// X[m,n] + b[n] broadcast over rows
inline Tensor add_row(const Tensor& x, const Tensor& b) {
    check(x.shape.size() == 2 && b.numel() == size_t(x.shape[1]), "add_row: bias shape mismatch");
    const int m = x.shape[0], n = x.shape[1];
    Tensor out = make_result(x.shape, {x, b});
    const float* px = x.data->data();
    const float* pb = b.data->data();
    float* po = out.data->data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) po[size_t(i) * n + j] = px[size_t(i) * n + j] + pb[j];
    if (out.node)
        out.node->backward = [m, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            const float* og = o.grad->data();
            if (px.requires_grad) {
                float* xg = px.grad->data();
                const size_t total = size_t(m) * size_t(n);
                for (size_t i = 0; i < total; ++i) xg[i] += og[i];
            }
            if (pb.requires_grad) {
                float* bgr = pb.grad->data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) bgr[j] += og[size_t(i) * n + j];
            }
        };
    return out;
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    // x[m,in] * w[out,in]^T + b[out]
    return add_row(matmul_nt(x, w), b);
}

inline Tensor softmax_rows(const Tensor& x) {
    check(x.shape.size() == 2, "softmax_rows: rank-2 required");
    const int m = x.shape[0], n = x.shape[1];
    Tensor out = make_result(x.shape, {x});
    const float* px = x.data->data();
    float* po = out.data->data();
    for (int i = 0; i < m; ++i) {
        const float* row = px + size_t(i) * n;
        float* orow = po + size_t(i) * n;
        float mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < n; ++j) orow[j] *= inv;
    }
    if (out.node)
        out.node->backward = [m, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            float* xg = px.grad->data();
            const float* od = o.data->data();
            const float* og = o.grad->data();
            for (int i = 0; i < m; ++i) {
                const float* srow = od + size_t(i) * n;
                const float* grow = og + size_t(i) * n;
                float dot = 0.0f;
                for (int j = 0; j < n; ++j) dot += srow[j] * grow[j];
                float* xrow = xg + size_t(i) * n;
                for (int j = 0; j < n; ++j) xrow[j] += srow[j] * (grow[j] - dot);
            }
        };
    return out;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         float eps = 1e-5f) {
    check(x.shape.size() == 2, "layer_norm: rank-2 required");
    const int m = x.shape[0], n = x.shape[1];
    check(gain.numel() == size_t(n) && bias.numel() == size_t(n), "layer_norm: param shape");
    Tensor out = make_result(x.shape, {x, gain, bias});
    std::vector<float> inv_std(size_t(m), 0.0f);
    std::vector<float> means(size_t(m), 0.0f);
    const float* px = x.data->data();
    const float* pg = gain.data->data();
    const float* pb = bias.data->data();
    float* po = out.data->data();
    for (int i = 0; i < m; ++i) {
        const float* row = px + size_t(i) * n;
        float mean = 0.0f;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= float(n);
        float var = 0.0f;
        for (int j = 0; j < n; ++j) {
            const float d = row[j] - mean;
            var += d * d;
        }
        var /= float(n);
        const float is = 1.0f / std::sqrt(var + eps);
        means[size_t(i)] = mean;
        inv_std[size_t(i)] = is;
        float* orow = po + size_t(i) * n;
        for (int j = 0; j < n; ++j) orow[j] = (row[j] - mean) * is * pg[j] + pb[j];
    }
    if (out.node)
        out.node->backward = [m, n, means, inv_std, eps](Tensor& o) {
            Tensor& px = o.node->parents[0];
            Tensor& pgain = o.node->parents[1];
            Tensor& pbias = o.node->parents[2];
            const float* xd = px.data->data();
            const float* gd = pgain.data->data();
            const float* og = o.grad->data();
            for (int i = 0; i < m; ++i) {
                const float* xrow = xd + size_t(i) * n;
                const float* grow = og + size_t(i) * n;
                const float mean = means[size_t(i)];
                const float is = inv_std[size_t(i)];
                if (pgain.requires_grad || pbias.requires_grad) {
                    for (int j = 0; j < n; ++j) {
                        const float xhat = (xrow[j] - mean) * is;
                        if (pgain.requires_grad) (*pgain.grad)[size_t(j)] += grow[j] * xhat;
                        if (pbias.requires_grad) (*pbias.grad)[size_t(j)] += grow[j];
                    }
                }
                if (px.requires_grad) {
                    float sum_g = 0.0f, sum_gx = 0.0f;
                    for (int j = 0; j < n; ++j) {
                        const float gj = grow[j] * gd[j];
                        const float xhat = (xrow[j] - mean) * is;
                        sum_g += gj;
                        sum_gx += gj * xhat;
                    }
                    float* xg = px.grad->data() + size_t(i) * n;
                    for (int j = 0; j < n; ++j) {
                        const float gj = grow[j] * gd[j];
                        const float xhat = (xrow[j] - mean) * is;
                        xg[j] += is * (gj - (sum_g + xhat * sum_gx) / float(n));
                    }
                }
            }
        };
    return out;
}

inline Tensor gelu(const Tensor& x) {
    Tensor out = make_result(x.shape, {x});
    const size_t n = out.numel();
    const float* px = x.data->data();
    float* po = out.data->data();
    constexpr float inv_sqrt2 = 0.7071067811865476f;
    for (size_t i = 0; i < n; ++i) po[i] = 0.5f * px[i] * (1.0f + std::erf(px[i] * inv_sqrt2));
    if (out.node)
        out.node->backward = [](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            const size_t m = o.numel();
            const float* xd = px.data->data();
            const float* og = o.grad->data();
            float* xg = px.grad->data();
            constexpr float inv_sqrt2 = 0.7071067811865476f;
            constexpr float inv_sqrt2pi = 0.3989422804014327f;
            for (size_t i = 0; i < m; ++i) {
                const float x = xd[i];
                const float cdf = 0.5f * (1.0f + std::erf(x * inv_sqrt2));
                const float pdf = inv_sqrt2pi * std::exp(-0.5f * x * x);
                xg[i] += og[i] * (cdf + x * pdf);
            }
        };
    return out;
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
    check(x.shape.size() == 2, "slice_rows: rank-2 required");
    check(0 <= r0 && r0 <= r1 && r1 <= x.shape[0], "slice_rows: range out of bounds");
    const int n = x.shape[1];
    Tensor out = make_result({r1 - r0, n}, {x});
    std::memcpy(out.data->data(), x.data->data() + size_t(r0) * n,
                size_t(r1 - r0) * size_t(n) * sizeof(float));
    if (out.node)
        out.node->backward = [r0, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            const size_t m = o.numel();
            float* xg = px.grad->data() + size_t(r0) * n;
            const float* og = o.grad->data();
            for (size_t i = 0; i < m; ++i) xg[i] += og[i];
        };
    return out;
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
    check(x.shape.size() == 2, "slice_cols: rank-2 required");
    check(0 <= c0 && c0 <= c1 && c1 <= x.shape[1], "slice_cols: range out of bounds");
    const int m = x.shape[0], n = x.shape[1], w = c1 - c0;
    Tensor out = make_result({m, w}, {x});
    const float* px = x.data->data();
    float* po = out.data->data();
    for (int i = 0; i < m; ++i)
        std::memcpy(po + size_t(i) * w, px + size_t(i) * n + c0, size_t(w) * sizeof(float));
    if (out.node)
        out.node->backward = [c0, m, n, w](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            float* xg = px.grad->data();
            const float* og = o.grad->data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    xg[size_t(i) * n + size_t(c0 + j)] += og[size_t(i) * w + j];
        };
    return out;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    check(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[1],
          "concat_rows: column mismatch");
    const int ma = a.shape[0], mb = b.shape[0], n = a.shape[1];
    Tensor out = make_result({ma + mb, n}, {a, b});
    std::memcpy(out.data->data(), a.data->data(), size_t(ma) * n * sizeof(float));
    std::memcpy(out.data->data() + size_t(ma) * n, b.data->data(), size_t(mb) * n * sizeof(float));
    if (out.node)
        out.node->backward = [ma, mb, n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            const float* og = o.grad->data();
            if (pa.requires_grad) {
                float* ag = pa.grad->data();
                for (size_t i = 0; i < size_t(ma) * n; ++i) ag[i] += og[i];
            }
            if (pb.requires_grad) {
                float* bg = pb.grad->data();
                const float* src = og + size_t(ma) * n;
                for (size_t i = 0; i < size_t(mb) * n; ++i) bg[i] += src[i];
            }
        };
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat_cols: empty input");
    const int m = parts[0].shape[0];
    int total = 0;
    for (const Tensor& p : parts) {
        check(p.shape.size() == 2 && p.shape[0] == m, "concat_cols: row mismatch");
        total += p.shape[1];
    }
    Tensor out = make_result({m, total}, parts);
    float* po = out.data->data();
    int off = 0;
    for (const Tensor& p : parts) {
        const int w = p.shape[1];
        const float* pd = p.data->data();
        for (int i = 0; i < m; ++i)
            std::memcpy(po + size_t(i) * total + off, pd + size_t(i) * w, size_t(w) * sizeof(float));
        off += w;
    }
    if (out.node)
        out.node->backward = [m, total](Tensor& o) {
            const float* og = o.grad->data();
            int off2 = 0;
            for (Tensor& p : o.node->parents) {
                const int w = p.shape[1];
                if (p.requires_grad) {
                    float* pg = p.grad->data();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < w; ++j)
                            pg[size_t(i) * w + j] += og[size_t(i) * total + off2 + j];
                }
                off2 += w;
            }
        };
    return out;
}

inline Tensor sum(const Tensor& x) {
    Tensor out = make_result({1}, {x});
    float acc = 0.0f;
    for (float v : *x.data) acc += v;
    (*out.data)[0] = acc;
    if (out.node)
        out.node->backward = [](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            const float g = (*o.grad)[0];
            for (auto& v : *px.grad) v += g;
        };
    return out;
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / float(x.numel())); }

inline Tensor mse(const Tensor& pred, const Tensor& target) {
    Tensor d = sub(pred, target);
    return mean(mul(d, d));
}

inline Tensor add_scalar(const Tensor& a, float s) {
    Tensor out = make_result(a.shape, {a});
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] + s;
    if (out.node)
        out.node->backward = [](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            if (!pa.requires_grad) return;
            for (size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i];
        };
    return out;
}

inline Tensor exp(const Tensor& a) {
    Tensor out = make_result(a.shape, {a});
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = std::exp((*a.data)[i]);
    if (out.node)
        out.node->backward = [](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            if (!pa.requires_grad) return;
            for (size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i] * (*o.data)[i];
        };
    return out;
}

// out[i,:] = x[indices[i],:]
inline Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
    check(x.shape.size() == 2, "gather_rows: rank-2 required");
    const int n = x.shape[1];
    Tensor out = make_result({int(indices.size()), n}, {x});
    for (size_t i = 0; i < indices.size(); ++i) {
        check(indices[i] >= 0 && indices[i] < x.shape[0], "gather_rows: index out of range");
        std::memcpy(out.data->data() + i * size_t(n), x.data->data() + size_t(indices[i]) * size_t(n),
                    size_t(n) * sizeof(float));
    }
    if (out.node) {
        auto idx = indices;
        out.node->backward = [idx, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            float* xg = px.grad->data();
            const float* og = o.grad->data();
            for (size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < n; ++j)
                    xg[size_t(idx[i]) * size_t(n) + size_t(j)] += og[i * size_t(n) + size_t(j)];
        };
    }
    return out;
}

// Fourier positional features: [x, sin(2^j pi x), cos(2^j pi x)] per input
// channel, j = 0..bands-1. Differentiable w.r.t. the input coordinates.
inline Tensor fourier_features(const Tensor& x, int bands) {
    check(x.shape.size() == 2, "fourier_features: rank-2 required");
    const int m = x.shape[0], c = x.shape[1];
    const int out_c = c * (1 + 2 * bands);
    Tensor out = make_result({m, out_c}, {x});
    const float* px = x.data->data();
    float* po = out.data->data();
    constexpr float pi = 3.14159265358979323846f;
    for (int i = 0; i < m; ++i) {
        const float* row = px + size_t(i) * c;
        float* orow = po + size_t(i) * out_c;
        for (int j = 0; j < c; ++j) orow[j] = row[j];
        int off = c;
        for (int b = 0; b < bands; ++b) {
            const float f = std::ldexp(pi, b);  // 2^b * pi
            for (int j = 0; j < c; ++j) {
                orow[off + j] = std::sin(f * row[j]);
                orow[off + c + j] = std::cos(f * row[j]);
            }
            off += 2 * c;
        }
    }
    if (out.node)
        out.node->backward = [m, c, bands, out_c](Tensor& o) {
            Tensor& px = o.node->parents[0];
            if (!px.requires_grad) return;
            const float* xd = px.data->data();
            const float* og = o.grad->data();
            float* xg = px.grad->data();
            constexpr float pi = 3.14159265358979323846f;
            for (int i = 0; i < m; ++i) {
                const float* xrow = xd + size_t(i) * c;
                const float* grow = og + size_t(i) * out_c;
                float* grad_row = xg + size_t(i) * c;
                for (int j = 0; j < c; ++j) grad_row[j] += grow[j];
                int off = c;
                for (int b = 0; b < bands; ++b) {
                    const float f = std::ldexp(pi, b);
                    for (int j = 0; j < c; ++j) {
                        grad_row[j] += grow[off + j] * f * std::cos(f * xrow[j]);
                        grad_row[j] -= grow[off + c + j] * f * std::sin(f * xrow[j]);
                    }
                    off += 2 * c;
                }
            }
        };
    return out;
}

}  // namespace ops
}  // namespace regen3d
