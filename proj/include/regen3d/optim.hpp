#pragma once

#include <vector>

#include "regen3d/nn.hpp"

namespace regen3d {

// AdamW with decoupled weight decay. Moment buffers are keyed by parameter
// order in the ParamMap, which is stable for a given model.
struct OptimizerState {
    std::vector<std::vector<float>> first_moment;
    std::vector<std::vector<float>> second_moment;
    long step = 0;
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
};

struct StepReport {
    bool applied = false;
    float grad_norm = 0.0f;
    std::string reason;  // set when the step was rejected
};

inline OptimizerState make_optimizer(const ParamMap& params, float lr, float weight_decay = 0.0f,
                                     float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f) {
    OptimizerState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.first_moment.reserve(params.entries.size());
    for (auto& [name, t] : params.entries) {
        s.first_moment.emplace_back(t->numel(), 0.0f);
        s.second_moment.emplace_back(t->numel(), 0.0f);
    }
    return s;
}

// One AdamW update. Non-finite gradients reject the whole step (no buffer or
// parameter is touched) and the report says why.
inline StepReport adamw_step(ParamMap& params, OptimizerState& state) {
    check(params.entries.size() == state.first_moment.size(),
          "adamw_step: optimizer state does not match parameter set");
    StepReport report;
    double sq_norm = 0.0;
    for (size_t pi = 0; pi < params.entries.size(); ++pi) {
        Tensor* t = params.entries[pi].second;
        check(t->grad && t->grad->size() == t->numel(), "adamw_step: missing gradient");
        check(state.first_moment[pi].size() == t->numel(), "adamw_step: moment shape mismatch");
        for (float g : *t->grad) {
            if (!std::isfinite(g)) {
                report.reason = "non-finite gradient in " + params.entries[pi].first;
                return report;
            }
            sq_norm += double(g) * double(g);
        }
    }
    report.grad_norm = float(std::sqrt(sq_norm));
    state.step += 1;
    const float bc1 = 1.0f - std::pow(state.beta1, float(state.step));
    const float bc2 = 1.0f - std::pow(state.beta2, float(state.step));
    for (size_t pi = 0; pi < params.entries.size(); ++pi) {
        Tensor* t = params.entries[pi].second;
        float* w = t->data->data();
        const float* g = t->grad->data();
        float* m = state.first_moment[pi].data();
        float* v = state.second_moment[pi].data();
        const size_t n = t->numel();
        for (size_t i = 0; i < n; ++i) {
            m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g[i] * g[i];
            const float m_hat = m[i] / bc1;
            const float v_hat = v[i] / bc2;
            w[i] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * w[i]);
        }
    }
    report.applied = true;
    return report;
}

inline void zero_grads(ParamMap& params) {
    for (auto& [name, t] : params.entries) t->zero_grad();
}

// Linear warm-up from warmup_start over the first warmup_frac of the run,
// then constant.
inline float warmup_lr(float base_lr, long step, long total_steps, float warmup_frac = 0.05f,
                       float warmup_start = 1e-6f) {
    const long warmup_steps = std::max<long>(1, long(double(total_steps) * double(warmup_frac)));
    if (step >= warmup_steps) return base_lr;
    const float t = float(step) / float(warmup_steps);
    return warmup_start + (base_lr - warmup_start) * t;
}

// Warm-up followed by cosine decay to min_frac * base_lr.
inline float warmup_cosine_lr(float base_lr, long step, long total_steps, float warmup_frac = 0.05f,
                              float warmup_start = 1e-6f, float min_frac = 0.1f) {
    const long warmup_steps = std::max<long>(1, long(double(total_steps) * double(warmup_frac)));
    if (step < warmup_steps) return warmup_lr(base_lr, step, total_steps, warmup_frac, warmup_start);
    const double t = double(step - warmup_steps) / double(std::max<long>(1, total_steps - warmup_steps));
    const double cos_term = 0.5 * (1.0 + std::cos(3.14159265358979 * std::min(1.0, t)));
    return base_lr * float(min_frac + (1.0 - min_frac) * cos_term);
}

}  // namespace regen3d
