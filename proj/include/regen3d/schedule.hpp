#pragma once

#include <vector>

#include "regen3d/tensor.hpp"

namespace regen3d {

// Variance-preserving noise schedule with the scaled-linear beta rule:
// beta_t = (sqrt(b0) + t/(T-1) * (sqrt(b1) - sqrt(b0)))^2.
struct NoiseSchedule {
    int steps = 0;  // T
    std::vector<float> betas;
    std::vector<float> alphas;
    std::vector<float> alpha_bars;

    float sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bars[size_t(t)]); }
    float sqrt_one_minus_alpha_bar(int t) const { return std::sqrt(1.0f - alpha_bars[size_t(t)]); }
};

inline NoiseSchedule make_schedule(int steps, float beta_start = 0.00085f, float beta_end = 0.0015f) {
    check(steps >= 2, "make_schedule: T must be at least 2");
    check(beta_start > 0 && beta_start <= beta_end && beta_end < 1,
          "make_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.betas.resize(size_t(steps));
    s.alphas.resize(size_t(steps));
    s.alpha_bars.resize(size_t(steps));
    // double math so the endpoints round back to beta_start / beta_end exactly
    const double r0 = std::sqrt(double(beta_start)), r1 = std::sqrt(double(beta_end));
    double bar = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double r = r0 + (double(t) / double(steps - 1)) * (r1 - r0);
        s.betas[size_t(t)] = float(r * r);
        s.alphas[size_t(t)] = 1.0f - s.betas[size_t(t)];
        bar *= double(s.alphas[size_t(t)]);
        s.alpha_bars[size_t(t)] = float(bar);
    }
    return s;
}

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) noise
inline Tensor q_sample(const Tensor& z0, int t, const Tensor& noise, const NoiseSchedule& sched) {
    check(t >= 0 && t < sched.steps, "q_sample: t out of range");
    check(z0.shape == noise.shape, "q_sample: shape mismatch");
    const float a = sched.sqrt_alpha_bar(t);
    const float b = sched.sqrt_one_minus_alpha_bar(t);
    Tensor out = Tensor::zeros(z0.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data->at(i) = a * z0.data->at(i) + b * noise.data->at(i);
    return out;
}

enum class VConvert { ToV, ToX0, ToEps };

// v = sqrt(abar) eps - sqrt(1-abar) z0
// z0 = sqrt(abar) z_t - sqrt(1-abar) v
// eps = sqrt(1-abar) z_t + sqrt(abar) v
inline Tensor v_convert(VConvert direction, const Tensor& first, const Tensor& second, int t,
                        const NoiseSchedule& sched) {
    check(t >= 0 && t < sched.steps, "v_convert: t out of range");
    check(first.shape == second.shape, "v_convert: shape mismatch");
    const float a = sched.sqrt_alpha_bar(t);
    const float b = sched.sqrt_one_minus_alpha_bar(t);
    Tensor out = Tensor::zeros(first.shape);
    switch (direction) {
        case VConvert::ToV:  // first = z0, second = eps
            for (size_t i = 0; i < out.numel(); ++i)
                out.data->at(i) = a * second.data->at(i) - b * first.data->at(i);
            break;
        case VConvert::ToX0:  // first = z_t, second = v
            for (size_t i = 0; i < out.numel(); ++i)
                out.data->at(i) = a * first.data->at(i) - b * second.data->at(i);
            break;
        case VConvert::ToEps:  // first = z_t, second = v
            for (size_t i = 0; i < out.numel(); ++i)
                out.data->at(i) = b * first.data->at(i) + a * second.data->at(i);
            break;
    }
    return out;
}

// Evenly strided sampling timesteps, descending, rounded toward 0; always
// includes both T-1 and the final t=0 denoise.
inline std::vector<int> strided_timesteps(int sample_steps, int total_steps) {
    check(sample_steps >= 1 && sample_steps <= total_steps, "strided_timesteps: invalid step count");
    std::vector<int> ts;
    if (sample_steps == 1) {
        ts.push_back(total_steps - 1);
        return ts;
    }
    for (int i = sample_steps - 1; i >= 0; --i) {
        const int t = int((int64_t(i) * int64_t(total_steps - 1)) / int64_t(sample_steps - 1));
        if (ts.empty() || ts.back() != t) ts.push_back(t);
    }
    return ts;  // descending, ends at 0
}

}  // namespace regen3d
