#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regen3d/nn.hpp"
#include "regen3d/optim.hpp"

using namespace regen3d;

namespace {

// Finite-difference oracle: perturbs every coordinate of every input by
// +-eps and compares the analytic gradient of loss = sum(f(inputs) .* w).
struct GradCheck {
    float eps = 1e-3f;
    float tolerance = 1e-2f;
    // coordinates with |grad| below this floor sit at the float32
    // finite-difference noise level (~1e-3 at eps=1e-3) and cannot be
    // resolved to 1%; deep composite blocks need a slightly higher floor
    float denom_floor = 0.1f;

    // returns max relative error across all checked coordinates
    float run(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor>& inputs,
              Rng& rng) {
        Tensor out = f(inputs);
        Tensor w = Tensor::randn(out.shape, rng);
        auto loss_value = [&]() {
            NoGradGuard ng;
            Tensor o = f(inputs);
            double acc = 0;
            for (size_t i = 0; i < o.numel(); ++i) acc += double((*o.data)[i]) * double((*w.data)[i]);
            return acc;
        };
        Tensor loss = ops::sum(ops::mul(f(inputs), w));
        backward(loss);
        float worst = 0;
        for (Tensor& input : inputs) {
            if (!input.requires_grad) continue;
            for (size_t i = 0; i < input.numel(); ++i) {
                const float saved = (*input.data)[i];
                (*input.data)[i] = saved + eps;
                const double hi = loss_value();
                (*input.data)[i] = saved - eps;
                const double lo = loss_value();
                (*input.data)[i] = saved;
                const float numeric = float((hi - lo) / (2.0 * double(eps)));
                const float analytic = (*input.grad)[i];
                const float denom = std::max(std::fabs(analytic) + std::fabs(numeric), denom_floor);
                worst = std::max(worst, std::fabs(analytic - numeric) / denom);
            }
        }
        return worst;
    }
};

Tensor grad_tensor(std::vector<int> shape, Rng& rng, float stddev = 0.7f) {
    Tensor t = Tensor::randn(std::move(shape), rng, stddev);
    t.requires_grad = true;
    t.ensure_grad();
    return t;
}

}  // namespace

TEST_CASE("elementwise and matmul gradients match finite differences") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(100 + trial);
        GradCheck gc;
        {
            std::vector<Tensor> in{grad_tensor({3, 4}, rng), grad_tensor({3, 4}, rng)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::mul(ops::add(v[0], v[1]), v[0]); },
                         in, rng) < gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({3, 5}, rng), grad_tensor({5, 4}, rng)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::matmul(v[0], v[1]); }, in, rng) <
                  gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({3, 5}, rng), grad_tensor({4, 5}, rng)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::matmul_nt(v[0], v[1]); }, in, rng) <
                  gc.tolerance);
        }
    }
}

TEST_CASE("softmax, layer norm, gelu, fourier gradients match finite differences") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(300 + trial);
        GradCheck gc;
        {
            std::vector<Tensor> in{grad_tensor({4, 6}, rng)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::softmax_rows(v[0]); }, in, rng) <
                  gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({4, 6}, rng), grad_tensor({6}, rng), grad_tensor({6}, rng)};
            CHECK(gc.run(
                      [](const std::vector<Tensor>& v) { return ops::layer_norm(v[0], v[1], v[2]); },
                      in, rng) < gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({5, 3}, rng)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::gelu(v[0]); }, in, rng) <
                  gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({4, 3}, rng, 0.4f)};
            CHECK(gc.run([](const std::vector<Tensor>& v) { return ops::fourier_features(v[0], 3); }, in,
                         rng) < gc.tolerance);
        }
        {
            std::vector<Tensor> in{grad_tensor({6, 4}, rng)};
            CHECK(gc.run(
                      [](const std::vector<Tensor>& v) {
                          return ops::concat_rows(ops::slice_rows(v[0], 0, 3), ops::slice_rows(v[0], 3, 6));
                      },
                      in, rng) < gc.tolerance);
        }
    }
}

TEST_CASE("attention block gradients match finite differences") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(500 + trial);
        GradCheck gc;
        AttentionParams params(8, 2, rng);
        std::vector<Tensor> in{grad_tensor({3, 8}, rng), grad_tensor({5, 8}, rng),
                               params.q_proj.weight, params.k_proj.weight, params.v_proj.weight,
                               params.out_proj.weight};
        CHECK(gc.run([&params](const std::vector<Tensor>& v) { return attention_block(v[0], v[1], params); },
                     in, rng) < gc.tolerance);
    }
}

TEST_CASE("transformer layer gradients match finite differences and stay finite") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(700 + trial);
        GradCheck gc;
        gc.denom_floor = 0.3f;
        TransformerLayerParams layer(8, 2, true, rng);
        Tensor context = Tensor::randn({4, 8}, rng);
        std::vector<Tensor> in{grad_tensor({5, 8}, rng), layer.self_attn.q_proj.weight,
                               layer.cross_attn.v_proj.weight, layer.ffn.fc1.weight, layer.ln_self.gain};
        CHECK(gc.run(
                  [&](const std::vector<Tensor>& v) { return transformer_layer(v[0], &context, layer); },
                  in, rng) < gc.tolerance);
    }
    // random 8x16 input: finite output, no NaN
    Rng rng(99);
    TransformerLayerParams layer(16, 4, false, rng);
    Tensor x = Tensor::randn({8, 16}, rng);
    Tensor y = transformer_layer(x, nullptr, layer);
    CHECK(y.all_finite());
}

TEST_CASE("attention: single-key softmax reduces to projected value") {
    Rng rng(11);
    AttentionParams params(8, 2, rng);
    Tensor q = Tensor::randn({1, 8}, rng);
    Tensor kv = Tensor::randn({1, 8}, rng);
    Tensor out = attention_block(q, kv, params);
    // softmax over one logit is 1: output = out_proj(v_proj(kv))
    Tensor expected = params.out_proj.forward(params.v_proj.forward(kv));
    for (size_t i = 0; i < out.numel(); ++i)
        CHECK((*out.data)[i] == doctest::Approx((*expected.data)[i]).epsilon(1e-5));
}

TEST_CASE("attention: kv permutation invariance") {
    for (uint64_t trial = 0; trial < 5; ++trial) {
        Rng rng(2000 + trial);
        AttentionParams params(16, 4, rng);
        Tensor q = Tensor::randn({8, 16}, rng);
        Tensor kv = Tensor::randn({8, 16}, rng);
        Tensor out1 = attention_block(q, kv, params);
        // reverse the kv rows
        Tensor kv_perm = Tensor::zeros({8, 16});
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 16; ++j) kv_perm.at(i, j) = kv.at(7 - i, j);
        Tensor out2 = attention_block(q, kv_perm, params);
        float max_diff = 0;
        for (size_t i = 0; i < out1.numel(); ++i)
            max_diff = std::max(max_diff, std::fabs((*out1.data)[i] - (*out2.data)[i]));
        CHECK(max_diff < 1e-5f);
    }
}

TEST_CASE("attention: shape contract and softmax row sums") {
    Rng rng(21);
    AttentionParams params(16, 4, rng);
    Tensor q = Tensor::randn({4, 16}, rng);
    Tensor kv = Tensor::randn({7, 16}, rng);
    Tensor out = attention_block(q, kv, params);
    CHECK(out.shape == std::vector<int>{4, 16});
    // softmax rows sum to 1
    Tensor logits = Tensor::randn({5, 9}, rng);
    Tensor sm = ops::softmax_rows(logits);
    for (int i = 0; i < 5; ++i) {
        double row = 0;
        for (int j = 0; j < 9; ++j) row += double(sm.at(i, j));
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
    // dimension mismatch -> shape error
    Tensor bad = Tensor::randn({3, 8}, rng);
    CHECK_THROWS(attention_block(bad, kv, params));
}

TEST_CASE("transformer layer: zeroed residual projections give exact identity") {
    Rng rng(31);
    TransformerLayerParams layer(16, 4, true, rng);
    layer.self_attn.zero_output_projection();
    layer.cross_attn.zero_output_projection();
    layer.ffn.zero_output_projection();
    Tensor x = Tensor::randn({6, 16}, rng);
    Tensor context = Tensor::randn({3, 16}, rng);
    Tensor y = transformer_layer(x, &context, layer);
    for (size_t i = 0; i < x.numel(); ++i) CHECK((*y.data)[i] == (*x.data)[i]);
}

TEST_CASE("transformer layer: empty context skips cross-attention") {
    Rng rng(41);
    TransformerLayerParams layer(16, 4, true, rng);
    Tensor x = Tensor::randn({6, 16}, rng);
    Tensor empty = Tensor::zeros({0, 16});
    Tensor with_empty = transformer_layer(x, &empty, layer);
    Tensor without = transformer_layer(x, nullptr, layer);
    for (size_t i = 0; i < x.numel(); ++i) CHECK((*with_empty.data)[i] == (*without.data)[i]);
}

TEST_CASE("adamw: hand-evaluated single update") {
    // w=1, g=1, lr=0.1, betas=(0.9,0.999), eps=1e-8, wd=0, step 1:
    // m_hat = 1, v_hat = 1, w' = 1 - 0.1 * 1/(1 + 1e-8)
    Tensor w = Tensor::zeros({1}, true);
    (*w.data)[0] = 1.0f;
    (*w.grad)[0] = 1.0f;
    ParamMap params;
    params.add("w", &w);
    OptimizerState opt = make_optimizer(params, 0.1f, 0.0f);
    const StepReport rep = adamw_step(params, opt);
    CHECK(rep.applied);
    CHECK(opt.step == 1);
    CHECK((*w.data)[0] == doctest::Approx(1.0f - 0.1f * 1.0f / (1.0f + 1e-8f)).epsilon(1e-6));
}

TEST_CASE("adamw: zero gradient leaves params unchanged without decay") {
    Rng rng(51);
    Tensor w = Tensor::randn({4}, rng);
    w.requires_grad = true;
    w.ensure_grad();
    const std::vector<float> before = *w.data;
    ParamMap params;
    params.add("w", &w);
    OptimizerState opt = make_optimizer(params, 0.1f, 0.0f);
    CHECK(adamw_step(params, opt).applied);
    for (size_t i = 0; i < before.size(); ++i) CHECK((*w.data)[i] == before[i]);
}

TEST_CASE("adamw: decoupled weight decay with zero gradient") {
    Tensor w = Tensor::zeros({1}, true);
    (*w.data)[0] = 2.0f;
    ParamMap params;
    params.add("w", &w);
    OptimizerState opt = make_optimizer(params, 0.1f, 0.01f);
    CHECK(adamw_step(params, opt).applied);
    CHECK((*w.data)[0] == doctest::Approx(2.0f * (1.0f - 0.1f * 0.01f)).epsilon(1e-6));
}

TEST_CASE("adamw: non-finite gradient rejects the step") {
    Tensor w = Tensor::zeros({2}, true);
    (*w.data)[0] = 1.0f;
    (*w.grad)[0] = std::numeric_limits<float>::quiet_NaN();
    ParamMap params;
    params.add("w", &w);
    OptimizerState opt = make_optimizer(params, 0.1f, 0.0f);
    const StepReport rep = adamw_step(params, opt);
    CHECK(!rep.applied);
    CHECK(rep.reason.find("non-finite") != std::string::npos);
    CHECK((*w.data)[0] == 1.0f);
    CHECK(opt.step == 0);
}

TEST_CASE("warmup: linear ramp from 1e-6 over the first 5% of steps") {
    CHECK(warmup_lr(1e-3f, 0, 1000) == doctest::Approx(1e-6f));
    CHECK(warmup_lr(1e-3f, 50, 1000) == doctest::Approx(1e-3f));
    CHECK(warmup_lr(1e-3f, 25, 1000) == doctest::Approx(0.5f * (1e-3f + 1e-6f)).epsilon(1e-3));
    CHECK(warmup_lr(1e-3f, 999, 1000) == doctest::Approx(1e-3f));
}

TEST_CASE("forward determinism: identical seeds give bit-identical outputs") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        TransformerLayerParams layer(16, 4, false, rng);
        Tensor x = Tensor::randn({8, 16}, rng);
        return transformer_layer(x, nullptr, layer);
    };
    Tensor a = run(7), b = run(7);
    for (size_t i = 0; i < a.numel(); ++i) CHECK((*a.data)[i] == (*b.data)[i]);
}
