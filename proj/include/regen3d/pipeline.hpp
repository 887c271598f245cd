#pragma once

#include <filesystem>
#include <iostream>

#include "regen3d/checkpoint.hpp"
#include "regen3d/dataset.hpp"
#include "regen3d/diffusion.hpp"
#include "regen3d/metrics.hpp"
#include "regen3d/optim.hpp"
#include "regen3d/runlog.hpp"

namespace regen3d {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// autoencoder training
// ---------------------------------------------------------------------------

struct AeTrainResult {
    double final_loss = 0;
    long rejected_steps = 0;
};

inline Tensor ae_loss_for_item(const VecSetAE& ae, const OrientedPointCloud& cloud,
                               const ShapeSpec& shape, int k_draw, Rng& rng, float kl_weight) {
    AeQueryBatch q = make_ae_queries(cloud, shape, rng);
    if (!ae.variational) {
        Tensor tokens = ae.encode_tokens(cloud, k_draw, nullptr);
        Tensor pred = ae.decode_tokens(tokens, q.queries);
        return ops::mse(pred, q.targets);
    }
    // variational mode: sample z = mu + exp(logvar/2) eps, KL to unit Gaussian
    VecSetAE::VariationalOut venc = ae.encode_variational(cloud, k_draw, rng);
    Tensor pred = ae.decode_tokens(venc.tokens, q.queries);
    Tensor recon = ops::mse(pred, q.targets);
    Tensor var = ops::exp(venc.logvar);
    Tensor kl_terms = ops::sub(ops::add(ops::mul(venc.mu, venc.mu), var),
                               ops::add_scalar(venc.logvar, 1.0f));
    return ops::add(recon, ops::scale(ops::mean(kl_terms), 0.5f * kl_weight));
}

// One optimizer step over a batch of (cloud, shape) pairs. K is drawn per
// batch from the training range {8,16,32,64} (clamped to the config K).
inline StepReport ae_train_step(VecSetAE& ae, ParamMap& params, OptimizerState& opt,
                                const std::vector<const OrientedPointCloud*>& clouds,
                                const std::vector<const ShapeSpec*>& shapes, int k_draw, Rng& rng,
                                double* loss_out) {
    check(!clouds.empty() && clouds.size() == shapes.size(), "ae_train_step: empty batch");
    zero_grads(params);
    Tensor total;
    for (size_t i = 0; i < clouds.size(); ++i) {
        Tensor item = ae_loss_for_item(ae, *clouds[i], *shapes[i], k_draw, rng, 1e-6f);
        total = (i == 0) ? item : ops::add(total, item);
    }
    Tensor loss = ops::scale(total, 1.0f / float(clouds.size()));
    if (!std::isfinite(loss.item())) {
        if (loss_out) *loss_out = double(loss.item());
        StepReport r;
        r.reason = "non-finite loss";
        return r;
    }
    backward(loss);
    if (loss_out) *loss_out = double(loss.item());
    return adamw_step(params, opt);
}

struct AeCorpus {
    std::vector<ShapeSpec> shapes;
    std::vector<OrientedPointCloud> clouds;
};

inline AeCorpus make_ae_corpus(int count, uint64_t seed, int n_points = 4096) {
    AeCorpus corpus;
    corpus.shapes.resize(size_t(count));
    corpus.clouds.resize(size_t(count));
    parallel_for(count, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            corpus.shapes[size_t(i)] = sample_primitive_shape(hash_combine(seed, uint64_t(i)));
            corpus.clouds[size_t(i)] =
                sample_surface(corpus.shapes[size_t(i)], n_points, hash_combine(seed, uint64_t(i), 77));
        }
    }, 1);
    return corpus;
}

inline AeTrainResult train_ae(VecSetAE& ae, const AeCorpus& corpus, const RunConfig& cfg, RunLog& log) {
    ParamMap params = ae.params();
    OptimizerState opt = make_optimizer(params, cfg.lr, 0.01f);
    Rng rng(hash_combine(cfg.seed, 0xae77ULL));
    // K drawn per batch from the training range, weighted toward the larger
    // budgets the diffusion target uses
    const std::vector<int> k_choices = [&] {
        std::vector<int> ks;
        for (int k : {8, 16, 32, 64, 32, 64, 64, 64})
            if (k <= cfg.k) ks.push_back(k);
        if (ks.empty()) ks.push_back(cfg.k);
        return ks;
    }();
    AeTrainResult result;
    for (int step = 0; step < cfg.steps; ++step) {
        opt.lr = warmup_cosine_lr(cfg.lr, step, cfg.steps);
        std::vector<const OrientedPointCloud*> clouds;
        std::vector<const ShapeSpec*> shapes;
        for (int b = 0; b < cfg.batch; ++b) {
            const size_t idx = rng.uniform_index(corpus.shapes.size());
            clouds.push_back(&corpus.clouds[idx]);
            shapes.push_back(&corpus.shapes[idx]);
        }
        const int k_draw = k_choices[rng.uniform_index(k_choices.size())];
        double loss = 0;
        const StepReport rep = ae_train_step(ae, params, opt, clouds, shapes, k_draw, rng, &loss);
        if (!rep.applied) ++result.rejected_steps;
        result.final_loss = loss;
        if (step % 25 == 0 || step + 1 == cfg.steps)
            log.step(step, loss, opt.lr, {{"k", k_draw}, {"applied", rep.applied}});
    }
    return result;
}

// mean voxel IoU of AE reconstructions against the analytic shapes
inline double ae_mean_iou(const VecSetAE& ae, const AeCorpus& corpus, int k, int resolution,
                          int limit = -1) {
    const int n = limit > 0 ? std::min<int>(limit, int(corpus.shapes.size())) : int(corpus.shapes.size());
    std::vector<double> ious(size_t(n), 0.0);
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const LatentSet z = ae.encode(corpus.clouds[size_t(i)], k);
            const SdfGrid grid = ae.decode_grid(z, resolution);
            OccupancyFn decoded = [&grid](const std::vector<Vec3>& pts, std::vector<bool>& out) {
                out.resize(pts.size());
                for (size_t j = 0; j < pts.size(); ++j) out[j] = grid.sample(pts[j]) <= 0.0f;
            };
            ious[size_t(i)] = voxel_iou(occupancy_from_shape(corpus.shapes[size_t(i)]), decoded, resolution);
        }
    }, 1);
    double sum = 0;
    for (double v : ious) sum += v;
    return sum / double(n);
}

// ---------------------------------------------------------------------------
// latent dataset for the denoiser
// ---------------------------------------------------------------------------

struct LatentTriplet {
    Tensor target_tokens;       // [K, D], latent-scaled
    ConditionBundle condition;  // raw (un-preprocessed) tokens + anchors
    Image image;
    std::string task;
};

struct LatentDataset {
    std::vector<LatentTriplet> items;
    float latent_scale = 1.0f;
};

// Encode stored triplets once: targets at K tokens, conditions at C (C-k
// encoded + k bank rows for edit). Latents are divided by the global std of
// the target tokens (recorded in the checkpoint).
inline LatentDataset encode_triplets(const std::vector<TrainingTriplet>& triplets, const VecSetAE& ae,
                                     const DitModel& model, const RunConfig& cfg) {
    LatentDataset ds;
    ds.items.resize(triplets.size());
    const bool flow = model.parameterization == Parameterization::Flow;
    parallel_for(int64_t(triplets.size()), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const TrainingTriplet& t = triplets[size_t(i)];
            LatentTriplet item;
            item.task = t.task;
            item.image = t.image;
            LatentSet zh = ae.encode(t.target, cfg.k);
            item.target_tokens = zh.tokens;
            if (flow) {
                // flow integrates from the coarse latent, so it must live in
                // the same K-token space as the target
                LatentSet zl = ae.encode(t.condition, cfg.k);
                item.condition.tokens = zl.tokens;
                item.condition.anchors = zl.anchors;
            } else if (t.task == "edit") {
                check(t.mask.has_value(), "encode_triplets: edit triplet without mask");
                item.condition = build_edit_condition(t.condition, *t.mask, cfg.c, cfg.k_min, ae,
                                                      model.conditioner,
                                                      hash_combine(t.meta.value("seed", uint64_t(0)), 13));
            } else {
                LatentSet zl = ae.encode(t.condition, cfg.c);
                item.condition.tokens = zl.tokens;
                item.condition.anchors = zl.anchors;
            }
            ds.items[size_t(i)] = std::move(item);
        }
    }, 1);
    double sq = 0;
    size_t n = 0;
    for (const auto& item : ds.items) {
        for (float v : *item.target_tokens.data) sq += double(v) * double(v);
        n += item.target_tokens.numel();
    }
    ds.latent_scale = n ? float(std::sqrt(sq / double(n))) : 1.0f;
    if (ds.latent_scale < 1e-6f) ds.latent_scale = 1.0f;
    for (auto& item : ds.items) {
        for (float& v : *item.target_tokens.data) v /= ds.latent_scale;
        if (flow)
            for (float& v : *item.condition.tokens.data) v /= ds.latent_scale;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// denoiser training (ddpm_v and flow parameterizations)
// ---------------------------------------------------------------------------

struct DitTrainContext {
    NoiseSchedule schedule;
    float latent_scale = 1.0f;
};

inline Tensor image_tokens_or_empty(const DitModel& model, const Image* image) {
    if (!image) return Tensor::zeros({0, model.dim});
    return encode_image_tokens(*image, model.image_tokenizer);
}

// Loss for one triplet. For ddpm_v: MSE(v_pred, v_target) over the K target
// rows (condition rows receive no loss by construction). For flow: MSE of
// the velocity against (z^H - z^L_K) on the linear path.
inline Tensor dit_item_loss(DitModel& model, const LatentTriplet& item, const DitTrainContext& ctx,
                            Rng& rng, float image_dropout) {
    const bool drop_image = rng.uniform() < image_dropout;
    Tensor img_tokens = image_tokens_or_empty(model, drop_image ? nullptr : &item.image);
    if (model.parameterization == Parameterization::DdpmV) {
        const int t = int(rng.uniform_index(uint64_t(ctx.schedule.steps)));
        Tensor noise = Tensor::randn(item.target_tokens.shape, rng);
        Tensor z_t = q_sample(item.target_tokens, t, noise, ctx.schedule);
        Tensor v_target = v_convert(VConvert::ToV, item.target_tokens, noise, t, ctx.schedule);
        ConditionBundle bundle = item.condition;
        bundle.tokens = bundle_tokens_for_training(bundle, model.conditioner);
        Tensor cond = preprocess_condition(bundle, model.conditioner);
        DenoiserInput input = assemble_input(z_t, cond, img_tokens, float(t));
        Tensor v_pred = dit_denoise(input, model);
        return ops::mse(v_pred, v_target);
    }
    // flow: coarse latent re-encoded at K tokens is prepared by the caller in
    // item.condition.tokens (flow datasets use C == K); integrate z^L -> z^H
    const float tau = rng.uniform();
    FlowPair pair{item.condition.tokens.detach(), item.target_tokens};
    Tensor x_tau = flow_interpolate(pair, tau);
    Tensor v_target = flow_velocity_target(pair);
    DenoiserInput input = assemble_input(x_tau, Tensor::zeros({0, model.dim}), img_tokens,
                                         tau * float(ctx.schedule.steps - 1));
    Tensor v_pred = dit_denoise(input, model);
    return ops::mse(v_pred, v_target);
}

inline StepReport dit_train_step(DitModel& model, ParamMap& params, OptimizerState& opt,
                                 const std::vector<const LatentTriplet*>& batch,
                                 const DitTrainContext& ctx, Rng& rng, float image_dropout,
                                 double* loss_out) {
    check(!batch.empty(), "dit_train_step: empty batch");
    zero_grads(params);
    Tensor total;
    for (size_t i = 0; i < batch.size(); ++i) {
        Tensor item = dit_item_loss(model, *batch[i], ctx, rng, image_dropout);
        total = (i == 0) ? item : ops::add(total, item);
    }
    Tensor loss = ops::scale(total, 1.0f / float(batch.size()));
    if (!std::isfinite(loss.item())) {
        if (loss_out) *loss_out = double(loss.item());
        StepReport r;
        r.reason = "non-finite loss";
        return r;
    }
    backward(loss);
    if (loss_out) *loss_out = double(loss.item());
    return adamw_step(params, opt);
}

inline void train_dit(DitModel& model, const LatentDataset& ds, const RunConfig& cfg,
                      const DitTrainContext& ctx, RunLog& log) {
    check(!ds.items.empty(), "train_dit: empty dataset");
    ParamMap params = model.params();
    OptimizerState opt = make_optimizer(params, cfg.lr, 0.01f);
    Rng rng(hash_combine(cfg.seed, 0xd17fULL));
    for (int step = 0; step < cfg.steps; ++step) {
        opt.lr = warmup_cosine_lr(cfg.lr, step, cfg.steps);
        std::vector<const LatentTriplet*> batch;
        for (int b = 0; b < cfg.batch; ++b) batch.push_back(&ds.items[rng.uniform_index(ds.items.size())]);
        double loss = 0;
        const StepReport rep = dit_train_step(model, params, opt, batch, ctx, rng, cfg.dropout, &loss);
        if (step % 25 == 0 || step + 1 == cfg.steps)
            log.step(step, loss, opt.lr, {{"applied", rep.applied}});
    }
}

// ---------------------------------------------------------------------------
// sampling wrappers
// ---------------------------------------------------------------------------

// Sample target tokens given a condition bundle and image. Returns latents
// in AE token units (latent scale already undone).
inline LatentSet sample_regen_latents(const DitModel& model, const ConditionBundle& bundle,
                                      const Image* image, const DitTrainContext& ctx,
                                      const RunConfig& cfg, uint64_t seed) {
    NoGradGuard ng;
    Tensor cond = Tensor::zeros({0, model.dim});
    const bool has_cond = bundle.count() > 0;
    if (has_cond) cond = preprocess_condition(bundle, model.conditioner);
    Tensor img_tokens = image_tokens_or_empty(model, image);
    Tensor empty_img = Tensor::zeros({0, model.dim});
    Tensor out;
    if (model.parameterization == Parameterization::DdpmV) {
        DenoiseFn fn = [&](const Tensor& z_t, int t, bool with_image) {
            DenoiserInput input = assemble_input(z_t, cond, with_image ? img_tokens : empty_img, float(t));
            return dit_denoise(input, model);
        };
        out = ddpm_sample(fn, {cfg.k, model.dim}, cfg.sample_steps, image ? cfg.cfg_scale : 1.0f, seed,
                          ctx.schedule);
    } else {
        check(has_cond && bundle.count() == cfg.k, "flow sampling requires a coarse latent at K tokens");
        Tensor start = bundle.tokens.detach();
        VelocityFn fn = [&](const Tensor& x, float tau, bool with_image) {
            DenoiserInput input = assemble_input(x, Tensor::zeros({0, model.dim}),
                                                 with_image ? img_tokens : empty_img,
                                                 tau * float(ctx.schedule.steps - 1));
            return dit_denoise(input, model);
        };
        out = flow_sample(fn, start, cfg.sample_steps, image ? cfg.cfg_scale : 1.0f);
    }
    LatentSet z;
    z.tokens = out;
    for (float& v : *z.tokens.data) v *= ctx.latent_scale;
    return z;
}

// SDEdit-style degradation hook: noise the scene tokens to t*, then denoise
// back to 0 with the base generator conditioned on the scene render.
inline SdeditFn make_sdedit_fn(const DitModel& base, const DitTrainContext& ctx, int sample_steps,
                               float cfg_scale, uint64_t seed) {
    check(base.parameterization == Parameterization::DdpmV, "sdedit needs a ddpm_v base generator");
    return [&base, ctx, sample_steps, cfg_scale, seed](const Tensor& tokens, const Image& render,
                                                       int t_star) {
        check(t_star >= 1 && t_star < ctx.schedule.steps, "sdedit: t_star must be in [1, T)");
        NoGradGuard ng;
        Tensor z0 = tokens.detach().clone();
        for (float& v : *z0.data) v /= ctx.latent_scale;
        Rng rng(hash_combine(seed, 0x5de0ULL));
        Tensor noise = Tensor::randn(z0.shape, rng);
        Tensor z = q_sample(z0, t_star, noise, ctx.schedule);
        Tensor img_tokens = encode_image_tokens(render, base.image_tokenizer);
        Tensor empty_img = Tensor::zeros({0, base.dim});
        // strided subset of [0, t_star], descending, ends at t = 0
        std::vector<int> ts;
        const int steps = std::min(sample_steps, t_star + 1);
        for (int i = steps - 1; i >= 0; --i) {
            const int t = int((int64_t(i) * int64_t(t_star)) / int64_t(std::max(1, steps - 1)));
            if (ts.empty() || ts.back() != t) ts.push_back(t);
        }
        constexpr float x0_clamp = 6.0f;
        for (size_t i = 0; i < ts.size(); ++i) {
            const int t = ts[i];
            const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : -1;
            auto denoise = [&](bool with_image) {
                return dit_denoise(assemble_input(z, Tensor::zeros({0, base.dim}),
                                                  with_image ? img_tokens : empty_img, float(t)),
                                   base);
            };
            Tensor v = denoise(true);
            if (cfg_scale != 1.0f) v = cfg_combine(v, denoise(false), cfg_scale);
            Tensor x0 = v_convert(VConvert::ToX0, z, v, t, ctx.schedule);
            for (float& x : *x0.data) x = std::clamp(x, -x0_clamp, x0_clamp);
            if (t_prev < 0) {
                z = x0;
                break;
            }
            const float abar_t = ctx.schedule.alpha_bars[size_t(t)];
            const float abar_prev = ctx.schedule.alpha_bars[size_t(t_prev)];
            const float alpha_eff = abar_t / abar_prev;
            const float beta_eff = 1.0f - alpha_eff;
            const float var = beta_eff * (1.0f - abar_prev) / (1.0f - abar_t);
            const float c_x0 = std::sqrt(abar_prev) * beta_eff / (1.0f - abar_t);
            const float c_zt = std::sqrt(alpha_eff) * (1.0f - abar_prev) / (1.0f - abar_t);
            const float sigma = std::sqrt(std::max(var, 0.0f));
            Tensor next = Tensor::zeros(z.shape);
            for (size_t j = 0; j < next.numel(); ++j)
                (*next.data)[j] = c_zt * (*z.data)[j] + c_x0 * (*x0.data)[j] + sigma * rng.normal();
            z = next;
        }
        for (float& v : *z.data) v *= ctx.latent_scale;
        return z;
    };
}

// ---------------------------------------------------------------------------
// dataset generation recipe
// ---------------------------------------------------------------------------

struct GenDataResult {
    int written = 0;
    int dropped = 0;
    uint64_t manifest_hash = 0;
};

// Writes count samples under out_dir plus a manifest.jsonl. Enhance scenes
// are shared by k^2 consecutive samples; every sample remains replayable
// from (seed, index).
inline GenDataResult gen_data(const std::string& task, int count, uint64_t seed, const fs::path& out_dir,
                              TripletParams params, std::ostream& log_stream = std::cerr) {
    fs::create_directories(out_dir);
    GenDataResult result;
    std::vector<std::string> manifest_lines;
    manifest_lines.resize(size_t(count));
    std::vector<int> status(size_t(count), 0);  // 1 = written, -1 = dropped
    const int slots = params.grid_k * params.grid_k;

    auto emit = [&](int64_t i, TrainingTriplet& t, uint64_t sample_seed) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05d", int(i));
        write_triplet(t, out_dir / name);
        nlohmann::json entry{{"index", int(i)},          {"path", name},
                             {"task", task},             {"seed", sample_seed},
                             {"points", t.target.size()}, {"condition_points", t.condition.size()}};
        manifest_lines[size_t(i)] = entry.dump();
        status[size_t(i)] = 1;
    };
    auto drop = [&](int64_t i, const std::string& reason) {
        manifest_lines[size_t(i)] =
            nlohmann::json{{"index", int(i)}, {"dropped", true}, {"reason", reason}}.dump();
        status[size_t(i)] = -1;
    };

    if (task == "enhance") {
        // one scene feeds k^2 consecutive samples; each sample stays
        // replayable from (seed, index) because the scene seed is a pure
        // function of the sample index
        const int64_t scene_count = (count + slots - 1) / slots;
        parallel_for(scene_count, [&](int64_t lo, int64_t hi) {
            for (int64_t s = lo; s < hi; ++s) {
                const uint64_t scene_seed = hash_combine(seed, uint64_t(s), 500);
                std::vector<ShapeSpec> members;
                for (int m = 0; m < slots; ++m)
                    members.push_back(sample_primitive_shape(hash_combine(scene_seed, 300 + m)));
                std::optional<DegradeResult> degraded;
                std::string scene_error;
                try {
                    const GridScene scene = compose_grid_scene(members, params.grid_k);
                    degraded = degrade_scene(scene, *params.ae, params.scene_tokens, params.mode,
                                             params.sdedit, params.t_star, hash_combine(scene_seed, 4));
                } catch (const std::exception& e) {
                    scene_error = e.what();
                }
                for (int slot = 0; slot < slots; ++slot) {
                    const int64_t i = s * slots + slot;
                    if (i >= count) break;
                    const uint64_t sample_seed = hash_combine(seed, uint64_t(i));
                    try {
                        check(scene_error.empty(), "scene failed: " + scene_error);
                        check(degraded->per_slot[size_t(slot)].has_value(),
                              "dropped: " + degraded->drop_reasons[size_t(slot)]);
                        TrainingTriplet t;
                        t.task = task;
                        t.target_shape = members[size_t(slot)];
                        t.target = sample_surface(t.target_shape, params.n_points, hash_combine(sample_seed, 3));
                        t.condition = augment_condition_cloud(*degraded->per_slot[size_t(slot)],
                                                              hash_combine(sample_seed, 5));
                        Rng rng(hash_combine(sample_seed, 0x7713ULL));
                        t.meta["task"] = task;
                        t.meta["seed"] = sample_seed;
                        t.meta["k"] = params.grid_k;
                        t.meta["slot"] = slot;
                        t.meta["t_star"] = params.t_star;
                        t.meta["mode"] = params.mode == DegradeMode::Bottleneck ? "bottleneck" : "sdedit";
                        t.image = augment_image(render_target_image(t.target_shape, rng, params.image_size,
                                                                    &t.meta),
                                                hash_combine(sample_seed, 10));
                        t.meta["shape"] = shape_to_json(t.target_shape);
                        emit(i, t, sample_seed);
                    } catch (const std::exception& e) {
                        drop(i, e.what());
                    }
                }
            }
        }, 1);
    } else {
        parallel_for(count, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const uint64_t sample_seed = hash_combine(seed, uint64_t(i));
                try {
                    const ShapeSpec shape = sample_primitive_shape(hash_combine(seed, uint64_t(i), 500));
                    TrainingTriplet t = build_triplet(task, shape, params, sample_seed);
                    emit(i, t, sample_seed);
                } catch (const std::exception& e) {
                    drop(i, e.what());
                }
            }
        }, 1);
    }
    std::ofstream manifest(out_dir / "manifest.jsonl");
    check(manifest.good(), "gen_data: cannot open manifest");
    for (const auto& line : manifest_lines) manifest << line << "\n";
    manifest.close();
    for (int s : status) {
        if (s == 1) ++result.written;
        if (s == -1) ++result.dropped;
    }
    if (result.dropped > 0) log_stream << "gen-data: dropped " << result.dropped << " samples\n";
    result.manifest_hash = file_hash(out_dir / "manifest.jsonl");
    return result;
}

inline std::vector<TrainingTriplet> load_dataset(const fs::path& dir) {
    check(fs::exists(dir / "manifest.jsonl"), "load_dataset: missing manifest in " + dir.string());
    std::ifstream manifest(dir / "manifest.jsonl");
    std::vector<TrainingTriplet> out;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("dropped", false)) continue;
        out.push_back(read_triplet(dir / j.at("path").get<std::string>()));
    }
    check(!out.empty(), "load_dataset: no usable samples in " + dir.string());
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint wrappers for the two model kinds
// ---------------------------------------------------------------------------

inline void save_ae_checkpoint(VecSetAE& ae, const RunConfig& cfg, const std::string& path) {
    ParamMap params = ae.params();
    save_checkpoint(params, cfg, path,
                    {{"model", "vecset_ae"}, {"variational", ae.variational}});
}

inline VecSetAE load_ae_checkpoint(const std::string& path, RunConfig* cfg_out = nullptr) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    check(ck.extra.value("model", "") == "vecset_ae", "not an autoencoder checkpoint: " + path);
    Rng rng(0);
    VecSetAE ae(ck.config.dim, ck.config.heads, rng, ck.extra.value("variational", false));
    ParamMap params = ae.params();
    ck.read_all(params);
    if (cfg_out) *cfg_out = ck.config;
    return ae;
}

inline void save_dit_checkpoint(DitModel& model, const RunConfig& cfg, float latent_scale,
                                const std::string& path) {
    ParamMap params = model.params();
    save_checkpoint(params, cfg, path,
                    {{"model", "dit"},
                     {"latent_scale", latent_scale},
                     {"variant", variant_name(model.variant)},
                     {"parameterization", parameterization_name(model.parameterization)}});
}

inline DitModel load_dit_checkpoint(const std::string& path, float* latent_scale_out,
                                    RunConfig* cfg_out = nullptr) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    check(ck.extra.value("model", "") == "dit", "not a denoiser checkpoint: " + path);
    Rng rng(0);
    DitModel model(ck.config.dim, ck.config.heads, ck.config.layers,
                   variant_from_name(ck.extra.value("variant", "concat")), ck.config.c, rng);
    model.parameterization = parameterization_from_name(ck.extra.value("parameterization", "ddpm_v"));
    ParamMap params = model.params();
    ck.read_all(params);
    if (latent_scale_out) *latent_scale_out = ck.extra.value("latent_scale", 1.0f);
    if (cfg_out) *cfg_out = ck.config;
    return model;
}

// ---------------------------------------------------------------------------
// regen recipe: condition + image -> mesh + cloud
// ---------------------------------------------------------------------------

struct RegenInputs {
    OrientedPointCloud condition;
    std::optional<EditMask> mask;
    Image image;
    bool has_image = false;
    uint64_t seed = 0;
    int mesh_resolution = 64;
};

struct RegenOutputs {
    TriangleMesh mesh;
    OrientedPointCloud cloud;
};

inline RegenOutputs run_regen(const VecSetAE& ae, const DitModel& model, const DitTrainContext& ctx,
                              const RunConfig& cfg, const RegenInputs& in) {
    ConditionBundle bundle;
    if (model.parameterization == Parameterization::Flow) {
        LatentSet zl = ae.encode(in.condition, cfg.k);
        bundle.tokens = zl.tokens;
        for (float& v : *bundle.tokens.data) v /= ctx.latent_scale;
        bundle.anchors = zl.anchors;
    } else if (in.mask.has_value()) {
        bundle = build_edit_condition(in.condition, *in.mask, cfg.c, cfg.k_min, ae, model.conditioner,
                                      hash_combine(in.seed, 21));
    } else {
        LatentSet zl = ae.encode(in.condition, cfg.c);
        bundle.tokens = zl.tokens;
        bundle.anchors = zl.anchors;
    }
    const LatentSet z =
        sample_regen_latents(model, bundle, in.has_image ? &in.image : nullptr, ctx, cfg, in.seed);
    RegenOutputs out;
    out.mesh = ae.extract_mesh(z, in.mesh_resolution);
    if (!out.mesh.empty())
        out.cloud = sample_mesh_surface(out.mesh, 10000, hash_combine(in.seed, 22));
    return out;
}

// ---------------------------------------------------------------------------
// eval recipe: paired directories -> MetricReport
// ---------------------------------------------------------------------------

inline std::vector<Vec3> eval_points_for(const fs::path& path, int n, uint64_t seed) {
    if (path.extension() == ".ply") {
        OrientedPointCloud c = read_ply(path.string());
        if (int(c.size()) > n) {
            Rng rng(hash_combine(seed, 31));
            std::vector<Vec3> pts;
            for (int i = 0; i < n; ++i) pts.push_back(c.points[rng.uniform_index(c.size())]);
            return pts;
        }
        return c.points;
    }
    if (path.extension() == ".obj") {
        const TriangleMesh m = read_obj(path.string());
        return sample_mesh_surface(m, n, seed).points;
    }
    throw std::runtime_error("eval: unsupported geometry file " + path.string());
}

// mesh occupancy on a voxel grid via per-column ray parity
inline std::vector<bool> mesh_occupancy(const TriangleMesh& mesh, int resolution) {
    std::vector<bool> occ(size_t(resolution) * resolution * resolution, false);
    const float step = 2.0f / float(resolution);
    parallel_for(int64_t(resolution) * resolution, [&](int64_t lo, int64_t hi) {
        for (int64_t xy = lo; xy < hi; ++xy) {
            const int x = int(xy % resolution), y = int(xy / resolution);
            const float px = -1.0f + step * (float(x) + 0.5f);
            const float py = -1.0f + step * (float(y) + 0.5f);
            std::vector<float> crossings;
            for (const auto& tri : mesh.triangles) {
                const Vec3& a = mesh.vertices[size_t(tri[0])];
                const Vec3& b = mesh.vertices[size_t(tri[1])];
                const Vec3& c = mesh.vertices[size_t(tri[2])];
                // ray along +z at (px, py): 2D point-in-triangle then z by plane
                const float d1 = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
                const float d2 = (c.x - b.x) * (py - b.y) - (c.y - b.y) * (px - b.x);
                const float d3 = (a.x - c.x) * (py - c.y) - (a.y - c.y) * (px - c.x);
                const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
                const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
                if (neg && pos) continue;
                const Vec3 n = cross(b - a, c - a);
                if (std::fabs(n.z) < 1e-12f) continue;
                const float z = a.z - (n.x * (px - a.x) + n.y * (py - a.y)) / n.z;
                crossings.push_back(z);
            }
            std::sort(crossings.begin(), crossings.end());
            for (int zi = 0; zi < resolution; ++zi) {
                const float pz = -1.0f + step * (float(zi) + 0.5f);
                size_t below = std::lower_bound(crossings.begin(), crossings.end(), pz) - crossings.begin();
                if (below % 2 == 1)
                    occ[(size_t(zi) * resolution + size_t(y)) * resolution + size_t(x)] = true;
            }
        }
    }, 64);
    return occ;
}

// ---------------------------------------------------------------------------
// ablation grid: conditioning variants (Table-3 style) x parameterizations
// (Table-4 style) on one fixed dataset
// ---------------------------------------------------------------------------

struct AblateRow {
    std::string variant;
    std::string parameterization;
    uint64_t seed = 0;
    double cd = 0;
    double fscore = 0;
    uint64_t dataset_hash = 0;
};

struct AblateResult {
    std::vector<AblateRow> rows;

    std::string to_csv() const {
        std::string out = "variant,parameterization,seed,cd,fscore,dataset_hash\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%.6g,%.6g,%s\n", r.variant.c_str(),
                          r.parameterization.c_str(), (unsigned long long)r.seed, r.cd, r.fscore,
                          hex64(r.dataset_hash).c_str());
            out += buf;
        }
        return out;
    }
};

// One trained row of the grid, evaluated by regenerating every val triplet.
inline AblateRow ablate_row(const VecSetAE& ae, const std::vector<TrainingTriplet>& train_set,
                            const std::vector<TrainingTriplet>& val_set, RunConfig cfg,
                            ConditioningVariant variant, Parameterization param, uint64_t seed,
                            uint64_t dataset_hash, RunLog& log) {
    cfg.seed = seed;
    cfg.variant = param == Parameterization::Flow ? "flow_start" : variant_name(variant);
    cfg.parameterization = parameterization_name(param);
    Rng init_rng(hash_combine(seed, 0xab1aULL));
    DitModel model(cfg.dim, cfg.heads, cfg.layers, variant, cfg.c, init_rng);
    model.parameterization = param;
    const LatentDataset ds = encode_triplets(train_set, ae, model, cfg);
    DitTrainContext ctx;
    ctx.schedule = make_schedule(cfg.t, cfg.beta_start, cfg.beta_end);
    ctx.latent_scale = ds.latent_scale;
    train_dit(model, ds, cfg, ctx, log);

    AblateRow row;
    row.variant = cfg.variant;
    row.parameterization = cfg.parameterization;
    row.seed = seed;
    row.dataset_hash = dataset_hash;
    double cd_sum = 0, f_sum = 0;
    int n = 0;
    for (size_t i = 0; i < val_set.size(); ++i) {
        const TrainingTriplet& t = val_set[i];
        RegenInputs in;
        in.condition = t.condition;
        in.image = t.image;
        in.has_image = true;
        in.seed = hash_combine(seed, i, 0xea17ULL);
        in.mesh_resolution = 48;
        const RegenOutputs out = run_regen(ae, model, ctx, cfg, in);
        if (out.mesh.empty()) {
            cd_sum += 1.0;  // empty output scored as a unit-scale miss
            f_sum += 0.0;
        } else {
            std::vector<Vec3> gt;
            Rng pick(hash_combine(seed, i, 41));
            for (int j = 0; j < 4096; ++j) gt.push_back(t.target.points[pick.uniform_index(t.target.size())]);
            cd_sum += chamfer_distance(out.cloud.points, gt);
            f_sum += fscore(out.cloud.points, gt);
        }
        ++n;
    }
    row.cd = cd_sum / std::max(1, n);
    row.fscore = f_sum / std::max(1, n);
    return row;
}

// Full grid: every conditioning variant under ddpm_v plus the rectified-flow
// baseline row (flow consumes the coarse latent as its start point, so the
// variant wiring does not apply to it).
inline AblateResult run_ablate(const VecSetAE& ae, const fs::path& train_dir, const fs::path& val_dir,
                               const RunConfig& base, int n_seeds, RunLog& log) {
    check(base.c == base.k, "ablate: the grid includes the additive variant, which needs tokens.c == tokens.k");
    const std::vector<TrainingTriplet> train_set = load_dataset(train_dir);
    const std::vector<TrainingTriplet> val_set = load_dataset(val_dir);
    const uint64_t dataset_hash =
        hash_combine(file_hash(train_dir / "manifest.jsonl"), file_hash(val_dir / "manifest.jsonl"));
    AblateResult result;
    const ConditioningVariant variants[4] = {ConditioningVariant::Concat, ConditioningVariant::AdditionalCA,
                                             ConditioningVariant::ExtendedCA, ConditioningVariant::Additive};
    for (int s = 0; s < n_seeds; ++s) {
        for (const ConditioningVariant v : variants) {
            log.note(std::string("ablate: ") + variant_name(v) + " ddpm_v seed " + std::to_string(s));
            result.rows.push_back(ablate_row(ae, train_set, val_set, base, v, Parameterization::DdpmV,
                                             base.seed + uint64_t(s), dataset_hash, log));
        }
        log.note("ablate: flow seed " + std::to_string(s));
        result.rows.push_back(ablate_row(ae, train_set, val_set, base, ConditioningVariant::Concat,
                                         Parameterization::Flow, base.seed + uint64_t(s), dataset_hash,
                                         log));
    }
    return result;
}

inline MetricReport eval_directories(const fs::path& pred_dir, const fs::path& gt_dir, int eval_points,
                                     int voxel_res) {
    check(fs::is_directory(pred_dir), "eval: pred is not a directory: " + pred_dir.string());
    check(fs::is_directory(gt_dir), "eval: gt is not a directory: " + gt_dir.string());
    MetricReport report;
    report.eval_points = eval_points;
    report.voxel_resolution = voxel_res;
    std::vector<std::string> stems;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.path().extension() == ".ply" || e.path().extension() == ".obj") {
            const std::string stem = e.path().stem().string();
            if (std::find(stems.begin(), stems.end(), stem) == stems.end()) stems.push_back(stem);
        }
    }
    std::sort(stems.begin(), stems.end());
    check(!stems.empty(), "eval: no .ply/.obj geometry in " + gt_dir.string());
    for (const auto& stem : stems) {
        MetricSample s;
        s.id = stem;
        auto pick = [](const fs::path& dir, const std::string& stem) -> std::optional<fs::path> {
            for (const char* ext : {".ply", ".obj"}) {
                const fs::path p = dir / (stem + ext);
                if (fs::exists(p)) return p;
            }
            return std::nullopt;
        };
        const auto gt_geo = pick(gt_dir, stem);
        const auto pred_geo = pick(pred_dir, stem);
        if (gt_geo && pred_geo) {
            // one shared subsampling stream: identical inputs stay identical
            const std::vector<Vec3> a = eval_points_for(*pred_geo, eval_points, 1001);
            const std::vector<Vec3> b = eval_points_for(*gt_geo, eval_points, 1001);
            s.cd = chamfer_distance(a, b);
            s.fscore = fscore(a, b, report.tau);
        }
        const fs::path gt_obj = gt_dir / (stem + ".obj");
        const fs::path pred_obj = pred_dir / (stem + ".obj");
        if (fs::exists(gt_obj) && fs::exists(pred_obj)) {
            const auto occ_a = mesh_occupancy(read_obj(pred_obj.string()), voxel_res);
            const auto occ_b = mesh_occupancy(read_obj(gt_obj.string()), voxel_res);
            size_t inter = 0, uni = 0;
            for (size_t i = 0; i < occ_a.size(); ++i) {
                inter += (occ_a[i] && occ_b[i]) ? 1 : 0;
                uni += (occ_a[i] || occ_b[i]) ? 1 : 0;
            }
            s.iou = uni ? double(inter) / double(uni) : 1.0;
        }
        const fs::path gt_png = gt_dir / (stem + "_normal.png");
        const fs::path pred_png = pred_dir / (stem + "_normal.png");
        if (fs::exists(gt_png) && fs::exists(pred_png))
            s.psnr = normal_psnr(load_png(pred_png.string()), load_png(gt_png.string()));
        report.samples.push_back(s);
    }
    return report;
}

}  // namespace regen3d
