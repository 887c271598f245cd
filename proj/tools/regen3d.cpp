#include <CLI11.hpp>

#include <iostream>

#include "regen3d/pipeline.hpp"

namespace {

using namespace regen3d;

RunConfig config_from_flags(const std::string& config_path) {
    if (config_path.empty()) {
        RunConfig cfg;
        cfg.validate();
        return cfg;
    }
    return load_config(config_path);
}

int cmd_gen_data(const std::string& task, int count, uint64_t seed, const std::string& out,
                 const std::string& ae_path, int grid_k, const std::string& mode,
                 const std::string& base_dit_path) {
    TripletParams params;
    params.grid_k = grid_k;
    params.mode = mode == "sdedit" ? DegradeMode::Sdedit : DegradeMode::Bottleneck;
    VecSetAE ae;
    RunConfig ae_cfg;
    DitModel base;
    DitTrainContext base_ctx;
    RunConfig base_cfg;
    if (task == "enhance") {
        check(!ae_path.empty(), "gen-data --task enhance requires --ae <checkpoint>");
        ae = load_ae_checkpoint(ae_path, &ae_cfg);
        params.ae = &ae;
        params.scene_tokens = ae_cfg.k;
        if (params.mode == DegradeMode::Sdedit) {
            check(!base_dit_path.empty(), "gen-data --mode sdedit requires --dit <base generator>");
            float scale = 1.0f;
            base = load_dit_checkpoint(base_dit_path, &scale, &base_cfg);
            base_ctx.schedule = make_schedule(base_cfg.t, base_cfg.beta_start, base_cfg.beta_end);
            base_ctx.latent_scale = scale;
            params.t_star = base_cfg.t_star;
            params.sdedit = make_sdedit_fn(base, base_ctx, base_cfg.sample_steps, 1.0f, seed);
        }
    }
    DirLock lock(out);
    const GenDataResult r = gen_data(task, count, seed, out, params);
    std::cout << nlohmann::json{{"written", r.written},
                                {"dropped", r.dropped},
                                {"manifest_hash", hex64(r.manifest_hash)}}
                     .dump(2)
              << "\n";
    return 0;
}

int cmd_train_ae(const std::string& config_path, const std::string& out_path, int corpus_count) {
    RunConfig cfg = config_from_flags(config_path);
    const fs::path out(out_path);
    const fs::path out_parent = out.parent_path().empty() ? "." : out.parent_path();
    fs::create_directories(out_parent);
    DirLock lock(out_parent);
    RunLog log(out_path + ".log.jsonl");
    log.config(cfg.to_json());
    Rng rng(hash_combine(cfg.seed, 0x9a11ULL));
    VecSetAE ae(cfg.dim, cfg.heads, rng);
    const AeCorpus corpus = make_ae_corpus(corpus_count, hash_combine(cfg.seed, 0xc0deULL));
    const AeTrainResult r = train_ae(ae, corpus, cfg, log);
    save_ae_checkpoint(ae, cfg, out_path);
    std::cout << nlohmann::json{{"final_loss", r.final_loss}, {"rejected_steps", r.rejected_steps}}.dump(2)
              << "\n";
    return 0;
}

int cmd_train_dit(const std::string& config_path, const std::string& variant,
                  const std::string& parameterization, const std::string& data_dir,
                  const std::string& ae_path, const std::string& out_path) {
    RunConfig cfg = config_from_flags(config_path);
    if (!variant.empty()) cfg.variant = variant;
    if (!parameterization.empty()) cfg.parameterization = parameterization;
    if (!data_dir.empty()) cfg.dataset = data_dir;
    check(!cfg.dataset.empty(), "train-dit: --data (or data.dataset in the config) is required");
    cfg.validate();
    const fs::path out_parent = fs::path(out_path).parent_path();
    DirLock lock(out_parent.empty() ? "." : out_parent);
    RunLog log(out_path + ".log.jsonl");
    log.config(cfg.to_json());
    RunConfig ae_cfg;
    VecSetAE ae = load_ae_checkpoint(ae_path, &ae_cfg);
    check(ae_cfg.dim == cfg.dim, "train-dit: autoencoder dim does not match config model.dim");
    const std::vector<TrainingTriplet> triplets = load_dataset(cfg.dataset);
    const uint64_t data_hash = file_hash(fs::path(cfg.dataset) / "manifest.jsonl");
    log.note("dataset_hash=" + hex64(data_hash));
    Rng rng(hash_combine(cfg.seed, 0xd1dULL));
    DitModel model(cfg.dim, cfg.heads, cfg.layers, variant_from_name(cfg.variant == "flow_start" ? "concat" : cfg.variant),
                   cfg.c, rng);
    model.parameterization = parameterization_from_name(cfg.parameterization);
    const LatentDataset ds = encode_triplets(triplets, ae, model, cfg);
    DitTrainContext ctx;
    ctx.schedule = make_schedule(cfg.t, cfg.beta_start, cfg.beta_end);
    ctx.latent_scale = ds.latent_scale;
    train_dit(model, ds, cfg, ctx, log);
    save_dit_checkpoint(model, cfg, ds.latent_scale, out_path);
    std::cout << nlohmann::json{{"latent_scale", ds.latent_scale}, {"samples", ds.items.size()}}.dump(2)
              << "\n";
    return 0;
}

int cmd_regen(const std::string& task, const std::string& ae_path, const std::string& dit_path,
              const std::string& condition_path, const std::string& image_path,
              const std::string& mask_path, const std::string& out_prefix, uint64_t seed, int steps,
              float cfg_scale, int mesh_res) {
    VecSetAE ae = load_ae_checkpoint(ae_path);
    float latent_scale = 1.0f;
    RunConfig cfg;
    DitModel model = load_dit_checkpoint(dit_path, &latent_scale, &cfg);
    if (steps > 0) cfg.sample_steps = steps;
    if (cfg_scale >= 0) cfg.cfg_scale = cfg_scale;
    DitTrainContext ctx;
    ctx.schedule = make_schedule(cfg.t, cfg.beta_start, cfg.beta_end);
    ctx.latent_scale = latent_scale;

    RegenInputs in;
    const fs::path cond(condition_path);
    if (cond.extension() == ".ply") {
        in.condition = read_ply(condition_path);
    } else if (cond.extension() == ".obj") {
        in.condition = sample_mesh_surface(read_obj(condition_path), 4096, hash_combine(seed, 51));
    } else {
        throw std::runtime_error("regen: condition must be a .ply cloud or .obj mesh");
    }
    if (!image_path.empty()) {
        in.image = load_png(image_path);
        in.has_image = true;
    }
    if (task == "edit") {
        check(!mask_path.empty(), "regen --task edit requires --mask <json>");
        std::ifstream mf(mask_path);
        check(mf.good(), "regen: cannot open mask " + mask_path);
        nlohmann::json j;
        mf >> j;
        EditMask mask = mask_from_json(j);
        if (mask.masked_fraction <= 0) mask.masked_fraction = mask.count_fraction(in.condition.points);
        // condition cloud may still contain in-mask points; strip them
        OrientedPointCloud stripped;
        for (size_t i = 0; i < in.condition.size(); ++i)
            if (!mask.contains(in.condition.points[i])) {
                stripped.points.push_back(in.condition.points[i]);
                stripped.normals.push_back(in.condition.normals[i]);
            }
        check(!stripped.empty(), "regen: mask removes the whole condition cloud");
        in.condition = std::move(stripped);
        in.mask = mask;
    }
    in.seed = seed;
    in.mesh_resolution = mesh_res;
    const RegenOutputs out = run_regen(ae, model, ctx, cfg, in);
    check(!out.mesh.empty(), "regen: sampler produced an empty iso-surface");
    write_obj(out.mesh, out_prefix + ".obj");
    write_ply(out.cloud, out_prefix + ".ply");
    std::cout << nlohmann::json{{"mesh", out_prefix + ".obj"},
                                {"cloud", out_prefix + ".ply"},
                                {"vertices", out.mesh.vertices.size()},
                                {"triangles", out.mesh.triangles.size()}}
                     .dump(2)
              << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out_json,
             const std::string& out_csv, int points, int voxel_res) {
    const MetricReport report = eval_directories(pred, gt, points, voxel_res);
    const nlohmann::json j = report.to_json();
    if (!out_json.empty()) {
        std::ofstream f(out_json);
        f << j.dump(2) << "\n";
    }
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        f << "id,cd,fscore,iou,psnr\n";
        for (const auto& s : report.samples) {
            auto cell = [](const std::optional<double>& v) {
                if (!v) return std::string();
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.6g", *v);
                return std::string(buf);
            };
            f << s.id << "," << cell(s.cd) << "," << cell(s.fscore) << "," << cell(s.iou) << ","
              << cell(s.psnr) << "\n";
        }
    }
    // aligned table
    std::printf("%-20s %10s %10s %10s %10s\n", "sample", "cd", "fscore", "iou", "psnr");
    auto cell = [](const std::optional<double>& v) {
        char buf[40];
        if (v)
            std::snprintf(buf, sizeof(buf), "%10.4f", *v);
        else
            std::snprintf(buf, sizeof(buf), "%10s", "-");
        return std::string(buf);
    };
    for (const auto& s : report.samples)
        std::printf("%-20s %s %s %s %s\n", s.id.c_str(), cell(s.cd).c_str(), cell(s.fscore).c_str(),
                    cell(s.iou).c_str(), cell(s.psnr).c_str());
    MetricSample agg;
    agg.id = "mean";
    agg.cd = report.aggregate(&MetricSample::cd);
    agg.fscore = report.aggregate(&MetricSample::fscore);
    agg.iou = report.aggregate(&MetricSample::iou);
    agg.psnr = report.aggregate(&MetricSample::psnr);
    std::printf("%-20s %s %s %s %s\n", agg.id.c_str(), cell(agg.cd).c_str(), cell(agg.fscore).c_str(),
                cell(agg.iou).c_str(), cell(agg.psnr).c_str());
    std::cout << j["aggregate"].dump() << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& ae_path, const std::string& train_dir,
               const std::string& val_dir, const std::string& out_csv, int seeds) {
    RunConfig cfg = config_from_flags(config_path);
    VecSetAE ae = load_ae_checkpoint(ae_path);
    RunLog log(out_csv + ".log.jsonl");
    log.config(cfg.to_json());
    const AblateResult result = run_ablate(ae, train_dir, val_dir, cfg, seeds, log);
    std::ofstream f(out_csv);
    check(f.good(), "ablate: cannot open " + out_csv);
    f << result.to_csv();
    std::cout << result.to_csv();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D shape regeneration toolkit: set-latent autoencoder + conditional latent diffusion"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate task triplets into a dataset directory");
    std::string gen_task, gen_out, gen_ae, gen_mode = "bottleneck";
    int gen_count = 10, gen_k = 2;
    uint64_t gen_seed = 0;
    gen->add_option("--task", gen_task, "enhance | reconstruct | edit")->required();
    gen->add_option("--count", gen_count, "number of samples")->required();
    gen->add_option("--seed", gen_seed, "global seed")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--ae", gen_ae, "autoencoder checkpoint (enhance)");
    gen->add_option("--grid-k", gen_k, "grid size for enhance (2 or 3)");
    gen->add_option("--mode", gen_mode, "bottleneck | sdedit degradation");
    std::string gen_dit;
    gen->add_option("--dit", gen_dit, "base generator checkpoint (sdedit mode)");

    // train-ae
    auto* tae = app.add_subcommand("train-ae", "train the set-latent shape autoencoder");
    std::string tae_config, tae_out = "ae.ckpt";
    int tae_corpus = 200;
    tae->add_option("--config", tae_config, "run config file");
    tae->add_option("--out", tae_out, "checkpoint output path");
    tae->add_option("--corpus", tae_corpus, "procedural corpus size");

    // train-dit
    auto* tdit = app.add_subcommand("train-dit", "train the conditional denoiser");
    std::string tdit_config, tdit_variant, tdit_param, tdit_data, tdit_ae, tdit_out = "dit.ckpt";
    tdit->add_option("--config", tdit_config, "run config file");
    tdit->add_option("--variant", tdit_variant, "concat | additional_ca | extended_ca | additive");
    tdit->add_option("--parameterization", tdit_param, "ddpm_v | flow");
    tdit->add_option("--data", tdit_data, "triplet dataset directory");
    tdit->add_option("--ae", tdit_ae, "autoencoder checkpoint")->required();
    tdit->add_option("--out", tdit_out, "checkpoint output path");

    // regen
    auto* rg = app.add_subcommand("regen", "regenerate a shape from a condition (+ image)");
    std::string rg_task = "enhance", rg_ae, rg_dit, rg_cond, rg_img, rg_mask, rg_out = "regen_out";
    uint64_t rg_seed = 0;
    int rg_steps = -1, rg_res = 64;
    float rg_cfg = -1;
    rg->add_option("--task", rg_task, "enhance | reconstruct | edit");
    rg->add_option("--ae", rg_ae, "autoencoder checkpoint")->required();
    rg->add_option("--dit", rg_dit, "denoiser checkpoint")->required();
    rg->add_option("--condition", rg_cond, "condition geometry (.ply or .obj)")->required();
    rg->add_option("--image", rg_img, "conditioning image (.png)");
    rg->add_option("--mask", rg_mask, "edit mask (.json)");
    rg->add_option("--out", rg_out, "output prefix (.obj/.ply appended)");
    rg->add_option("--seed", rg_seed, "sampler seed");
    rg->add_option("--steps", rg_steps, "sampling steps override");
    rg->add_option("--cfg", rg_cfg, "CFG scale override");
    rg->add_option("--resolution", rg_res, "mesh extraction resolution");

    // eval
    auto* ev = app.add_subcommand("eval", "geometric metrics between paired directories");
    std::string ev_pred, ev_gt, ev_json = "metrics.json", ev_csv = "metrics.csv";
    int ev_points = 10000, ev_res = 64;
    ev->add_option("--pred", ev_pred, "prediction directory")->required();
    ev->add_option("--gt", ev_gt, "ground-truth directory")->required();
    ev->add_option("--json", ev_json, "metric report JSON output");
    ev->add_option("--csv", ev_csv, "metric CSV output");
    ev->add_option("--points", ev_points, "evaluation points per cloud");
    ev->add_option("--voxel-res", ev_res, "voxel IoU resolution");

    // ablate
    auto* ab = app.add_subcommand("ablate", "run the conditioning/parameterization grid");
    std::string ab_config, ab_ae, ab_train, ab_val, ab_out = "ablate.csv";
    int ab_seeds = 1;
    ab->add_option("--config", ab_config, "run config file");
    ab->add_option("--ae", ab_ae, "autoencoder checkpoint")->required();
    ab->add_option("--train", ab_train, "training triplet directory")->required();
    ab->add_option("--val", ab_val, "validation triplet directory")->required();
    ab->add_option("--out", ab_out, "grid CSV output");
    ab->add_option("--seeds", ab_seeds, "seeds per row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_task, gen_count, gen_seed, gen_out, gen_ae, gen_k, gen_mode, gen_dit);
        if (tae->parsed()) return cmd_train_ae(tae_config, tae_out, tae_corpus);
        if (tdit->parsed())
            return cmd_train_dit(tdit_config, tdit_variant, tdit_param, tdit_data, tdit_ae, tdit_out);
        if (rg->parsed())
            return cmd_regen(rg_task, rg_ae, rg_dit, rg_cond, rg_img, rg_mask, rg_out, rg_seed, rg_steps,
                             rg_cfg, rg_res);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_json, ev_csv, ev_points, ev_res);
        if (ab->parsed()) return cmd_ablate(ab_config, ab_ae, ab_train, ab_val, ab_out, ab_seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
