#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "regen3d/core.hpp"

namespace regen3d {

// Run configuration. INI-style file with [section] headers and key = value
// lines; omitted keys take the documented defaults, unknown keys are a hard
// error (silent typos corrupt ablations).
struct RunConfig {
    // [run]
    std::string task;  // enhance | reconstruct | edit | generate
    std::string variant = "concat";
    std::string parameterization = "ddpm_v";
    // [model]
    int dim = 64;
    int layers = 4;
    int heads = 4;
    // [tokens]
    int k = 64;
    int c = 16;
    int k_min = 2;
    // [schedule]
    int t = 1000;
    float beta_start = 0.00085f;
    float beta_end = 0.0015f;
    int t_star = 350;
    // [training]
    float lr = 1e-4f;
    int steps = 2000;
    int batch = 4;
    float dropout = 0.1f;
    uint64_t seed = 0;
    // [sampling]
    int sample_steps = 100;
    float cfg_scale = 5.0f;
    // [data]
    std::string dataset;
    std::string val_dataset;
    std::string out_dir;

    void validate() const {
        check(dim >= 8 && dim <= 1024, "config: model.dim out of range [8,1024]");
        check(layers >= 1 && layers <= 24, "config: model.layers out of range [1,24]");
        check(heads >= 1 && dim % heads == 0, "config: model.heads must divide model.dim");
        check(k >= 1 && c >= 1, "config: tokens.k and tokens.c must be positive");
        check(k_min >= 0 && k_min < c, "config: tokens.k_min must be in [0, c)");
        check(t >= 2 && t <= 100000, "config: schedule.t out of range");
        check(beta_start > 0 && beta_start <= beta_end && beta_end < 1,
              "config: schedule betas must satisfy 0 < start <= end < 1");
        check(t_star >= 1 && t_star < t, "config: schedule.t_star must be in [1, t)");
        check(lr > 0, "config: training.lr must be positive");
        check(steps >= 1, "config: training.steps must be positive");
        check(batch >= 1, "config: training.batch must be positive");
        check(dropout >= 0 && dropout <= 1, "config: training.dropout must be in [0,1]");
        check(sample_steps >= 1 && sample_steps <= t, "config: sampling.steps must be in [1, t]");
        check(cfg_scale >= 0, "config: sampling.cfg_scale must be non-negative");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"run", {{"task", task}, {"variant", variant}, {"parameterization", parameterization}}},
            {"model", {{"dim", dim}, {"layers", layers}, {"heads", heads}}},
            {"tokens", {{"k", k}, {"c", c}, {"k_min", k_min}}},
            {"schedule",
             {{"t", t}, {"beta_start", beta_start}, {"beta_end", beta_end}, {"t_star", t_star}}},
            {"training",
             {{"lr", lr}, {"steps", steps}, {"batch", batch}, {"dropout", dropout}, {"seed", seed}}},
            {"sampling", {{"steps", sample_steps}, {"cfg_scale", cfg_scale}}},
            {"data", {{"dataset", dataset}, {"val_dataset", val_dataset}, {"out_dir", out_dir}}}};
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        c.task = j.at("run").value("task", "");
        c.variant = j.at("run").value("variant", "concat");
        c.parameterization = j.at("run").value("parameterization", "ddpm_v");
        c.dim = j.at("model").value("dim", 64);
        c.layers = j.at("model").value("layers", 4);
        c.heads = j.at("model").value("heads", 4);
        c.k = j.at("tokens").value("k", 64);
        c.c = j.at("tokens").value("c", 16);
        c.k_min = j.at("tokens").value("k_min", 2);
        c.t = j.at("schedule").value("t", 1000);
        c.beta_start = j.at("schedule").value("beta_start", 0.00085f);
        c.beta_end = j.at("schedule").value("beta_end", 0.0015f);
        c.t_star = j.at("schedule").value("t_star", 350);
        c.lr = j.at("training").value("lr", 1e-4f);
        c.steps = j.at("training").value("steps", 2000);
        c.batch = j.at("training").value("batch", 4);
        c.dropout = j.at("training").value("dropout", 0.1f);
        c.seed = j.at("training").value("seed", uint64_t(0));
        c.sample_steps = j.at("sampling").value("steps", 100);
        c.cfg_scale = j.at("sampling").value("cfg_scale", 5.0f);
        c.dataset = j.at("data").value("dataset", "");
        c.val_dataset = j.at("data").value("val_dataset", "");
        c.out_dir = j.at("data").value("out_dir", "");
        return c;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// Parse the INI-style config text. Errors name the offending key.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    auto fail = [&](const std::string& key, const std::string& why) {
        throw std::runtime_error("config: " + why + " at key '" + key + "' (line " +
                                 std::to_string(line_no) + ")");
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            check(s.back() == ']', "config: malformed section header at line " + std::to_string(line_no));
            section = detail::trim(s.substr(1, s.size() - 2));
            if (section != "run" && section != "model" && section != "tokens" && section != "schedule" &&
                section != "training" && section != "sampling" && section != "data")
                throw std::runtime_error("config: unknown section '" + section + "'");
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " + std::to_string(line_no));
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        const std::string full = section + "." + key;
        auto as_int = [&](int& dst) {
            try {
                size_t used = 0;
                dst = std::stoi(value, &used);
                if (used != value.size()) fail(full, "trailing characters in integer");
            } catch (const std::exception&) {
                fail(full, "invalid integer '" + value + "'");
            }
        };
        auto as_float = [&](float& dst) {
            try {
                size_t used = 0;
                dst = std::stof(value, &used);
                if (used != value.size()) fail(full, "trailing characters in number");
            } catch (const std::exception&) {
                fail(full, "invalid number '" + value + "'");
            }
        };
        if (full == "run.task") cfg.task = value;
        else if (full == "run.variant") cfg.variant = value;
        else if (full == "run.parameterization") cfg.parameterization = value;
        else if (full == "model.dim") as_int(cfg.dim);
        else if (full == "model.layers") as_int(cfg.layers);
        else if (full == "model.heads") as_int(cfg.heads);
        else if (full == "tokens.k") as_int(cfg.k);
        else if (full == "tokens.c") as_int(cfg.c);
        else if (full == "tokens.k_min") as_int(cfg.k_min);
        else if (full == "schedule.t") as_int(cfg.t);
        else if (full == "schedule.beta_start") as_float(cfg.beta_start);
        else if (full == "schedule.beta_end") as_float(cfg.beta_end);
        else if (full == "schedule.t_star") as_int(cfg.t_star);
        else if (full == "training.lr") as_float(cfg.lr);
        else if (full == "training.steps") as_int(cfg.steps);
        else if (full == "training.batch") as_int(cfg.batch);
        else if (full == "training.dropout") as_float(cfg.dropout);
        else if (full == "training.seed") {
            try {
                cfg.seed = std::stoull(value);
            } catch (const std::exception&) {
                fail(full, "invalid seed '" + value + "'");
            }
        } else if (full == "sampling.steps") as_int(cfg.sample_steps);
        else if (full == "sampling.cfg_scale") as_float(cfg.cfg_scale);
        else if (full == "data.dataset") cfg.dataset = value;
        else if (full == "data.val_dataset") cfg.val_dataset = value;
        else if (full == "data.out_dir") cfg.out_dir = value;
        else throw std::runtime_error("config: unknown key '" + full + "'");
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "load_config: cannot open " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace regen3d
