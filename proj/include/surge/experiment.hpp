#pragma once

// Experiment runner: strict flat key=value config with flag overrides, method
// dispatch (surge / bpf / enkf / kalman / guided_unweighted), scenario
// generation or loading, and CSV emission. Same config + seed gives
// byte-identical files regardless of thread count or output directory.

#include "surge/baselines.hpp"
#include "surge/io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace surge {

struct ExperimentConfig {
    std::string system = "linear_gaussian";  // or lorenz63
    std::string method = "surge";            // surge | bpf | enkf | kalman | guided_unweighted
    int n = 0;                               // particles; default 512 (linear) / 3 (lorenz)
    int k = 0;                               // internal steps; default 32 (linear) / 600 (lorenz)
    int t = 0;                               // assimilation steps; default 20 (linear) / 15 (lorenz)
    std::uint64_t seed = 0;                  // mandatory, no default
    double lambda = 1.0;
    std::string guidance = "likelihood";     // or doob (linear_gaussian only)
    std::string scheme = "systematic";       // or multinomial
    double threshold = -1.0;                 // default 0.5 (linear) / 0.75 (lorenz)
    std::string mode = "incremental";        // or whole_step
    bool resample_every_k = true;
    int threads = 1;
    std::string out_dir = ".";
    bool weight_trace = false;
    std::string scenario_path;               // load a stored scenario instead of generating
};

namespace detail {

inline bool parse_bool_str(const std::string& v, bool& out) {
    if (v == "true" || v == "1") { out = true; return true; }
    if (v == "false" || v == "0") { out = false; return true; }
    return false;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// Strict parse of flat `key = value` text plus flag overrides (flags win).
// All violations are collected and reported together.
inline ExperimentConfig validate_config(const std::string& raw_text,
                                        const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    std::vector<std::string> errors;
    std::map<std::string, std::string> kv;

    std::istringstream in(raw_text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            errors.push_back("line " + std::to_string(line_no) + ": empty key or value");
            continue;
        }
        if (kv.count(key)) errors.push_back("duplicate key '" + key + "'");
        kv[key] = value;
    }
    for (const auto& [key, value] : overrides) kv[key] = value;

    ExperimentConfig cfg;
    auto take = [&kv](const std::string& key, std::string& out) {
        auto it = kv.find(key);
        if (it == kv.end()) return false;
        out = it->second;
        kv.erase(it);
        return true;
    };
    auto take_int = [&](const std::string& key, int& out) {
        std::string v;
        if (!take(key, v)) return;
        try {
            std::size_t pos = 0;
            const long parsed = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            out = static_cast<int>(parsed);
        } catch (...) {
            errors.push_back(key + ": not an integer: '" + v + "'");
        }
    };
    auto take_double = [&](const std::string& key, double& out) {
        std::string v;
        if (!take(key, v)) return;
        try {
            std::size_t pos = 0;
            const double parsed = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            out = parsed;
        } catch (...) {
            errors.push_back(key + ": not a number: '" + v + "'");
        }
    };
    auto take_bool = [&](const std::string& key, bool& out) {
        std::string v;
        if (!take(key, v)) return;
        if (!detail::parse_bool_str(v, out)) errors.push_back(key + ": not a bool (true/false/1/0): '" + v + "'");
    };

    take(std::string("system"), cfg.system);
    take(std::string("method"), cfg.method);
    const bool lorenz = cfg.system == "lorenz63";
    cfg.n = lorenz ? 3 : 512;
    cfg.k = lorenz ? 600 : 32;
    cfg.t = lorenz ? 15 : 20;
    cfg.threshold = lorenz ? 0.75 : 0.5;

    bool have_seed = false;
    {
        std::string v;
        if (take("seed", v)) {
            try {
                std::size_t pos = 0;
                cfg.seed = std::stoull(v, &pos);
                if (pos != v.size()) throw std::invalid_argument(v);
                have_seed = true;
            } catch (...) {
                errors.push_back("seed: not an unsigned integer: '" + v + "'");
            }
        }
    }
    take_int("n", cfg.n);
    take_int("k", cfg.k);
    take_int("t", cfg.t);
    take_double("lambda", cfg.lambda);
    take(std::string("guidance"), cfg.guidance);
    take(std::string("scheme"), cfg.scheme);
    take_double("threshold", cfg.threshold);
    take(std::string("mode"), cfg.mode);
    take_bool("resample_every_k", cfg.resample_every_k);
    take_int("threads", cfg.threads);
    take(std::string("out_dir"), cfg.out_dir);
    take_bool("weight_trace", cfg.weight_trace);
    take(std::string("scenario"), cfg.scenario_path);

    for (const auto& [key, value] : kv) errors.push_back("unknown key '" + key + "'");

    if (cfg.system != "linear_gaussian" && cfg.system != "lorenz63")
        errors.push_back("system: must be linear_gaussian or lorenz63, got '" + cfg.system + "'");
    const bool known_method = cfg.method == "surge" || cfg.method == "bpf" || cfg.method == "enkf" ||
                              cfg.method == "kalman" || cfg.method == "guided_unweighted";
    if (!known_method) errors.push_back("method: unknown method '" + cfg.method + "'");
    if (!have_seed) errors.push_back("seed: required (runs must be reproducible)");
    if (cfg.n < 1) errors.push_back("n: must be >= 1");
    if (cfg.method == "enkf" && cfg.n < 2) errors.push_back("n: enkf needs >= 2 particles");
    if (cfg.k < 1) errors.push_back("k: must be >= 1");
    if (cfg.t < 1) errors.push_back("t: must be >= 1");
    if (!std::isfinite(cfg.lambda) || cfg.lambda < 0) errors.push_back("lambda: must be finite and >= 0");
    if (cfg.guidance != "likelihood" && cfg.guidance != "doob")
        errors.push_back("guidance: must be likelihood or doob, got '" + cfg.guidance + "'");
    if (cfg.guidance == "doob" && cfg.system != "linear_gaussian")
        errors.push_back("guidance: doob is only available for linear_gaussian");
    if (cfg.scheme != "systematic" && cfg.scheme != "multinomial")
        errors.push_back("scheme: must be systematic or multinomial, got '" + cfg.scheme + "'");
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
        errors.push_back("threshold: must be in [0, 1], got " + format_double(cfg.threshold));
    if (cfg.mode != "incremental" && cfg.mode != "whole_step")
        errors.push_back("mode: must be incremental or whole_step, got '" + cfg.mode + "'");
    if (cfg.method == "kalman" && cfg.system != "linear_gaussian")
        errors.push_back("method: kalman is exact only for linear_gaussian");
    if (cfg.threads < 1) errors.push_back("threads: must be >= 1");

    if (!errors.empty()) {
        std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem(s)):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
    return cfg;
}

// Everything that determines the numbers, in a fixed order. threads and
// out_dir deliberately excluded so reruns elsewhere hash identically.
inline std::string canonical_config_string(const ExperimentConfig& c) {
    std::string s;
    s += "system=" + c.system;
    s += ";method=" + c.method;
    s += ";n=" + std::to_string(c.n);
    s += ";k=" + std::to_string(c.k);
    s += ";t=" + std::to_string(c.t);
    s += ";seed=" + std::to_string(c.seed);
    s += ";lambda=" + format_double(c.lambda);
    s += ";guidance=" + c.guidance;
    s += ";scheme=" + c.scheme;
    s += ";threshold=" + format_double(c.threshold);
    s += ";mode=" + c.mode;
    s += std::string(";resample_every_k=") + (c.resample_every_k ? "true" : "false");
    s += std::string(";weight_trace=") + (c.weight_trace ? "true" : "false");
    s += ";scenario=" + c.scenario_path;
    return s;
}

inline std::string scenario_config_json(const std::string& system, std::uint64_t seed, int t) {
    nlohmann::json j;
    j["system"] = system;
    j["seed"] = seed;
    j["t"] = t;
    return j.dump();
}

struct RunResult {
    MetricsCsvRow row;
    MetricReport report;
    std::string summary;
    std::vector<std::string> files_written;
};

namespace detail {

// E|X - c| for X ~ N(mu, sd^2): folded-normal mean of X - c.
inline double gaussian_abs_moment(double mu, double sd, double c) {
    const double m = mu - c;
    if (sd <= 0.0) return std::abs(m);
    constexpr double sqrt_two_over_pi = 0.79788456080286535587989211986876;
    constexpr double sqrt_half = 0.70710678118654752440084436210485;
    return sd * sqrt_two_over_pi * std::exp(-0.5 * m * m / (sd * sd)) + m * std::erf(m * sqrt_half / sd);
}

}  // namespace detail

// Prior draws shared by every particle method: around the model prior for the
// linear benchmark, around the (known) initial truth for Lorenz.
inline Ensemble make_init_ensemble(const ExperimentConfig& cfg, const Scenario& scenario,
                                   const LinearGaussianSystem& lin, const LorenzParams& lor) {
    Ensemble ens;
    ens.particles.reserve(static_cast<std::size_t>(cfg.n));
    if (cfg.system == "linear_gaussian") {
        const int d = static_cast<int>(lin.A.rows());
        const Mat sqrt_p0 = matrix_sqrt_psd(lin.init_cov);
        for (int i = 0; i < cfg.n; ++i)
            ens.particles.push_back(lin.init_mean +
                                    sqrt_p0 * gaussian_draw(make_stream(cfg.seed, StreamDomain::init,
                                                                        static_cast<std::uint32_t>(i), 0, 0),
                                                            d));
    } else {
        for (int i = 0; i < cfg.n; ++i)
            ens.particles.push_back(scenario.truth.front() +
                                    lor.noise_std * gaussian_draw(make_stream(cfg.seed, StreamDomain::init,
                                                                              static_cast<std::uint32_t>(i), 0, 0),
                                                                  3));
    }
    ens.log_weights = Vec::Constant(cfg.n, -std::log(static_cast<double>(cfg.n)));
    return ens;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
    std::string out_dir = cfg.out_dir;
    if (const char* env = std::getenv("SURGE_OUTPUT_DIR"); env && *env) out_dir = env;
    std::filesystem::create_directories(out_dir);
    const std::string hash = hash_hex(fnv1a64(canonical_config_string(cfg)));

    const bool lorenz = cfg.system == "lorenz63";
    const LinearGaussianSystem lin = default_linear_benchmark();
    const LorenzParams lor;
    const ObservationModel model = lorenz ? make_arctan_partial_model(0.05) : make_linear_model(lin.H, lin.gamma);
    const GaussianBridgeSurrogate bridge =
        lorenz ? make_lorenz_surrogate(lor, lor.h, lor.noise_std) : make_linear_gaussian_surrogate(lin.A, lin.Q);

    Scenario scenario;
    if (!cfg.scenario_path.empty()) {
        auto file = read_scenario_csv(cfg.scenario_path);
        scenario = std::move(file.scenario);
        if (static_cast<int>(scenario.truth.front().size()) != bridge.dim)
            throw std::runtime_error("scenario state dimension does not match system '" + cfg.system + "'");
    } else {
        scenario = lorenz ? make_scenario(lor, model, cfg.t, cfg.seed) : make_scenario(lin, model, cfg.t, cfg.seed);
    }
    const int T = static_cast<int>(scenario.observations.size());
    const std::vector<Vec> truth_next(scenario.truth.begin() + 1, scenario.truth.end());

    ResamplingConfig resampling;
    resampling.scheme = cfg.scheme == "multinomial" ? ResampleScheme::multinomial : ResampleScheme::systematic;
    resampling.threshold_fraction = cfg.threshold;

    MetricReport report;
    std::vector<EssTraceRow> ess_trace;
    std::vector<WeightTraceRow> weight_trace;
    int k_used = cfg.k;
    double lambda_used = cfg.lambda;

    if (cfg.method == "kalman") {
        const KalmanOutput kal = kalman_filter(lin.A, lin.Q, lin.H, model.noise_cov(), scenario.observations,
                                               {lin.init_mean, lin.init_cov});
        std::vector<Vec> means;
        for (const auto& st : kal.states) means.push_back(st.mean);
        report.rmse = rmse(means, truth_next);
        for (int t = 0; t < T; ++t) {
            double w1_t = 0.0;
            const auto& st = kal.states[static_cast<std::size_t>(t)];
            for (Eigen::Index j = 0; j < st.mean.size(); ++j)
                w1_t += detail::gaussian_abs_moment(st.mean[j], std::sqrt(std::max(0.0, st.cov(j, j))),
                                                    truth_next[static_cast<std::size_t>(t)][j]);
            report.w1_series.push_back(w1_t / static_cast<double>(st.mean.size()));
            ess_trace.push_back({t, 0, static_cast<double>(cfg.n), false});
        }
        report.w1 = std::accumulate(report.w1_series.begin(), report.w1_series.end(), 0.0) / T;
        report.ess_mean = 1.0;
        report.ess_min = 1.0;
        k_used = 0;
        lambda_used = 0.0;
    } else {
        const Ensemble init = make_init_ensemble(cfg, scenario, lin, lor);
        FilterOutput output;
        if (cfg.method == "bpf") {
            output = bootstrap_pf(bridge.transition(), cfg.k, model, scenario.observations, init, resampling,
                                  cfg.seed, cfg.threads);
            lambda_used = 0.0;
        } else if (cfg.method == "enkf") {
            output = enkf(bridge, model, scenario.observations, init, cfg.seed);
            k_used = 1;
            lambda_used = 0.0;
        } else {
            const TransitionSurrogate surrogate = bridge.transition();
            FilterConfig fc;
            fc.N = cfg.n;
            fc.K = cfg.k;
            fc.resampling = resampling;
            fc.guidance = cfg.guidance == "doob"
                              ? exact_doob_guidance(lin.A, lin.Q, lin.H, model.noise_cov())
                              : likelihood_gradient_guidance(model, surrogate, cfg.lambda);
            fc.mode = cfg.mode == "whole_step" ? FilterMode::whole_step : FilterMode::incremental;
            fc.resample_every_k = cfg.resample_every_k;
            fc.unweighted = cfg.method == "guided_unweighted";
            fc.seed = cfg.seed;
            fc.threads = cfg.threads;
            fc.record_weight_trace = cfg.weight_trace && cfg.method == "surge";
            output = surge_filter(surrogate, model, scenario.observations, init, fc);
        }
        report = evaluate_run(output, truth_next, cfg.n);
        ess_trace = std::move(output.ess_trace);
        weight_trace = std::move(output.weight_trace);
    }

    RunResult res;
    res.report = report;
    res.row = {cfg.method, cfg.system, cfg.seed,       cfg.n,         k_used,        T,
               lambda_used, report.rmse, report.w1, report.ess_mean, report.ess_min};
    const std::string metrics_path = out_dir + "/metrics.csv";
    const std::string ess_path = out_dir + "/ess_trace.csv";
    write_metrics_csv(metrics_path, {res.row}, hash);
    write_ess_trace_csv(ess_path, ess_trace, hash);
    res.files_written = {metrics_path, ess_path};
    if (cfg.weight_trace && cfg.method == "surge") {
        const std::string wt_path = out_dir + "/weight_trace.csv";
        write_weight_trace_csv(wt_path, weight_trace, hash);
        res.files_written.push_back(wt_path);
    }

    char buf[256];
    std::snprintf(buf, sizeof buf, "method=%s rmse=%.6g w1=%.6g ess_mean=%.4g", cfg.method.c_str(), report.rmse,
                  report.w1, report.ess_mean);
    res.summary = buf;
    return res;
}

// generate-scenario: draw and store a (truth, observations) pair for later
// runs via the `scenario` config key.
inline std::string generate_scenario_file(const ExperimentConfig& cfg) {
    std::string out_dir = cfg.out_dir;
    if (const char* env = std::getenv("SURGE_OUTPUT_DIR"); env && *env) out_dir = env;
    std::filesystem::create_directories(out_dir);
    const bool lorenz = cfg.system == "lorenz63";
    const LinearGaussianSystem lin = default_linear_benchmark();
    const LorenzParams lor;
    const ObservationModel model = lorenz ? make_arctan_partial_model(0.05) : make_linear_model(lin.H, lin.gamma);
    const Scenario scenario =
        lorenz ? make_scenario(lor, model, cfg.t, cfg.seed) : make_scenario(lin, model, cfg.t, cfg.seed);
    const std::string json = scenario_config_json(cfg.system, cfg.seed, cfg.t);
    const std::string path = out_dir + "/scenario.csv";
    write_scenario_csv(path, scenario, json, hash_hex(fnv1a64(json)));
    return path;
}

}  // namespace surge
