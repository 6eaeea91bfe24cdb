#pragma once

// CSV sinks and sources. Every file gets a header row and a trailing
// `# config_hash=<16 hex>` comment so downstream tooling can verify which
// configuration produced it. Doubles are printed with %.17g, which
// round-trips exactly through strtod.

#include "surge/metrics.hpp"
#include "surge/systems.hpp"
#include "surge/weights.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace surge {

inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline void finish(std::ofstream& out, const std::string& path, const std::string& config_hash) {
    out << "# config_hash=" << config_hash << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

struct MetricsCsvRow {
    std::string method;
    std::string system;
    std::uint64_t seed = 0;
    int n = 0;
    int k = 0;
    int t_steps = 0;
    double lambda = 0.0;
    double rmse = 0.0;
    double w1 = 0.0;
    double ess_mean = 0.0;
    double ess_min = 0.0;
};

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsCsvRow>& rows,
                              const std::string& config_hash) {
    auto out = detail::open_out(path);
    out << "method,system,seed,n,k,t_steps,lambda,rmse,w1,ess_mean,ess_min\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.system << ',' << r.seed << ',' << r.n << ',' << r.k << ','
            << r.t_steps << ',' << format_double(r.lambda) << ',' << format_double(r.rmse) << ','
            << format_double(r.w1) << ',' << format_double(r.ess_mean) << ','
            << format_double(r.ess_min) << "\n";
    }
    detail::finish(out, path, config_hash);
}

inline void write_ess_trace_csv(const std::string& path, const std::vector<EssTraceRow>& trace,
                                const std::string& config_hash) {
    auto out = detail::open_out(path);
    out << "t,k,ess,did_resample\n";
    for (const auto& r : trace)
        out << r.t << ',' << r.k << ',' << format_double(r.ess) << ',' << (r.did_resample ? 1 : 0) << "\n";
    detail::finish(out, path, config_hash);
}

inline void write_weight_trace_csv(const std::string& path, const std::vector<WeightTraceRow>& rows,
                                   const std::string& config_hash) {
    auto out = detail::open_out(path);
    out << "t,k,particle,log_beta,reward_part,girsanov_part\n";
    for (const auto& r : rows)
        out << r.t << ',' << r.k << ',' << r.particle << ',' << format_double(r.log_beta) << ','
            << format_double(r.reward_part) << ',' << format_double(r.girsanov_part) << "\n";
    detail::finish(out, path, config_hash);
}

// Scenario files carry the generating config as a JSON comment on the first
// line, then a plain columnar table: row t holds the true state x_t and the
// observation made of it (observations are of states 1..T, so the y columns of
// row 0 are nan placeholders).
inline void write_scenario_csv(const std::string& path, const Scenario& scenario,
                               const std::string& config_json, const std::string& config_hash) {
    if (scenario.truth.empty()) throw std::invalid_argument("write_scenario_csv: empty scenario");
    const int d = static_cast<int>(scenario.truth.front().size());
    const int m = scenario.observations.empty() ? 0 : static_cast<int>(scenario.observations.front().size());
    auto out = detail::open_out(path);
    out << "# " << config_json << "\n";
    out << "t";
    for (int j = 1; j <= d; ++j) out << ",x" << j;
    for (int j = 1; j <= m; ++j) out << ",y" << j;
    out << "\n";
    for (std::size_t t = 0; t < scenario.truth.size(); ++t) {
        out << t;
        for (int j = 0; j < d; ++j) out << ',' << format_double(scenario.truth[t][j]);
        for (int j = 0; j < m; ++j) {
            if (t == 0)
                out << ",nan";
            else
                out << ',' << format_double(scenario.observations[t - 1][j]);
        }
        out << "\n";
    }
    detail::finish(out, path, config_hash);
}

struct ScenarioFile {
    Scenario scenario;
    std::string config_json;
    std::string config_hash;
};

inline ScenarioFile read_scenario_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    ScenarioFile file;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw std::runtime_error("scenario file missing config header: " + path);
    file.config_json = line.substr(2);
    if (!std::getline(in, line)) throw std::runtime_error("scenario file missing column header: " + path);

    int d = 0, m = 0;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind('x', 0) == 0) ++d;
            if (col.rfind('y', 0) == 0) ++m;
        }
        if (d == 0) throw std::runtime_error("scenario file has no state columns: " + path);
    }

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# config_hash=", 0) == 0) {
            file.config_hash = line.substr(14);
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // t index, implied by row order
        Vec x(d);
        for (int j = 0; j < d; ++j) {
            std::getline(ss, cell, ',');
            x[j] = std::strtod(cell.c_str(), nullptr);
        }
        const bool first_row = file.scenario.truth.empty();
        if (m > 0 && !first_row) {
            Vec y(m);
            for (int j = 0; j < m; ++j) {
                std::getline(ss, cell, ',');
                y[j] = std::strtod(cell.c_str(), nullptr);
            }
            file.scenario.observations.push_back(std::move(y));
        }
        file.scenario.truth.push_back(std::move(x));
    }
    if (file.scenario.truth.empty()) throw std::runtime_error("scenario file has no data rows: " + path);
    return file;
}

}  // namespace surge
