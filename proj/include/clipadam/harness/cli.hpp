#pragma once

#include "clipadam/harness/config.hpp"
#include "clipadam/harness/csv.hpp"
#include "clipadam/harness/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace clipadam::harness {

// JSON has no NaN / infinity; those become null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json report_json(const DiagnosticsReport& r) {
    nlohmann::json j;
    j["bound_C1"] = finite_or_null(r.bound_C1);
    j["lipschitz_C2"] = finite_or_null(r.lipschitz_C2);
    j["lyapunov_fit"] = {{"gamma", finite_or_null(r.lyapunov_gamma)},
                         {"C", finite_or_null(r.lyapunov_C)},
                         {"residual", finite_or_null(r.lyapunov_residual)},
                         {"violation_fraction", r.lyapunov_violation_fraction},
                         {"divergent", r.lyapunov_divergent}};
    j["contraction"] = {{"rate_c", finite_or_null(r.contraction_rate_c)},
                        {"stderr", finite_or_null(r.contraction_stderr)},
                        {"residual", finite_or_null(r.contraction_residual)},
                        {"degenerate", r.contraction_degenerate}};
    j["drift_gap_sup"] = finite_or_null(r.drift_gap_sup);
    j["drift_gap_kernel_bound"] = finite_or_null(r.drift_gap_bound);
    j["ks_distance"] = r.ks_distance ? finite_or_null(*r.ks_distance) : nlohmann::json();
    j["minimizer"] = {{"point", std::vector<double>(r.minimizer.point.data(),
                                                    r.minimizer.point.data() + r.minimizer.point.size())},
                      {"value", finite_or_null(r.minimizer.value)},
                      {"regularizer", finite_or_null(r.minimizer.regularizer_at_point)},
                      {"converged", r.minimizer.converged},
                      {"exhaustive", r.minimizer.exhaustive}};
    nlohmann::json series = nlohmann::json::array();
    for (const auto& e : r.excess_loss_series) series.push_back({e.time, finite_or_null(e.mean)});
    j["excess_loss_series"] = series;
    return j;
}

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t workers = 0;
};

inline ConfigMap assemble_config(const CommonOptions& opts, const CLI::App& sub) {
    ConfigMap map = opts.config.empty() ? ConfigMap() : ConfigMap::load(opts.config);
    for (const auto& o : opts.overrides) map.apply_override(o);
    if (sub.count("--seed")) map.set("run.seed", std::to_string(opts.seed));
    if (sub.count("--workers")) map.set("run.workers", std::to_string(opts.workers));
    return map;
}

inline std::string output_path(const CommonOptions& opts, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out, ec);
    if (ec) throw ConfigError("cannot create output directory '" + opts.out + "': " + ec.message());
    return (std::filesystem::path(opts.out) / name).string();
}

/// Entry point of the command-line tool.  Exit codes: 0 success, 1 config
/// error, 2 numeric failure.
inline int run_cli(int argc, char** argv) {
    CLI::App app{"Smooth-clipped Adam experiments"};
    app.require_subcommand(1);
    CommonOptions opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "Config file (key = value lines)");
        sub->add_option("--set", opts.overrides, "Override a config key, e.g. optimizer.eta=0.05");
        sub->add_option("--out", opts.out, "Output directory");
        sub->add_option("--seed", opts.seed, "Experiment seed (overrides run.seed)");
        sub->add_option("--workers", opts.workers, "Worker threads (overrides run.workers)")->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "Simulate replicas and write the time series CSV");
    auto* sweep = app.add_subcommand("sweep", "Sweep one hyperparameter and write terminal metrics");
    auto* diag = app.add_subcommand("diagnose", "Compute drift constants and ergodicity diagnostics");
    auto* fit = app.add_subcommand("fit", "Fit a rate to a metric in a run or sweep CSV");
    for (auto* sub : {run, sweep, diag, fit}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            const ConfigMap map = assemble_config(opts, *run);
            const ExperimentConfig cfg = load_experiment(map);
            const RunResult result = run_single(cfg);
            const std::string path = output_path(opts, "run.csv");
            write_csv(path, result.metadata, series_body(result.rows));
            std::cout << "final excess_loss " << format_number(result.final_excess) << " +- "
                      << format_number(result.final_excess_stderr) << " (" << path << ")\n";
            if (result.failed > 0) {
                std::cerr << result.failed << " replica(s) failed; see metadata in " << path << "\n";
                return 2;
            }
        } else if (sweep->parsed()) {
            const ConfigMap map = assemble_config(opts, *sweep);
            const SweepSpec spec = load_sweep(map);
            const SweepResult result = run_sweep(spec);
            const std::string path = output_path(opts, "sweep.csv");
            write_csv(path, result.metadata, sweep_body(result.rows));
            std::cout << "wrote " << result.rows.size() << " rows to " << path << "\n";
            if (result.failed_values > 0) {
                std::cerr << result.failed_values << " sweep value(s) failed; see metadata in " << path << "\n";
                return 2;
            }
        } else if (diag->parsed()) {
            const ConfigMap map = assemble_config(opts, *diag);
            const ExperimentConfig cfg = load_experiment(map);
            const DiagnoseResult result = diagnose(cfg, map);
            write_csv(output_path(opts, "diagnostics.csv"), result.metadata, series_body(result.rows));
            std::ofstream json_out(output_path(opts, "report.json"));
            json_out << report_json(result.report).dump(2) << "\n";
            std::cout << report_json(result.report).dump(2) << "\n";
        } else if (fit->parsed()) {
            const ConfigMap map = assemble_config(opts, *fit);
            const FitResult result = fit_from_csv(load_fit(map));
            nlohmann::json j = {{"metric", map.get_string("fit.metric", "excess_loss")},
                                {"model", map.get_string("fit.model", "loglog")},
                                {"parameter", finite_or_null(result.fit.parameter)},
                                {"stderr", finite_or_null(result.fit.std_error)},
                                {"intercept", finite_or_null(result.fit.intercept)},
                                {"residual", finite_or_null(result.fit.residual)},
                                {"points", result.fit.points}};
            std::ofstream json_out(output_path(opts, "fit.json"));
            json_out << j.dump(2) << "\n";
            std::cout << j.dump(2) << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace clipadam::harness
