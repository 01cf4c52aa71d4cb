#pragma once

#include "clipadam/diagnostics.hpp"
#include "clipadam/harness/config.hpp"
#include "clipadam/harness/csv.hpp"
#include "clipadam/problems.hpp"
#include "clipadam/simulation.hpp"
#include "clipadam/stats.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace clipadam::harness {

inline std::vector<std::string> base_metadata(const std::string& command, const ExperimentConfig& cfg) {
    return {
        "clipadam " + command,
        "seed=" + std::to_string(cfg.seed()),
        "replica_seed=mix64(seed ^ mix64(replica + 1)) with mix64 the splitmix64 finalizer",
        "config_hash=" + cfg.hash,
        "problem=" + cfg.problem.name + " dim=" + std::to_string(cfg.problem.dim) + " n=" +
            std::to_string(cfg.problem.n),
        "algorithm=" + algorithm_name(cfg.algorithm),
    };
}

inline std::string wall_clock_line(std::chrono::steady_clock::time_point start) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return "wall_clock_seconds=" + format_number(seconds);
}

// Per-replica metrics evaluated at one position.
struct PointMetrics {
    double excess = 0.0;
    double empirical = 0.0;
    double generalization = 0.0;
};

inline PointMetrics point_metrics(const Problem& problem, const Vector& x, double epsilon, const Minimizer& minimizer) {
    const double expected = expected_loss(problem, x);
    const double empirical = problem.empirical(x);
    return {expected + std::sqrt(epsilon) * problem.regularizer(x) - minimizer.value, empirical,
            std::abs(expected - empirical)};
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunResult {
    std::vector<SeriesRow> rows;
    std::vector<std::string> metadata;
    Minimizer minimizer;
    double final_excess = 0.0;
    double final_excess_stderr = 0.0;
    std::size_t failed = 0;
};

inline RunResult run_single(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const Problem problem = make_problem(cfg.problem);
    const Ensemble ens = simulate_ensemble(problem, cfg.optimizer, cfg.ensemble_spec(), cfg.theta0);
    RunResult out;
    out.minimizer = find_minimizer(problem, cfg.optimizer.drift.epsilon);
    out.failed = ens.failed_count();
    if (out.failed == cfg.replicas) throw NumericError("run: every replica failed; first: " + ens.failures.front());

    const double eps = cfg.optimizer.drift.epsilon;
    const std::size_t n_ck = ens.times.size();
    std::vector<RunningStats> excess(n_ck), empirical(n_ck), gap(n_ck), v2(n_ck);
    for (std::size_t k = 0; k < n_ck; ++k) {
        for (std::size_t i = 0; i < cfg.replicas; ++i) {
            const Vector& x = ens.positions[k][i];
            if (!ens.failures[i].empty() || !x.allFinite()) continue;
            const PointMetrics m = point_metrics(problem, x, eps, out.minimizer);
            excess[k].add(m.excess);
            empirical[k].add(m.empirical);
            gap[k].add(m.generalization);
            v2[k].add(ens.path_norms[k][i] * ens.path_norms[k][i]);
        }
    }
    auto emit = [&](const std::string& metric, const std::vector<RunningStats>& stats) {
        for (std::size_t k = 0; k < n_ck; ++k) {
            out.rows.push_back({ens.times[k], metric, stats[k].mean(), stats[k].std_error(), stats[k].count()});
        }
    };
    emit("excess_loss", excess);
    emit("empirical_loss", empirical);
    emit("generalization_gap", gap);
    emit("lyapunov_v2", v2);
    out.final_excess = excess.back().mean();
    out.final_excess_stderr = excess.back().std_error();

    if (cfg.theta0_prime) {
        const CoupledEnsemble coupled =
            simulate_coupled(problem, cfg.optimizer, cfg.ensemble_spec(), cfg.theta0, *cfg.theta0_prime);
        for (std::size_t k = 0; k < coupled.times.size(); ++k) {
            RunningStats s;
            for (std::size_t i = 0; i < cfg.replicas; ++i) {
                if (coupled.failures[i].empty()) s.add(coupled.distance[k][i]);
            }
            out.rows.push_back({coupled.times[k], "coupling_rho", s.mean(), s.std_error(), s.count()});
        }
    }

    out.metadata = base_metadata("run", cfg);
    out.metadata.push_back("minimizer_value=" + format_number(out.minimizer.value) +
                           (out.minimizer.exhaustive ? "" : " (best found, not exhaustive)") +
                           (out.minimizer.converged ? "" : " (search did not converge)"));
    out.metadata.push_back("regularizer_at_minimizer=" + format_number(out.minimizer.regularizer_at_point));
    for (std::size_t i = 0; i < ens.failures.size(); ++i) {
        if (!ens.failures[i].empty()) out.metadata.push_back("replica " + std::to_string(i) + " failed: " + ens.failures[i]);
    }
    out.metadata.push_back(wall_clock_line(start));
    return out;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> metadata;
    std::size_t failed_values = 0;
};

namespace detail {

// Mean over checkpoints with t >= burn_in * T of each replica's metric.
struct ReplicaAverages {
    std::vector<double> excess, empirical, generalization;
};

inline ReplicaAverages post_burn_in_averages(const Ensemble& ens, const Problem& problem, double epsilon,
                                             const Minimizer& minimizer, double burn_in) {
    ReplicaAverages out;
    const double start = burn_in * ens.times.back();
    for (std::size_t i = 0; i < ens.failures.size(); ++i) {
        if (!ens.failures[i].empty()) continue;
        RunningStats e, l, g;
        for (std::size_t k = 0; k < ens.times.size(); ++k) {
            if (ens.times[k] < start) continue;
            const PointMetrics m = point_metrics(problem, ens.positions[k][i], epsilon, minimizer);
            e.add(m.excess);
            l.add(m.empirical);
            g.add(m.generalization);
        }
        out.excess.push_back(e.mean());
        out.empirical.push_back(l.mean());
        out.generalization.push_back(g.mean());
    }
    return out;
}

}  // namespace detail

/// One row per (value, metric).  Metrics are post-burn-in averages per
/// replica, summarized over replicas; with several dataset draws the per-draw
/// replica means are summarized over draws instead.  The eta axis adds
/// discretization_gap = E|obj(X^eta_T) - obj(X^h_T)| from chains sharing noise.
inline SweepResult run_sweep(const SweepSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<ExperimentConfig> points;
    for (double v : spec.values) points.push_back(load_experiment(sweep_point(spec, v)));

    const ExperimentConfig& first = points.front();
    const Problem reference = make_problem(first.problem);
    const Minimizer minimizer = find_minimizer(reference, first.optimizer.drift.epsilon);
    const double eps = first.optimizer.drift.epsilon;

    SweepResult out;
    out.metadata = base_metadata("sweep", first);
    out.metadata.push_back("axis=" + axis_name(spec.axis) + " draws=" + std::to_string(spec.draws) +
                           " fine_ratio=" + std::to_string(spec.fine_ratio));
    out.metadata.push_back("minimizer_value=" + format_number(minimizer.value));
    const std::string axis = axis_name(spec.axis);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t vi = 0; vi < points.size(); ++vi) {
        const ExperimentConfig& cfg = points[vi];
        const double value = spec.values[vi];
        try {
            std::vector<RunningStats> per_draw(3);
            std::vector<double> pooled_excess, pooled_empirical, pooled_gap;
            for (std::size_t d = 0; d < spec.draws; ++d) {
                ProblemParams prm = cfg.problem;
                if (spec.axis == SweepAxis::N) {
                    prm.data_seed = derive_seed(derive_seed(cfg.problem.data_seed, cfg.problem.n), d);
                } else if (spec.draws > 1) {
                    prm.data_seed = derive_seed(cfg.problem.data_seed, d);
                }
                const Problem problem = make_problem(prm);
                EnsembleSpec es = cfg.ensemble_spec();
                if (spec.draws > 1) es.seed = derive_seed(cfg.seed(), d);
                const Ensemble ens = simulate_ensemble(problem, cfg.optimizer, es, cfg.theta0);
                if (ens.failed_count() == es.replicas) throw NumericError(ens.failures.front());
                for (std::size_t i = 0; i < ens.failures.size(); ++i) {
                    if (!ens.failures[i].empty()) {
                        out.metadata.push_back(axis + "=" + format_number(value) + " draw " + std::to_string(d) +
                                               " replica " + std::to_string(i) + " failed: " + ens.failures[i]);
                    }
                }
                const auto avg = detail::post_burn_in_averages(ens, problem, eps, minimizer, cfg.burn_in);
                per_draw[0].add(mean_stderr(avg.excess).mean);
                per_draw[1].add(mean_stderr(avg.empirical).mean);
                per_draw[2].add(mean_stderr(avg.generalization).mean);
                pooled_excess.insert(pooled_excess.end(), avg.excess.begin(), avg.excess.end());
                pooled_empirical.insert(pooled_empirical.end(), avg.empirical.begin(), avg.empirical.end());
                pooled_gap.insert(pooled_gap.end(), avg.generalization.begin(), avg.generalization.end());
            }
            auto emit = [&](const std::string& metric, const RunningStats& draws, const std::vector<double>& pooled) {
                const MeanStderr s = spec.draws > 1 ? draws.summary() : mean_stderr(pooled);
                out.rows.push_back({axis, value, metric, s.mean, s.std_error, s.count});
            };
            emit("excess_loss", per_draw[0], pooled_excess);
            emit("empirical_loss", per_draw[1], pooled_empirical);
            emit("generalization_gap", per_draw[2], pooled_gap);

            if (spec.axis == SweepAxis::Eta) {
                const Problem problem = make_problem(cfg.problem);
                const double h = cfg.optimizer.eta / static_cast<double>(spec.fine_ratio);
                const DiscretizationPair pair = simulate_discretization_pair(
                    problem, cfg.optimizer, h, cfg.horizon, cfg.replicas, cfg.seed(), cfg.theta0, cfg.workers);
                RunningStats s;
                for (std::size_t i = 0; i < cfg.replicas; ++i) {
                    if (!pair.failures[i].empty()) continue;
                    s.add(std::abs(population_objective(problem, pair.coarse[i], eps) -
                                   population_objective(problem, pair.fine[i], eps)));
                }
                if (s.count() == 0) throw NumericError("discretization pair: every replica failed");
                out.rows.push_back({axis, value, "discretization_gap", s.mean(), s.std_error(), s.count()});
            }
        } catch (const NumericError& e) {
            ++out.failed_values;
            out.metadata.push_back(axis + "=" + format_number(value) + " failed: " + e.what());
            out.rows.push_back({axis, value, "excess_loss", nan, nan, 0});
        }
    }
    out.metadata.push_back(wall_clock_line(start));
    return out;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitRequest {
    std::string input;
    std::string metric = "excess_loss";
    RateModel model = RateModel::LogLog;
    double min_x = -std::numeric_limits<double>::infinity();
};

inline FitRequest load_fit(const ConfigMap& map) {
    FitRequest req;
    req.input = map.get_string("fit.input", "");
    require(!req.input.empty(), "fit.input must name a CSV file");
    req.metric = map.get_string("fit.metric", req.metric);
    req.model = parse_rate_model(map.get_string("fit.model", "loglog"));
    req.min_x = map.get_double("fit.min_x", req.min_x);
    return req;
}

struct FitResult {
    RateFit fit;
    std::vector<double> x, y;
};

/// Reads a run CSV (x = time) or sweep CSV (x = value) and fits `metric`.
inline FitResult fit_from_csv(const FitRequest& req) {
    const CsvTable table = read_csv(req.input);
    const std::size_t x_col = table.has_column("value") ? table.column("value") : table.column("time");
    const std::size_t metric_col = table.column("metric");
    const std::size_t mean_col = table.column("mean");
    FitResult out;
    for (const auto& row : table.rows) {
        if (row[metric_col] != req.metric) continue;
        const double x = ConfigMap::parse_double("x", row[x_col]);
        if (x < req.min_x) continue;
        out.x.push_back(x);
        out.y.push_back(ConfigMap::parse_double("mean", row[mean_col]));
    }
    if (out.x.empty()) throw ConfigError("fit: no rows with metric '" + req.metric + "' in " + req.input);
    out.fit = fit_rate(out.x, out.y, req.model);
    return out;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseResult {
    DiagnosticsReport report;
    std::vector<SeriesRow> rows;
    std::vector<std::string> metadata;
};

/// Drift constants, Lyapunov envelope, coupling contraction (from theta0 and
/// theta0_prime, which defaults to theta0), drift gap along clipped-Adam runs,
/// excess loss and, in d = 1, KS distance of frozen-SGLD samples to pi*.
inline DiagnoseResult diagnose(const ExperimentConfig& cfg, const ConfigMap& map) {
    const auto start = std::chrono::steady_clock::now();
    const Problem problem = make_problem(cfg.problem);
    const OptimizerConfig& opt = cfg.optimizer;
    const DriftConfig& drift = opt.drift;
    DiagnoseResult out;
    DiagnosticsReport& rep = out.report;

    rep.bound_C1 = bound_constant_C1(drift);
    rep.lipschitz_C2 = lipschitz_constant_C2(drift, problem.loss.grad_bound_A, problem.loss.smoothness_M);

    const double p = map.get_double("diagnose.p", 2.0);
    EnsembleSpec spec = cfg.ensemble_spec();
    const LyapunovEstimate lyap = lyapunov_estimate(problem, opt, p, cfg.theta0, spec);
    rep.lyapunov_gamma = lyap.fit.gamma;
    rep.lyapunov_C = lyap.fit.C;
    rep.lyapunov_residual = lyap.fit.residual;
    rep.lyapunov_violation_fraction = lyap.fit.violation_fraction();
    rep.lyapunov_divergent = lyap.divergent;
    for (std::size_t k = 0; k < lyap.times.size(); ++k) {
        out.rows.push_back({lyap.times[k], "lyapunov_vp", lyap.mean[k], lyap.std_error[k], cfg.replicas - lyap.divergent});
    }

    const Vector x0_prime = cfg.theta0_prime ? *cfg.theta0_prime : cfg.theta0;
    const ContractionEstimate contraction = coupling_contraction(problem, opt, cfg.theta0, x0_prime, spec, cfg.burn_in);
    rep.contraction_rate_c = contraction.fit.parameter;
    rep.contraction_stderr = contraction.fit.std_error;
    rep.contraction_residual = contraction.fit.residual;
    rep.contraction_degenerate = contraction.degenerate;
    for (std::size_t k = 0; k < contraction.times.size(); ++k) {
        out.rows.push_back({contraction.times[k], "coupling_rho", contraction.mean[k], contraction.std_error[k],
                            cfg.replicas - contraction.failed});
    }

    // Drift gap along clipped-Adam trajectories stored as explicit paths.
    {
        const std::size_t gap_replicas = std::min<std::size_t>(map.get_uint("diagnose.gap_replicas", 16), cfg.replicas);
        const std::size_t n_snapshots = std::max<std::uint64_t>(1, map.get_uint("diagnose.gap_snapshots", 10));
        const std::string reading_name = map.get_string("diagnose.reading", "linear");
        require(reading_name == "linear" || reading_name == "sample_hold",
                "diagnose.reading must be linear or sample_hold");
        const PathReading reading = reading_name == "linear" ? PathReading::Linear : PathReading::SampleHold;
        const std::uint64_t n_steps = step_count(cfg.horizon, opt.eta);
        const std::size_t capacity = CrPath::default_capacity(drift.c1, drift.c2, drift.r, opt.eta);
        std::vector<std::vector<CrPath>> snapshots(n_snapshots);
        std::vector<std::uint64_t> at;
        for (std::size_t s = 0; s < n_snapshots; ++s) at.push_back(n_steps * (s + 1) / n_snapshots);
        for (std::size_t i = 0; i < gap_replicas; ++i) {
            const NoiseSource noise(derive_seed(cfg.seed(), i));
            ClippedAdamChain<Problem> chain(problem, opt, cfg.theta0);
            CrPath path = CrPath::constant(cfg.theta0, opt.eta, drift.r, capacity);
            Vector zeta(cfg.theta0.size());
            std::size_t next = 0;
            for (std::uint64_t k = 0; k <= n_steps && next < at.size(); ++k) {
                while (next < at.size() && at[next] == k) snapshots[next++].push_back(path);
                if (k == n_steps) break;
                noise.fill(k, zeta);
                chain.step(zeta);
                path.push(chain.position());
            }
        }
        auto grad = [&](const Vector& x) { return problem.loss_gradient(x); };
        const DriftGap gap = drift_gap_estimate(snapshots, grad, drift, reading);
        rep.drift_gap_sup = gap.sup_mean_squared;
        rep.drift_gap_bound = gap.kernel_bound;
    }

    const Ensemble ens = simulate_ensemble(problem, opt, spec, cfg.theta0);
    rep.minimizer = find_minimizer(problem, drift.epsilon);
    rep.excess_loss_series = excess_loss(ens, problem, drift.epsilon, rep.minimizer);
    for (const auto& e : rep.excess_loss_series) {
        out.rows.push_back({e.time, "excess_loss", e.mean, e.std_error, e.count});
    }

    if (problem.dim() == 1) {
        const double c_eps = cfg.frozen_scale > 0.0 ? cfg.frozen_scale : frozen_scale_at(problem, cfg.theta0, drift.epsilon);
        const double wide = 2.0 * (problem.reg.radius_K + 1.0);
        const double lo = map.get_double("diagnose.grid_lo", -wide);
        const double hi = map.get_double("diagnose.grid_hi", wide);
        std::size_t n = map.get_uint("diagnose.grid_points", 20001);
        if (n % 2 == 0) ++n;
        const DensityTable table = invariant_density_1d(problem, opt.beta, c_eps, lo, hi, n);
        const auto samples = frozen_sgld_samples(
            problem, opt, c_eps, cfg.theta0, map.get_uint("diagnose.chains", cfg.replicas),
            map.get_uint("diagnose.samples_per_chain", 1000), map.get_uint("diagnose.burn_in_steps", 2000),
            map.get_uint("diagnose.thin", 10), derive_seed(cfg.seed(), 0x6b73), cfg.workers);
        rep.ks_distance = ks_distance(samples, table.grid, table.cdf);
    }

    out.metadata = base_metadata("diagnose", cfg);
    out.metadata.push_back(wall_clock_line(start));
    return out;
}

}  // namespace clipadam::harness
