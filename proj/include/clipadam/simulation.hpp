#pragma once

#include "clipadam/core.hpp"
#include "clipadam/noise.hpp"
#include "clipadam/optimizers.hpp"
#include "clipadam/path_space.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace clipadam {

/// Runs fn(i) for i in [0, count) on up to `workers` threads.  Each index is
/// handled exactly once; the first exception is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::size_t default_workers() {
    return std::max(1U, std::thread::hardware_concurrency());
}

enum class Algorithm { ClippedAdam, Continuous, Sgld, FrozenSgld };

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "clipped_adam") return Algorithm::ClippedAdam;
    if (name == "continuous") return Algorithm::Continuous;
    if (name == "sgld") return Algorithm::Sgld;
    if (name == "frozen_sgld") return Algorithm::FrozenSgld;
    throw ConfigError("unknown optimizer.algorithm '" + name + "'");
}

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::ClippedAdam: return "clipped_adam";
        case Algorithm::Continuous: return "continuous";
        case Algorithm::Sgld: return "sgld";
        case Algorithm::FrozenSgld: return "frozen_sgld";
    }
    return "unknown";
}

struct EnsembleSpec {
    Algorithm algorithm = Algorithm::ClippedAdam;
    std::size_t replicas = 1;
    double horizon = 1.0;
    std::uint64_t checkpoint_every = 0;  // in eta-steps; 0 selects max(1, floor(T / (100 eta)))
    double fine_step = 0.0;              // continuous only; 0 selects eta / 16
    double frozen_scale = 0.0;           // frozen_sgld only; 0 selects c(eps) at the initial point
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

inline std::uint64_t step_count(double horizon, double eta) {
    require(horizon >= 0.0, "horizon must be nonnegative");
    return static_cast<std::uint64_t>(std::llround(horizon / eta));
}

inline std::uint64_t default_checkpoint_every(double horizon, double eta) {
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(horizon / (100.0 * eta))));
}

// Checkpoint step indices: 0, every, 2 every, ..., and always the last step.
inline std::vector<std::uint64_t> checkpoint_steps(std::uint64_t n_steps, std::uint64_t every) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t k = 0; k <= n_steps; k += std::max<std::uint64_t>(every, 1)) out.push_back(k);
    if (out.back() != n_steps) out.push_back(n_steps);
    return out;
}

/// Positions and path norms |X_t|_r of every replica at each checkpoint.
/// Replicas that hit a numeric failure carry NaN from then on and a message.
struct Ensemble {
    std::vector<double> times;
    std::vector<std::vector<Vector>> positions;   // [checkpoint][replica]
    std::vector<std::vector<double>> path_norms;  // [checkpoint][replica]
    std::vector<std::string> failures;            // [replica], empty when fine
    std::vector<std::uint64_t> replica_seeds;

    std::size_t failed_count() const {
        return static_cast<std::size_t>(
            std::count_if(failures.begin(), failures.end(), [](const auto& s) { return !s.empty(); }));
    }
};

namespace detail {

// Advances one replica of any algorithm by whole eta-steps.
template <GradientModel Model>
class ReplicaStepper {
public:
    ReplicaStepper(const Model& model, const OptimizerConfig& cfg, const EnsembleSpec& spec, const Vector& x0,
                   std::uint64_t seed)
        : model_(&model), cfg_(cfg), spec_(spec), noise_(seed), zeta_(x0.size()), x_(x0) {
        switch (spec.algorithm) {
            case Algorithm::ClippedAdam: adam_.emplace(model, cfg, x0); break;
            case Algorithm::Continuous:
                continuous_.emplace(model, cfg, spec.fine_step > 0.0 ? spec.fine_step : cfg.eta / 16.0, x0);
                break;
            case Algorithm::Sgld: break;
            case Algorithm::FrozenSgld:
                frozen_scale_ = spec.frozen_scale > 0.0 ? spec.frozen_scale
                                                         : frozen_scale_at(model, x0, cfg.drift.epsilon);
                break;
        }
    }

    // One eta-step.  The continuous chain tracks its path norm on the fine grid.
    void step(RunningRNorm& norm, double fine_decay_rate) {
        switch (spec_.algorithm) {
            case Algorithm::ClippedAdam:
                noise_.fill(k_, zeta_);
                adam_->step(zeta_);
                x_ = adam_->position();
                norm.advance(x_.norm());
                break;
            case Algorithm::Continuous: {
                for (std::uint64_t i = 0; i < continuous_->substeps(); ++i) {
                    noise_.fill(continuous_->steps(), zeta_);
                    continuous_->step(zeta_);
                    fine_norm_ = std::max(continuous_->position().norm(),
                                          std::exp(-fine_decay_rate * continuous_->fine_step()) * fine_norm_);
                }
                x_ = continuous_->position();
                norm.reset(fine_norm_);
                break;
            }
            case Algorithm::Sgld:
                noise_.fill(k_, zeta_);
                x_ = step_sgld(x_, *model_, cfg_, zeta_);
                norm.advance(x_.norm());
                break;
            case Algorithm::FrozenSgld:
                noise_.fill(k_, zeta_);
                x_ = step_frozen_sgld(x_, frozen_scale_, *model_, cfg_, zeta_);
                norm.advance(x_.norm());
                break;
        }
        ++k_;
    }

    const Vector& position() const { return x_; }
    void seed_fine_norm(double v) { fine_norm_ = v; }

private:
    const Model* model_;
    OptimizerConfig cfg_;
    EnsembleSpec spec_;
    NoiseSource noise_;
    Vector zeta_;
    Vector x_;
    std::optional<ClippedAdamChain<Model>> adam_;
    std::optional<ContinuousChain<Model>> continuous_;
    double frozen_scale_ = 1.0;
    double fine_norm_ = 0.0;
    std::uint64_t k_ = 0;
};

}  // namespace detail

/// Simulates `spec.replicas` independent chains from the constant path x0.
/// Replica i uses noise seed derive_seed(spec.seed, i); results do not depend
/// on the number of workers.
template <GradientModel Model>
Ensemble simulate_ensemble(const Model& model, const OptimizerConfig& cfg, const EnsembleSpec& spec,
                           const Vector& x0) {
    require(spec.replicas >= 1, "replicas >= 1 violated");
    const std::uint64_t n_steps = step_count(spec.horizon, cfg.eta);
    const std::uint64_t every =
        spec.checkpoint_every > 0 ? spec.checkpoint_every : default_checkpoint_every(spec.horizon, cfg.eta);
    const auto checkpoints = checkpoint_steps(n_steps, every);

    Ensemble out;
    for (auto k : checkpoints) out.times.push_back(static_cast<double>(k) * cfg.eta);
    const Vector nan_point = Vector::Constant(x0.size(), std::numeric_limits<double>::quiet_NaN());
    out.positions.assign(checkpoints.size(), std::vector<Vector>(spec.replicas, nan_point));
    out.path_norms.assign(checkpoints.size(),
                          std::vector<double>(spec.replicas, std::numeric_limits<double>::quiet_NaN()));
    out.failures.assign(spec.replicas, "");
    for (std::size_t i = 0; i < spec.replicas; ++i) out.replica_seeds.push_back(derive_seed(spec.seed, i));

    parallel_for(spec.replicas, spec.workers, [&](std::size_t rep) {
        try {
            detail::ReplicaStepper<Model> stepper(model, cfg, spec, x0, out.replica_seeds[rep]);
            RunningRNorm norm(x0.norm(), cfg.drift.r, cfg.eta);
            stepper.seed_fine_norm(x0.norm());
            std::size_t next = 0;
            for (std::uint64_t k = 0; k <= n_steps; ++k) {
                if (next < checkpoints.size() && checkpoints[next] == k) {
                    out.positions[next][rep] = stepper.position();
                    out.path_norms[next][rep] = norm.value();
                    ++next;
                }
                if (k < n_steps) stepper.step(norm, cfg.drift.r);
            }
        } catch (const NumericError& e) {
            out.failures[rep] = e.what();
        }
    });
    return out;
}

/// Pairs of clipped-Adam chains from x0 and x0_prime driven by identical
/// noise; returns rho_r(X_t, X'_t) per checkpoint and replica.
struct CoupledEnsemble {
    std::vector<double> times;
    std::vector<std::vector<double>> distance;  // [checkpoint][replica]
    std::vector<std::vector<Vector>> positions;
    std::vector<std::vector<Vector>> positions_prime;
    std::vector<std::string> failures;
};

template <GradientModel Model>
CoupledEnsemble simulate_coupled(const Model& model, const OptimizerConfig& cfg, const EnsembleSpec& spec,
                                 const Vector& x0, const Vector& x0_prime) {
    require(x0.size() == x0_prime.size(), "coupled: initial points must share a dimension");
    const std::uint64_t n_steps = step_count(spec.horizon, cfg.eta);
    const std::uint64_t every =
        spec.checkpoint_every > 0 ? spec.checkpoint_every : default_checkpoint_every(spec.horizon, cfg.eta);
    const auto checkpoints = checkpoint_steps(n_steps, every);
    CoupledEnsemble out;
    for (auto k : checkpoints) out.times.push_back(static_cast<double>(k) * cfg.eta);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.distance.assign(checkpoints.size(), std::vector<double>(spec.replicas, nan));
    out.positions.assign(checkpoints.size(), std::vector<Vector>(spec.replicas, Vector::Constant(x0.size(), nan)));
    out.positions_prime = out.positions;
    out.failures.assign(spec.replicas, "");

    parallel_for(spec.replicas, spec.workers, [&](std::size_t rep) {
        try {
            const NoiseSource noise(derive_seed(spec.seed, rep));
            ClippedAdamChain<Model> a(model, cfg, x0);
            ClippedAdamChain<Model> b(model, cfg, x0_prime);
            RunningRNorm dist((x0 - x0_prime).norm(), cfg.drift.r, cfg.eta);
            Vector zeta(x0.size());
            std::size_t next = 0;
            for (std::uint64_t k = 0; k <= n_steps; ++k) {
                if (next < checkpoints.size() && checkpoints[next] == k) {
                    out.distance[next][rep] = dist.value();
                    out.positions[next][rep] = a.position();
                    out.positions_prime[next][rep] = b.position();
                    ++next;
                }
                if (k == n_steps) break;
                noise.fill(k, zeta);
                a.step(zeta);
                b.step(zeta);
                dist.advance((a.position() - b.position()).norm());
            }
        } catch (const NumericError& e) {
            out.failures[rep] = e.what();
        }
    });
    return out;
}

/// Clipped-Adam chain with step eta and the continuous chain with fine step h
/// on the same Brownian path: the coarse increment over [k eta, (k+1) eta] is
/// the sum of the fine increments inside it.  Returns terminal positions.
struct DiscretizationPair {
    std::vector<Vector> coarse;
    std::vector<Vector> fine;
    std::vector<std::string> failures;
};

template <GradientModel Model>
DiscretizationPair simulate_discretization_pair(const Model& model, const OptimizerConfig& cfg, double fine_step,
                                                double horizon, std::size_t replicas, std::uint64_t seed,
                                                const Vector& x0, std::size_t workers) {
    const std::uint64_t n_steps = step_count(horizon, cfg.eta);
    DiscretizationPair out;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.coarse.assign(replicas, Vector::Constant(x0.size(), nan));
    out.fine = out.coarse;
    out.failures.assign(replicas, "");
    parallel_for(replicas, workers, [&](std::size_t rep) {
        try {
            const NoiseSource noise(derive_seed(seed, rep));
            ClippedAdamChain<Model> coarse(model, cfg, x0);
            ContinuousChain<Model> fine(model, cfg, fine_step, x0);
            const std::uint64_t sub = fine.substeps();
            Vector zeta(x0.size());
            for (std::uint64_t k = 0; k < n_steps; ++k) {
                noise.fill_aggregated(k * sub, sub, zeta);
                coarse.step(zeta);
                for (std::uint64_t i = 0; i < sub; ++i) {
                    noise.fill(fine.steps(), zeta);
                    fine.step(zeta);
                }
            }
            out.coarse[rep] = coarse.position();
            out.fine[rep] = fine.position();
        } catch (const NumericError& e) {
            out.failures[rep] = e.what();
        }
    });
    return out;
}

}  // namespace clipadam
