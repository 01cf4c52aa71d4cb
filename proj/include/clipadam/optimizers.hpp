#pragma once

#include "clipadam/core.hpp"
#include "clipadam/drift.hpp"
#include "clipadam/noise.hpp"
#include "clipadam/path_space.hpp"

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace clipadam {

/// Anything exposing grad L_n (the adaptive part of the drift) and grad R.
template <typename M>
concept GradientModel = requires(const M& m, const Vector& x, Vector& out) {
    m.loss_gradient(x, out);
    m.regularizer_gradient(x, out);
};

/// Gradient model assembled from two callables; used for synthetic objectives.
struct FunctionModel {
    std::function<Vector(const Vector&)> loss;
    std::function<Vector(const Vector&)> regularizer;

    void loss_gradient(const Vector& x, Vector& out) const {
        if (loss) out = loss(x); else out.setZero(x.size());
    }
    void regularizer_gradient(const Vector& x, Vector& out) const {
        if (regularizer) out = regularizer(x); else out.setZero(x.size());
    }
};

struct OptimizerConfig {
    double eta = 0.05;
    double beta = 10.0;  // inverse temperature; +inf switches the noise off
    DriftConfig drift;
    std::uint64_t seed = 0;

    double noise_scale(double dt) const {
        return std::isinf(beta) ? 0.0 : std::sqrt(2.0 * dt / beta);
    }

    // `dissipativity_m` <= 0 skips the problem-dependent checks.
    void validate(double dissipativity_m = 0.0) const {
        drift.validate();
        require(eta > 0.0 && eta <= 1.0, "eta in (0, 1] violated");
        require(beta > 0.0, "beta > 0 violated");
        if (dissipativity_m > 0.0) {
            std::ostringstream msg;
            msg << "beta >= 2/m violated (beta=" << beta << ", 2/m=" << 2.0 / dissipativity_m << ")";
            require(beta >= 2.0 / dissipativity_m, msg.str());
            std::ostringstream msg_r;
            msg_r << "m/3 > r violated (m/3=" << dissipativity_m / 3.0 << ", r=" << drift.r << ")";
            require(dissipativity_m / 3.0 > drift.r, msg_r.str());
        }
    }
};

namespace detail {

inline void check_finite(const Vector& v, const char* what, std::uint64_t step) {
    if (!v.allFinite()) {
        throw NumericError(std::string(what) + ": non-finite state at step " + std::to_string(step));
    }
}

template <GradientModel Model>
Vector model_loss_gradient(const Model& model, const Vector& x) {
    Vector g(x.size());
    model.loss_gradient(x, g);
    return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Smooth-clipped Adam (discrete functional SDE)
// ---------------------------------------------------------------------------

/// One eta-step of the discrete dynamics: drift H^(eta) from the EMA sums and
/// grad R are frozen at the grid point, so the step is an exact Gaussian
/// increment given the history.
template <GradientModel Model>
std::pair<Vector, EmaState> step_clipped_adam(const Vector& x, const EmaState& ema, const Model& model,
                                              const OptimizerConfig& cfg, const Vector& zeta) {
    Vector drift;
    drift_from_ema(ema, cfg.drift, cfg.eta, drift);
    Vector reg_grad(x.size());
    model.regularizer_gradient(x, reg_grad);
    Vector next = x + cfg.eta * (drift - reg_grad) + cfg.noise_scale(cfg.eta) * zeta;
    detail::check_finite(next, "clipped_adam", 0);
    Vector g(x.size());
    model.loss_gradient(next, g);
    detail::check_finite(g, "clipped_adam gradient", 0);
    return {std::move(next), ema_update(ema, g, cfg.drift, cfg.eta)};
}

template <GradientModel Model>
class ClippedAdamChain {
public:
    // Constant initial path xi = x0.
    ClippedAdamChain(const Model& model, const OptimizerConfig& cfg, const Vector& x0)
        : model_(&model), cfg_(cfg), x_(x0), drift_(x0.size()), scratch_(x0.size()) {
        model.loss_gradient(x0, scratch_);
        ema_ = EmaState::constant_history(scratch_, cfg.drift, cfg.eta);
    }

    ClippedAdamChain(const Model& model, const OptimizerConfig& cfg, const CrPath& initial)
        : model_(&model), cfg_(cfg), x_(initial.current()), drift_(initial.dim()), scratch_(initial.dim()) {
        require(std::abs(initial.grid_step() - cfg.eta) <= 1e-12 * cfg.eta,
                "clipped_adam: initial path grid_step must equal eta");
        ema_ = ema_from_path(initial, [&](const Vector& p) { return detail::model_loss_gradient(model, p); },
                             cfg.drift);
    }

    void step(const Vector& zeta) {
        drift_from_ema(ema_, cfg_.drift, cfg_.eta, drift_);
        model_->regularizer_gradient(x_, scratch_);
        x_ += cfg_.eta * (drift_ - scratch_) + cfg_.noise_scale(cfg_.eta) * zeta;
        detail::check_finite(x_, "clipped_adam", steps_);
        model_->loss_gradient(x_, scratch_);
        detail::check_finite(scratch_, "clipped_adam gradient", steps_);
        ema_update_in_place(ema_, scratch_, cfg_.drift, cfg_.eta);
        ++steps_;
    }

    const Vector& position() const { return x_; }
    const EmaState& ema() const { return ema_; }
    Vector drift() const { return drift_from_ema(ema_, cfg_.drift, cfg_.eta); }
    std::uint64_t steps() const { return steps_; }

private:
    const Model* model_;
    OptimizerConfig cfg_;
    Vector x_;
    EmaState ema_;
    Vector drift_;
    Vector scratch_;
    std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Continuous-time limit
// ---------------------------------------------------------------------------

/// Euler-Maruyama on X with fine step h, coupled to the exact exponential
/// update of the kernel ODEs da/dt = c1 (grad F(X) - a), db/dt = c2 (|grad F(X)|^2 - b)
/// using the left-endpoint gradient.
template <GradientModel Model>
class ContinuousChain {
public:
    ContinuousChain(const Model& model, const OptimizerConfig& cfg, double fine_step, const Vector& x0)
        : model_(&model), cfg_(cfg), h_(fine_step), x_(x0), drift_(x0.size()), grad_(x0.size()),
          reg_(x0.size()) {
        check_step();
        model.loss_gradient(x0, grad_);
        kernel_ = KernelState::constant_history(grad_);
    }

    ContinuousChain(const Model& model, const OptimizerConfig& cfg, double fine_step, const CrPath& initial,
                    PathReading reading = PathReading::Linear)
        : model_(&model), cfg_(cfg), h_(fine_step), x_(initial.current()), drift_(initial.dim()),
          grad_(initial.dim()), reg_(initial.dim()) {
        check_step();
        kernel_ = kernel_from_path(initial, [&](const Vector& p) { return detail::model_loss_gradient(model, p); },
                                   cfg.drift, reading);
    }

    // Fine steps per eta-interval.
    std::uint64_t substeps() const { return substeps_; }
    double fine_step() const { return h_; }

    void step(const Vector& zeta) {
        drift_continuous(kernel_, cfg_.drift, drift_);
        model_->regularizer_gradient(x_, reg_);
        model_->loss_gradient(x_, grad_);
        detail::check_finite(grad_, "continuous gradient", steps_);
        x_ += h_ * (drift_ - reg_) + cfg_.noise_scale(h_) * zeta;
        detail::check_finite(x_, "continuous", steps_);
        kernel_advance(kernel_, grad_, cfg_.drift, h_);
        ++steps_;
    }

    const Vector& position() const { return x_; }
    const KernelState& kernel() const { return kernel_; }
    std::uint64_t steps() const { return steps_; }

private:
    void check_step() {
        require(h_ > 0.0 && h_ <= cfg_.eta / 4.0, "continuous: fine step must satisfy 0 < h <= eta/4");
        const double ratio = cfg_.eta / h_;
        substeps_ = static_cast<std::uint64_t>(std::llround(ratio));
        require(std::abs(ratio - static_cast<double>(substeps_)) < 1e-9 * ratio,
                "continuous: eta must be an integer multiple of the fine step");
    }

    const Model* model_;
    OptimizerConfig cfg_;
    double h_;
    std::uint64_t substeps_ = 1;
    Vector x_;
    KernelState kernel_;
    Vector drift_;
    Vector grad_;
    Vector reg_;
    std::uint64_t steps_ = 0;
};

/// Integrates the continuous dynamics over [0, T] and returns X at the
/// multiples of eta (starting with X(0)).  Fine step i uses noise draw i.
template <GradientModel Model>
std::vector<Vector> integrate_continuous(const CrPath& initial, const Model& model, const OptimizerConfig& cfg,
                                         double fine_step, double horizon, const NoiseSource& noise) {
    ContinuousChain<Model> chain(model, cfg, fine_step, initial);
    const auto n_coarse = static_cast<std::uint64_t>(std::llround(horizon / cfg.eta));
    std::vector<Vector> out{chain.position()};
    Vector zeta(initial.dim());
    for (std::uint64_t k = 0; k < n_coarse; ++k) {
        for (std::uint64_t i = 0; i < chain.substeps(); ++i) {
            noise.fill(chain.steps(), zeta);
            chain.step(zeta);
        }
        out.push_back(chain.position());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Langevin baselines
// ---------------------------------------------------------------------------

/// x' = x - eta grad(L_n + R)(x) + sqrt(2 eta / beta) zeta
template <GradientModel Model>
Vector step_sgld(const Vector& x, const Model& model, const OptimizerConfig& cfg, const Vector& zeta) {
    Vector g(x.size()), r(x.size());
    model.loss_gradient(x, g);
    model.regularizer_gradient(x, r);
    Vector next = x - cfg.eta * (g + r) + cfg.noise_scale(cfg.eta) * zeta;
    detail::check_finite(next, "sgld", 0);
    return next;
}

/// Langevin step with the adaptive scale frozen at c(eps):
/// y' = y - eta (grad L_n(y) / c_eps + grad R(y)) + sqrt(2 eta / beta) zeta
template <GradientModel Model>
Vector step_frozen_sgld(const Vector& y, double frozen_scale, const Model& model, const OptimizerConfig& cfg,
                        const Vector& zeta) {
    require(frozen_scale >= std::sqrt(cfg.drift.epsilon) * (1.0 - 1e-12),
            "frozen_sgld: c(eps) >= sqrt(eps) violated");
    Vector g(y.size()), r(y.size());
    model.loss_gradient(y, g);
    model.regularizer_gradient(y, r);
    Vector next = y - cfg.eta * (g / frozen_scale + r) + cfg.noise_scale(cfg.eta) * zeta;
    detail::check_finite(next, "frozen_sgld", 0);
    return next;
}

// c(eps) = (eps + |grad L_n(x)|^2)^{1/2}
template <GradientModel Model>
double frozen_scale_at(const Model& model, const Vector& x, double epsilon) {
    Vector g(x.size());
    model.loss_gradient(x, g);
    return std::sqrt(epsilon + g.squaredNorm());
}

// ---------------------------------------------------------------------------
// Classic Adam (coordinate-wise), kept for comparison
// ---------------------------------------------------------------------------

struct AdamState {
    Vector m;
    Vector v;
    Vector theta;
    std::uint64_t k = 0;  // completed steps

    static AdamState start(const Vector& theta0) {
        return {Vector::Zero(theta0.size()), Vector::Zero(theta0.size()), theta0, 0};
    }
};

struct AdamParams {
    double eta = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool bias_correction = true;
};

/// m = b1 m + (1 - b1) g, v = b2 v + (1 - b2) g*g, theta -= eta m_hat / sqrt(v_hat + eps)
/// with g = grad F(theta) at the current iterate.
template <typename GradFn>
AdamState step_adam_classic(AdamState state, GradFn&& grad_fn, const AdamParams& p) {
    require(p.beta1 >= 0.0 && p.beta1 < 1.0 && p.beta2 >= 0.0 && p.beta2 < 1.0,
            "adam: beta1, beta2 must lie in [0, 1)");
    const Vector g = grad_fn(state.theta);
    state.k += 1;
    state.m = p.beta1 * state.m + (1.0 - p.beta1) * g;
    state.v = p.beta2 * state.v + (1.0 - p.beta2) * g.cwiseProduct(g);
    const double kd = static_cast<double>(state.k);
    const double corr1 = p.bias_correction ? 1.0 - std::pow(p.beta1, kd) : 1.0;
    const double corr2 = p.bias_correction ? 1.0 - std::pow(p.beta2, kd) : 1.0;
    const Eigen::ArrayXd m_hat = state.m.array() / corr1;
    const Eigen::ArrayXd v_hat = state.v.array() / corr2;
    state.theta -= (p.eta * m_hat / (v_hat + p.epsilon).sqrt()).matrix();
    detail::check_finite(state.theta, "adam", state.k);
    return state;
}

}  // namespace clipadam
