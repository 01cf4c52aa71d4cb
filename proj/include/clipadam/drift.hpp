#pragma once

#include "clipadam/core.hpp"
#include "clipadam/path_space.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace clipadam {

/// Constants of the adaptive drift: EMA rates c1 (gradient) and c2 (squared
/// gradient norm), the epsilon under the square root and the path-space
/// decay rate r.  Requires 2 c1 > c2 and min(c1, c2) > r.
struct DriftConfig {
    double c1 = 1.0;
    double c2 = 1.0;
    double epsilon = 1.0;
    double r = 0.1;

    void validate() const {
        require(c1 > 0.0 && c2 > 0.0, "drift: c1 and c2 must be positive");
        require(epsilon > 0.0, "drift: epsilon must be positive");
        require(r > 0.0, "drift: r must be positive");
        require(2.0 * c1 > c2, "2c1 > c2 violated");
        require(std::min(c1, c2) > r, "min(c1, c2) > r violated");
    }

    // Per-step decay factors e^{-c eta}; these are the Adam betas.
    double beta1(double eta) const { return std::exp(-c1 * eta); }
    double beta2(double eta) const { return std::exp(-c2 * eta); }
};

// ---------------------------------------------------------------------------
// Discrete drift H^(eta)
// ---------------------------------------------------------------------------

/// Recursive form of the two sums in H^(eta):
///   s1 = sum_{j <= 0} e^{c1 j eta} grad F(xi(j eta)),
///   s2 = sum_{j <= 0} e^{c2 j eta} |grad F(xi(j eta))|^2.
struct EmaState {
    Vector s1;
    double s2 = 0.0;

    // History xi = x0 for all s <= 0.
    static EmaState constant_history(const Vector& grad0, const DriftConfig& cfg, double eta) {
        return {grad0 / one_minus_exp_neg(cfg.c1 * eta),
                grad0.squaredNorm() / one_minus_exp_neg(cfg.c2 * eta)};
    }
};

inline void ema_update_in_place(EmaState& state, const Vector& new_grad, const DriftConfig& cfg,
                                double eta) {
    state.s1 = cfg.beta1(eta) * state.s1 + new_grad;
    state.s2 = cfg.beta2(eta) * state.s2 + new_grad.squaredNorm();
}

inline EmaState ema_update(EmaState state, const Vector& new_grad, const DriftConfig& cfg,
                           double eta) {
    ema_update_in_place(state, new_grad, cfg, eta);
    return state;
}

inline void drift_from_ema(const EmaState& state, const DriftConfig& cfg, double eta, Vector& out) {
    const double denom = std::sqrt(cfg.epsilon + one_minus_exp_neg(cfg.c2 * eta) * state.s2);
    out = (-one_minus_exp_neg(cfg.c1 * eta) / denom) * state.s1;
}

inline Vector drift_from_ema(const EmaState& state, const DriftConfig& cfg, double eta) {
    Vector out;
    drift_from_ema(state, cfg, eta, out);
    return out;
}

/// EMA sums of a stored path: buffer terms plus the geometric tail
/// sum_{j > J} e^{-c j eta} = e^{-c (J+1) eta} / (1 - e^{-c eta}).
template <typename GradFn>
EmaState ema_from_path(const CrPath& path, GradFn&& grad_fn, const DriftConfig& cfg) {
    const double eta = path.grid_step();
    const double q1 = cfg.beta1(eta);
    const double q2 = cfg.beta2(eta);
    EmaState state{Vector::Zero(path.dim()), 0.0};
    double w1 = 1.0;
    double w2 = 1.0;
    for (std::size_t j = 0; j < path.size(); ++j) {
        const Vector g = grad_fn(path.sample(j));
        state.s1 += w1 * g;
        state.s2 += w2 * g.squaredNorm();
        w1 *= q1;
        w2 *= q2;
    }
    const Vector g_tail = grad_fn(path.tail());
    state.s1 += (w1 / one_minus_exp_neg(cfg.c1 * eta)) * g_tail;
    state.s2 += (w2 / one_minus_exp_neg(cfg.c2 * eta)) * g_tail.squaredNorm();
    return state;
}

/// H^(eta)_F(xi) = -(1 - e^{-c1 eta}) S1 / sqrt(eps + (1 - e^{-c2 eta}) S2),
/// evaluated with eta = path.grid_step().
template <typename GradFn>
Vector drift_discrete(const CrPath& path, GradFn&& grad_fn, const DriftConfig& cfg) {
    return drift_from_ema(ema_from_path(path, grad_fn, cfg), cfg, path.grid_step());
}

// ---------------------------------------------------------------------------
// Continuous drift H
// ---------------------------------------------------------------------------

/// a = c1 int_{-inf}^0 e^{c1 s} grad F(xi(s)) ds,
/// b = c2 int_{-inf}^0 e^{c2 s} |grad F(xi(s))|^2 ds.
struct KernelState {
    Vector a;
    double b = 0.0;

    static KernelState constant_history(const Vector& grad0) { return {grad0, grad0.squaredNorm()}; }
};

inline void drift_continuous(const KernelState& state, const DriftConfig& cfg, Vector& out) {
    out = (-1.0 / std::sqrt(cfg.epsilon + state.b)) * state.a;
}

inline Vector drift_continuous(const KernelState& state, const DriftConfig& cfg) {
    Vector out;
    drift_continuous(state, cfg, out);
    return out;
}

/// Exact solution of da/dt = c1 (g - a), db/dt = c2 (|g|^2 - b) over a step h
/// with g held fixed.
inline void kernel_advance(KernelState& state, const Vector& grad, const DriftConfig& cfg, double h) {
    const double k1 = one_minus_exp_neg(cfg.c1 * h);
    const double k2 = one_minus_exp_neg(cfg.c2 * h);
    state.a += k1 * (grad - state.a);
    state.b += k2 * (grad.squaredNorm() - state.b);
}

namespace detail {

// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace detail

/// Kernel integrals of a stored path: Gauss-Legendre on each grid interval for
/// the linear reading, exact interval weights for sample-and-hold, and the
/// closed form e^{-c J eta} for the constant tail.
template <typename GradFn>
KernelState kernel_from_path(const CrPath& path, GradFn&& grad_fn, const DriftConfig& cfg,
                             PathReading reading = PathReading::Linear) {
    const double eta = path.grid_step();
    const std::size_t J = path.horizon_steps();
    KernelState state{Vector::Zero(path.dim()), 0.0};
    for (std::size_t j = 0; j < J; ++j) {
        const double right = -static_cast<double>(j) * eta;
        if (reading == PathReading::SampleHold) {
            const Vector g = grad_fn(path.sample(j + 1));
            state.a += std::exp(cfg.c1 * right) * one_minus_exp_neg(cfg.c1 * eta) * g;
            state.b += std::exp(cfg.c2 * right) * one_minus_exp_neg(cfg.c2 * eta) * g.squaredNorm();
            continue;
        }
        const Vector& x_right = path.sample(j);
        const Vector& x_left = path.sample(j + 1);
        for (std::size_t k = 0; k < detail::kGaussNodes.size(); ++k) {
            const double u = 0.5 * (detail::kGaussNodes[k] + 1.0);  // 0 at left, 1 at right
            const double s = right - eta + u * eta;
            const Vector g = grad_fn(Vector((1.0 - u) * x_left + u * x_right));
            const double w = 0.5 * eta * detail::kGaussWeights[k];
            state.a += (w * cfg.c1 * std::exp(cfg.c1 * s)) * g;
            state.b += w * cfg.c2 * std::exp(cfg.c2 * s) * g.squaredNorm();
        }
    }
    const double tail_start = -static_cast<double>(J) * eta;
    const Vector g_tail = grad_fn(path.tail());
    state.a += std::exp(cfg.c1 * tail_start) * g_tail;
    state.b += std::exp(cfg.c2 * tail_start) * g_tail.squaredNorm();
    return state;
}

template <typename GradFn>
Vector drift_continuous(const CrPath& path, GradFn&& grad_fn, const DriftConfig& cfg,
                        PathReading reading = PathReading::Linear) {
    return drift_continuous(kernel_from_path(path, grad_fn, cfg, reading), cfg);
}

}  // namespace clipadam
