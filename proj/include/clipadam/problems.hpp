#pragma once

#include "clipadam/core.hpp"
#include "clipadam/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace clipadam {

// ---------------------------------------------------------------------------
// Loss functions
// ---------------------------------------------------------------------------

/// Per-sample loss l(w; z) with certified constants: grad_bound_A bounds
/// |grad l| everywhere and smoothness_M is a Lipschitz constant of grad l.
struct LossSpec {
    std::string name;
    Eigen::Index dimension = 0;
    std::function<double(const Vector& w, const Vector& z)> eval;
    // out += weight * grad l(w; z)
    std::function<void(const Vector& w, const Vector& z, double weight, Vector& out)> add_grad;
    double smoothness_M = 0.0;
    double grad_bound_A = 0.0;
    double origin_bound = 0.0;

    Vector grad(const Vector& w, const Vector& z) const {
        Vector out = Vector::Zero(dimension);
        add_grad(w, z, 1.0, out);
        return out;
    }
};

/// Quintic smoothstep weight equal to 1 for |w| <= inner and 0 for |w| >= outer.
struct RadialFade {
    double inner;
    double outer;

    static constexpr double kMaxSlope = 1.875;                // max |S'|
    static constexpr double kMaxCurvature = 5.773502691896258;  // 10 / sqrt(3) = max |S''|

    double width() const { return outer - inner; }

    // (chi, d chi / d rho)
    std::pair<double, double> weight(double rho) const {
        if (rho <= inner) return {1.0, 0.0};
        if (rho >= outer) return {0.0, 0.0};
        const double t = (outer - rho) / width();
        const double s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
        const double ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        return {s, -ds / width()};
    }
};

/// Blends l(w; z) into the constant `level` across the fade band so that
/// grad l vanishes for |w| >= outer:
///   l_f = chi(|w|) l + (1 - chi(|w|)) level.
struct FadedLoss {
    RadialFade fade;
    double level;

    double value(double raw, double rho) const {
        const auto [chi, dchi] = fade.weight(rho);
        (void)dchi;
        return chi * raw + (1.0 - chi) * level;
    }

    // out += weight * grad l_f given raw value and raw gradient at w.
    void add_grad(const Vector& w, double raw, const Vector& raw_grad, double weight,
                  Vector& out) const {
        const double rho = w.norm();
        const auto [chi, dchi] = fade.weight(rho);
        if (chi == 0.0) return;
        out += (weight * chi) * raw_grad;
        if (dchi != 0.0) out += (weight * dchi * (raw - level) / rho) * w;
    }

    // Certified constants of the faded loss from constants of the raw loss on
    // the ball |w| <= outer and D = sup over the band of |l - level|.
    double grad_bound(double raw_A, double band_gap) const {
        return raw_A + RadialFade::kMaxSlope / fade.width() * band_gap;
    }
    double smoothness(double raw_M, double raw_A, double band_gap) const {
        const double w = fade.width();
        return raw_M + 2.0 * RadialFade::kMaxSlope / w * raw_A +
               band_gap * (RadialFade::kMaxCurvature / (w * w) +
                           RadialFade::kMaxSlope / (w * fade.inner));
    }
};

inline RadialFade fade_for_radius(double radius_K) {
    const double width = std::min(1.0, 0.5 * radius_K);
    return RadialFade{radius_K - width, radius_K};
}

// ---------------------------------------------------------------------------
// Dissipative regularizer
// ---------------------------------------------------------------------------

/// R(x) = lambda ((|x|^2 + 1)^{1/2} - (K^2 + 1)^{1/2})^2 for |x| > K, else 0.
struct RegularizerSpec {
    double radius_K = 1.0;
    double scale_lambda = 1.0;
    double dissipativity_m = 0.0;
    double dissipativity_b = 0.0;
    double smoothness_MR = 0.0;

    double eval(const Vector& x) const {
        const double rho = x.norm();
        if (rho <= radius_K) return 0.0;
        const double gap = std::sqrt(rho * rho + 1.0) - std::sqrt(radius_K * radius_K + 1.0);
        return scale_lambda * gap * gap;
    }

    // out += weight * grad R(x)
    void add_grad(const Vector& x, double weight, Vector& out) const {
        const double rho2 = x.squaredNorm();
        if (rho2 <= radius_K * radius_K) return;
        const double s = std::sqrt(rho2 + 1.0);
        const double coeff = 2.0 * scale_lambda * (1.0 - std::sqrt(radius_K * radius_K + 1.0) / s);
        out += (weight * coeff) * x;
    }

    Vector grad(const Vector& x) const {
        Vector out = Vector::Zero(x.size());
        add_grad(x, 1.0, out);
        return out;
    }

    // <grad R(x), x> as a function of |x|.
    double radial_inner(double rho) const {
        if (rho <= radius_K) return 0.0;
        const double s = std::sqrt(rho * rho + 1.0);
        return 2.0 * scale_lambda * (1.0 - std::sqrt(radius_K * radius_K + 1.0) / s) * rho * rho;
    }
};

/// Builds R with certified constants.  For |x| >= K + 1,
/// <grad R, x> >= 2 lambda c0 |x|^2 with c0 = 1 - sqrt(K^2+1)/sqrt((K+1)^2+1);
/// b is the largest deficit m|x|^2 - <grad R, x> over |x| <= K + 1.
inline RegularizerSpec build_regularizer(double radius_K, double scale_lambda, Eigen::Index dim) {
    require(radius_K > 0.0, "build_regularizer: K must be positive");
    require(scale_lambda > 0.0, "build_regularizer: lambda must be positive");
    require(dim >= 1, "build_regularizer: dimension must be at least 1");
    RegularizerSpec reg;
    reg.radius_K = radius_K;
    reg.scale_lambda = scale_lambda;
    const double sK = std::sqrt(radius_K * radius_K + 1.0);
    const double sK1 = std::sqrt((radius_K + 1.0) * (radius_K + 1.0) + 1.0);
    const double c0 = 1.0 - sK / sK1;
    reg.dissipativity_m = 2.0 * scale_lambda * c0;
    // Hessian eigenvalues are 2 lambda (1 - sK/s) and 2 lambda (1 - sK/s^3), both < 2 lambda.
    reg.smoothness_MR = 2.0 * scale_lambda;

    const double m = reg.dissipativity_m;
    auto deficit = [&](double rho) { return m * rho * rho - reg.radial_inner(rho); };
    constexpr int kGrid = 20000;
    double best_rho = radius_K;
    double best = deficit(radius_K);
    for (int i = 0; i <= kGrid; ++i) {
        const double rho = radius_K + static_cast<double>(i) / kGrid;
        const double value = deficit(rho);
        if (value > best) {
            best = value;
            best_rho = rho;
        }
    }
    // Golden-section refinement around the grid maximum.
    double lo = std::max(radius_K, best_rho - 1.0 / kGrid);
    double hi = std::min(radius_K + 1.0, best_rho + 1.0 / kGrid);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
        const double a = hi - inv_phi * (hi - lo);
        const double b = lo + inv_phi * (hi - lo);
        if (deficit(a) > deficit(b)) hi = b; else lo = a;
    }
    best = std::max(best, deficit(0.5 * (lo + hi)));
    reg.dissipativity_b = best * (1.0 + 1e-9) + 1e-12;
    return reg;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    std::string family;  // "double_well", "sinusoidal", "logistic", "quadratic", "flat", "csv"
    std::uint64_t seed = 0;
    std::size_t size = 0;
};

struct Dataset {
    std::vector<Vector> points;
    GeneratorSpec generator;

    std::size_t size() const { return points.size(); }
    Eigen::Index width() const { return points.empty() ? 0 : points.front().size(); }
};

// Standard normal truncated to [-bound, bound] by counter-keyed rejection.
inline double truncated_normal(const NoiseSource& src, std::uint64_t index,
                               std::uint64_t coordinate, double bound) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const double z = src.normal(index, 2 * ((coordinate << 16) + attempt));
        if (std::abs(z) <= bound) return z;
    }
}

/// Plain CSV, one point per row, no header.
inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset: cannot open " + path);
    Dataset data;
    data.generator.family = "csv";
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                throw ConfigError("dataset: non-numeric value on row " + std::to_string(row));
            }
            values.push_back(v);
        }
        Vector point = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        if (!data.points.empty() && point.size() != data.width()) {
            throw ConfigError("dataset: row " + std::to_string(row) + " has a different width");
        }
        data.points.push_back(std::move(point));
    }
    if (data.points.empty()) throw ConfigError("dataset: " + path + " holds no rows");
    data.generator.size = data.points.size();
    return data;
}

// ---------------------------------------------------------------------------
// Empirical loss
// ---------------------------------------------------------------------------

inline double empirical_loss(const LossSpec& loss, const Dataset& data, const Vector& w) {
    require(data.size() > 0, "empirical_loss: dataset is empty");
    double sum = 0.0;
    for (const auto& z : data.points) sum += loss.eval(w, z);
    return sum / static_cast<double>(data.size());
}

inline Vector empirical_grad(const LossSpec& loss, const Dataset& data, const Vector& w) {
    require(data.size() > 0, "empirical_grad: dataset is empty");
    Vector out = Vector::Zero(w.size());
    const double weight = 1.0 / static_cast<double>(data.size());
    for (const auto& z : data.points) loss.add_grad(w, z, weight, out);
    return out;
}

// ---------------------------------------------------------------------------
// Built-in problems
// ---------------------------------------------------------------------------

struct ProblemParams {
    std::string name = "double_well";
    Eigen::Index dim = 1;
    std::size_t n = 64;
    double radius_K = 3.0;
    double lambda = 1.0;
    std::uint64_t data_seed = 1;
    // double_well: l = height (|w|^2 - 1)^2 + <z, w>, z = tilt * 1 + data_noise * N
    double height = 1.0;
    double tilt = 0.0;
    double data_noise = 0.1;
    // sinusoidal: z ~ N(0, sigma^2 I) truncated coordinate-wise at truncation * sigma
    double sigma = 1.0;
    double truncation = 6.0;
    // logistic: features uniform in the cube of half-width feature_bound / sqrt(d)
    double feature_bound = 1.0;
    // quadratic: l = curvature / 2 |w - z|^2, z ~ N(tilt, data_noise^2)
    double curvature = 1.0;
    std::string dataset_csv;
};


/// Loss, data and regularizer of one optimization problem, plus the expected
/// loss L (analytic where available, otherwise a frozen reference sample).
struct Problem {
    std::string name;
    ProblemParams params;
    LossSpec loss;
    Dataset data;
    RegularizerSpec reg;
    std::function<double(const Vector&)> expected;
    bool expected_is_analytic = true;
    std::size_t expected_reference_size = 0;

    // Unfaded per-sample loss; `loss` is the faded version when `fade` is set.
    std::function<double(const Vector& w, const Vector& z)> raw_eval;
    std::function<void(const Vector& w, const Vector& z, double weight, Vector& out)> raw_add_grad;
    std::optional<FadedLoss> fade;

    Eigen::Index dim() const { return loss.dimension; }

    // grad L_n(w) written into out.  With a fade the raw mean is blended once
    // instead of per sample (the saturation level does not depend on z).
    void loss_gradient(const Vector& w, Vector& out) const {
        out.setZero(w.size());
        const double weight = 1.0 / static_cast<double>(data.size());
        if (!fade) {
            for (const auto& z : data.points) loss.add_grad(w, z, weight, out);
            return;
        }
        const double rho = w.norm();
        if (rho >= fade->fade.outer) return;
        Vector raw = Vector::Zero(w.size());
        double value = 0.0;
        for (const auto& z : data.points) {
            raw_add_grad(w, z, weight, raw);
            if (rho > fade->fade.inner) value += weight * raw_eval(w, z);
        }
        fade->add_grad(w, value, raw, 1.0, out);
    }
    Vector loss_gradient(const Vector& w) const {
        Vector out(w.size());
        loss_gradient(w, out);
        return out;
    }

    void regularizer_gradient(const Vector& w, Vector& out) const {
        out.setZero(w.size());
        reg.add_grad(w, 1.0, out);
    }
    Vector regularizer_gradient(const Vector& w) const { return reg.grad(w); }

    double empirical(const Vector& w) const { return empirical_loss(loss, data, w); }
    double regularizer(const Vector& w) const { return reg.eval(w); }
};

inline double expected_loss(const Problem& problem, const Vector& w) {
    require(static_cast<bool>(problem.expected), "expected_loss: problem has no expectation");
    return problem.expected(w);
}

namespace detail {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Variance of N(0, 1) truncated to [-t, t].
inline double truncated_unit_variance(double t) {
    const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    return 1.0 - 2.0 * t * pdf / (2.0 * norm_cdf(t) - 1.0);
}

inline double sigmoid(double a) {
    return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

inline double softplus(double a) {
    return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

// Installs the radial fade on a problem whose loss/expected currently hold the raw versions.
inline void attach_fade(Problem& p, double level, double raw_A, double raw_M, double band_gap) {
    const FadedLoss faded{fade_for_radius(p.params.radius_K), level};
    p.raw_eval = p.loss.eval;
    p.raw_add_grad = p.loss.add_grad;
    auto raw_eval = p.raw_eval;
    auto raw_add_grad = p.raw_add_grad;
    const Eigen::Index dim = p.loss.dimension;
    p.loss.eval = [faded, raw_eval](const Vector& w, const Vector& z) {
        return faded.value(raw_eval(w, z), w.norm());
    };
    p.loss.add_grad = [faded, raw_eval, raw_add_grad, dim](const Vector& w, const Vector& z,
                                                           double weight, Vector& out) {
        Vector g = Vector::Zero(dim);
        raw_add_grad(w, z, 1.0, g);
        faded.add_grad(w, raw_eval(w, z), g, weight, out);
    };
    p.loss.grad_bound_A = faded.grad_bound(raw_A, band_gap);
    p.loss.smoothness_M = faded.smoothness(raw_M, raw_A, band_gap);
    auto expected_raw = p.expected;
    p.expected = [faded, expected_raw](const Vector& w) {
        return faded.value(expected_raw(w), w.norm());
    };
    p.fade = faded;
}

inline Dataset shifted_noise_data(const ProblemParams& prm, Eigen::Index width, double centre,
                                  double scale, double truncation) {
    Dataset data;
    data.generator = {prm.name, prm.data_seed, prm.n};
    const NoiseSource src(prm.data_seed);
    data.points.reserve(prm.n);
    for (std::size_t i = 0; i < prm.n; ++i) {
        Vector z(width);
        for (Eigen::Index k = 0; k < width; ++k) {
            z[k] = centre + scale * truncated_normal(src, i, static_cast<std::uint64_t>(k), truncation);
        }
        data.points.push_back(std::move(z));
    }
    return data;
}

inline Dataset logistic_data(Eigen::Index d, double bound, std::uint64_t seed, std::size_t n) {
    Dataset data;
    data.generator = {"logistic", seed, n};
    const NoiseSource src(seed);
    const double half_width = bound / std::sqrt(static_cast<double>(d));
    data.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vector z(d + 1);
        double margin = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            z[k] = (2.0 * src.uniform(i, static_cast<std::uint64_t>(k)) - 1.0) * half_width;
            margin += (k % 2 == 0 ? 2.0 : -2.0) * z[k];
        }
        z[d] = src.uniform(i, static_cast<std::uint64_t>(d)) < sigmoid(margin) ? 1.0 : 0.0;
        data.points.push_back(std::move(z));
    }
    return data;
}

}  // namespace detail

/// Built-in problems: "double_well", "sinusoidal", "logistic" (all with the
/// gradient faded to zero across [K - 1, K]), "quadratic" (raw, unbounded
/// gradient) and "flat" (l = 0).
inline Problem make_problem(const ProblemParams& prm) {
    require(prm.dim >= 1, "problem.dim must be at least 1");
    require(prm.n >= 1 || !prm.dataset_csv.empty(), "problem.n must be at least 1");
    require(prm.radius_K > 0.0, "problem.K must be positive");
    Problem p;
    p.name = prm.name;
    p.params = prm;
    p.reg = build_regularizer(prm.radius_K, prm.lambda, prm.dim);
    p.loss.name = prm.name;
    p.loss.dimension = prm.dim;
    const double d = static_cast<double>(prm.dim);
    const double K = prm.radius_K;

    if (prm.name == "double_well") {
        require(prm.height > 0.0, "problem.height must be positive");
        constexpr double kTrunc = 3.0;
        p.data = detail::shifted_noise_data(prm, prm.dim, prm.tilt, prm.data_noise, kTrunc);
        const double h = prm.height;
        p.loss.eval = [h](const Vector& w, const Vector& z) {
            const double q = w.squaredNorm() - 1.0;
            return h * q * q + z.dot(w);
        };
        p.loss.add_grad = [h](const Vector& w, const Vector& z, double weight, Vector& out) {
            out += (weight * 4.0 * h * (w.squaredNorm() - 1.0)) * w + weight * z;
        };
        const double tilt = prm.tilt;
        p.expected = [h, tilt](const Vector& w) {
            const double q = w.squaredNorm() - 1.0;
            return h * q * q + tilt * w.sum();
        };
        const double zmax = (std::abs(prm.tilt) + kTrunc * prm.data_noise) * std::sqrt(d);
        auto radial = [](double rho) { return rho * std::abs(rho * rho - 1.0); };
        const double raw_A =
            4.0 * h * std::max(radial(std::min(K, 1.0 / std::sqrt(3.0))), radial(K)) + zmax;
        const double raw_M = 4.0 * h * std::max(std::abs(3.0 * K * K - 1.0), 1.0);
        const double level = h * std::max(1.0, (K * K - 1.0) * (K * K - 1.0)) + K * zmax;
        p.loss.origin_bound = h;
        detail::attach_fade(p, level, raw_A, raw_M, level + K * zmax);
    } else if (prm.name == "sinusoidal") {
        require(prm.sigma > 0.0, "problem.sigma must be positive");
        p.data = detail::shifted_noise_data(prm, prm.dim, 0.0, prm.sigma, prm.truncation);
        p.loss.eval = [](const Vector& w, const Vector& z) { return 1.0 - std::cos(w.dot(z)); };
        p.loss.add_grad = [](const Vector& w, const Vector& z, double weight, Vector& out) {
            out += (weight * std::sin(w.dot(z))) * z;
        };
        const double s2 = prm.sigma * prm.sigma;
        p.expected = [s2](const Vector& w) { return 1.0 - std::exp(-0.5 * s2 * w.squaredNorm()); };
        const double zmax = prm.sigma * prm.truncation * std::sqrt(d);
        p.loss.origin_bound = 0.0;
        detail::attach_fade(p, 2.0, zmax, zmax * zmax, 2.0);
    } else if (prm.name == "logistic") {
        require(prm.feature_bound > 0.0, "problem.feature_bound must be positive");
        const Eigen::Index dim = prm.dim;
        p.data = detail::logistic_data(dim, prm.feature_bound, prm.data_seed, prm.n);
        p.loss.eval = [dim](const Vector& w, const Vector& z) {
            const double a = w.dot(z.head(dim));
            return detail::softplus(a) - z[dim] * a;
        };
        p.loss.add_grad = [dim](const Vector& w, const Vector& z, double weight, Vector& out) {
            const double a = w.dot(z.head(dim));
            out += (weight * (detail::sigmoid(a) - z[dim])) * z.head(dim);
        };
        constexpr std::size_t kReference = 1000000;
        auto reference = std::make_shared<Dataset>();
        auto once = std::make_shared<std::once_flag>();
        const double bound = prm.feature_bound;
        const std::uint64_t ref_seed = mix64(prm.data_seed ^ 0x7265666572656e63ULL);
        auto eval = p.loss.eval;
        p.expected = [=](const Vector& w) {
            std::call_once(*once, [&] { *reference = detail::logistic_data(dim, bound, ref_seed, kReference); });
            double sum = 0.0;
            for (const auto& z : reference->points) sum += eval(w, z);
            return sum / static_cast<double>(reference->size());
        };
        p.expected_is_analytic = false;
        p.expected_reference_size = kReference;
        const double B = prm.feature_bound;
        const double level = K * B + std::log(2.0);
        p.loss.origin_bound = std::log(2.0);
        detail::attach_fade(p, level, B, 0.25 * B * B, level);
    } else if (prm.name == "quadratic") {
        constexpr double kTrunc = 3.0;
        p.data = detail::shifted_noise_data(prm, prm.dim, prm.tilt, prm.data_noise, kTrunc);
        const double kappa = prm.curvature;
        p.loss.eval = [kappa](const Vector& w, const Vector& z) { return 0.5 * kappa * (w - z).squaredNorm(); };
        p.loss.add_grad = [kappa](const Vector& w, const Vector& z, double weight, Vector& out) {
            out += (weight * kappa) * (w - z);
        };
        const double tilt = prm.tilt;
        const double var = prm.data_noise * prm.data_noise * detail::truncated_unit_variance(kTrunc);
        p.expected = [kappa, tilt, var](const Vector& w) {
            return 0.5 * kappa * ((w.array() - tilt).matrix().squaredNorm() + var * static_cast<double>(w.size()));
        };
        const double zmax = (std::abs(prm.tilt) + kTrunc * prm.data_noise) * std::sqrt(d);
        // Valid on the ball only: this loss deliberately violates the global bound.
        p.loss.grad_bound_A = kappa * (K + zmax);
        p.loss.smoothness_M = kappa;
        p.loss.origin_bound = 0.5 * kappa * zmax * zmax;
        p.raw_eval = p.loss.eval;
        p.raw_add_grad = p.loss.add_grad;
    } else if (prm.name == "flat") {
        p.data.generator = {"flat", prm.data_seed, prm.n};
        p.data.points.assign(prm.n, Vector::Zero(prm.dim));
        p.loss.eval = [](const Vector&, const Vector&) { return 0.0; };
        p.loss.add_grad = [](const Vector&, const Vector&, double, Vector&) {};
        p.expected = [](const Vector&) { return 0.0; };
        p.loss.grad_bound_A = 1.0;
        p.loss.smoothness_M = 1.0;
        p.loss.origin_bound = 0.0;
        p.raw_eval = p.loss.eval;
        p.raw_add_grad = p.loss.add_grad;
    } else {
        throw ConfigError("unknown problem id '" + prm.name + "'");
    }

    if (!prm.dataset_csv.empty()) {
        Dataset external = read_dataset_csv(prm.dataset_csv);
        const Eigen::Index expected_width = p.data.points.empty() ? prm.dim : p.data.width();
        require(external.width() == expected_width,
                "dataset csv width does not match problem '" + prm.name + "'");
        p.data = std::move(external);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Numeric audit of the loss / regularizer assumptions
// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string name;
    double empirical = 0.0;
    double certified = 0.0;
    bool passed = false;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    const AssumptionCheck& at(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) return c;
        }
        throw ConfigError("validation report has no check '" + name + "'");
    }
};

/// Samples points out to radius 2(K + 1) and audits: |grad l| <= A, gradient
/// Lipschitz ratio <= M, min over shells of (<grad R, x> + b)/|x|^2 >= m, and
/// grad l(x; z) = 0 wherever grad R(x) != 0.
inline ValidationReport validate_assumptions(const LossSpec& loss, const RegularizerSpec& reg,
                                             const Dataset& data, std::size_t sample_budget,
                                             std::uint64_t seed = 7) {
    require(sample_budget >= 1000, "validate_assumptions: budget must be at least 1000 samples");
    require(data.size() > 0, "validate_assumptions: dataset is empty");
    const NoiseSource src(seed);
    const Eigen::Index d = loss.dimension;
    const double outer = 2.0 * (reg.radius_K + 1.0);
    auto random_point = [&](std::uint64_t i, double radius) {
        Vector x(d);
        src.fill(i, x);
        const double n = x.norm();
        return n > 0.0 ? Vector(x * (radius / n)) : Vector(Vector::Zero(d));
    };

    double max_grad = 0.0;
    double max_ratio = 0.0;
    double min_dissipative = std::numeric_limits<double>::infinity();
    double max_disjoint = 0.0;
    for (std::uint64_t i = 0; i < sample_budget; ++i) {
        const double radius = outer * src.uniform(i, 0);
        const Vector w = random_point(i, radius);
        const Vector& z = data.points[static_cast<std::size_t>(src.uniform(i, 1) * static_cast<double>(data.size())) % data.size()];
        const Vector g = loss.grad(w, z);
        max_grad = std::max(max_grad, g.norm());

        const double scale = std::pow(10.0, -4.0 + 4.0 * src.uniform(i, 2));
        const Vector w2 = w + random_point(i + sample_budget, scale);
        const double dist = (w2 - w).norm();
        if (dist > 0.0) max_ratio = std::max(max_ratio, (loss.grad(w2, z) - g).norm() / dist);

        // Shells are swept on a deterministic radius grid to hit the band near K.
        const double shell = outer * static_cast<double>(i + 1) / static_cast<double>(sample_budget);
        const Vector x = random_point(i + 2 * sample_budget, shell);
        const double rho2 = x.squaredNorm();
        min_dissipative = std::min(min_dissipative, (reg.grad(x).dot(x) + reg.dissipativity_b) / rho2);

        if (reg.grad(w).norm() > 0.0) max_disjoint = std::max(max_disjoint, g.norm());
        if (reg.grad(x).norm() > 0.0) max_disjoint = std::max(max_disjoint, loss.grad(x, z).norm());
    }

    ValidationReport report;
    report.checks.push_back({"grad_bound", max_grad, loss.grad_bound_A, max_grad <= loss.grad_bound_A});
    report.checks.push_back({"gradient_lipschitz", max_ratio, loss.smoothness_M,
                             max_ratio <= loss.smoothness_M * (1.0 + 1e-9)});
    report.checks.push_back({"dissipativity", min_dissipative, reg.dissipativity_m,
                             min_dissipative >= reg.dissipativity_m * (1.0 - 1e-12)});
    report.checks.push_back({"disjoint_support", max_disjoint, 0.0, max_disjoint == 0.0});
    return report;
}

inline ValidationReport validate_assumptions(const Problem& problem, std::size_t sample_budget,
                                             std::uint64_t seed = 7) {
    return validate_assumptions(problem.loss, problem.reg, problem.data, sample_budget, seed);
}

}  // namespace clipadam
