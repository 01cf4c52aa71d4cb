#include "clipadam/diagnostics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <vector>

using namespace clipadam;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Vector sin_grad(const Vector& x) { return x.array().sin().matrix() + 0.3 * x; }

// Dense log-spaced scan over eta, independent of the library's search.
template <typename Fn>
double dense_sup(Fn&& f) {
    double best = 0.0;
    constexpr int kNodes = 400001;
    for (int i = 0; i < kNodes; ++i) {
        const double eta = std::exp(std::log(1e-7) + (std::log(1e7) - std::log(1e-7)) * i / (kNodes - 1));
        best = std::max(best, f(eta));
    }
    return best;
}

double c1_integrand(double c1, double c2, double eta) {
    return -std::expm1(-c1 * eta) / std::sqrt(-std::expm1(-(2.0 * c1 - c2) * eta) * -std::expm1(-c2 * eta));
}

Problem make(const std::string& name, Eigen::Index dim, std::size_t n, double K, double lambda) {
    ProblemParams prm;
    prm.name = name;
    prm.dim = dim;
    prm.n = n;
    prm.radius_K = K;
    prm.lambda = lambda;
    return make_problem(prm);
}

OptimizerConfig config(double eta, double beta, DriftConfig drift) {
    OptimizerConfig cfg;
    cfg.eta = eta;
    cfg.beta = beta;
    cfg.drift = drift;
    return cfg;
}

CrPath smooth_path(double eta, double r) {
    std::deque<Vector> values;
    const int J = static_cast<int>(std::round(20.0 / eta));
    for (int j = J; j >= 0; --j) {
        const double s = -eta * j;
        values.push_back((Vector(2) << std::sin(s), std::cos(1.5 * s)).finished());
    }
    return CrPath(eta, r, values.size(), values, values.front());
}

}  // namespace

TEST(BoundC1, EqualRatesGiveOne) {
    EXPECT_NEAR(bound_constant_C1({1.0, 1.0, 1.0, 0.1}), 1.0, 1e-12);
    EXPECT_NEAR(bound_constant_C1({3.0, 3.0, 0.5, 0.1}), 1.0, 1e-12);
}

TEST(BoundC1, SmallStepLimit) {
    EXPECT_NEAR(bound_constant_C1({1.0, 1.5, 1.0, 0.1}), 1.0 / std::sqrt(0.75), 1e-4);
}

TEST(BoundC1, MatchesDenseScanAndIsAtLeastOne) {
    for (double c1 : {0.5, 1.0, 2.0}) {
        for (double frac : {0.3, 0.9, 1.2, 1.9}) {
            const double c2 = frac * c1;
            const double value = bound_constant_C1({c1, c2, 1.0, 0.01});
            const double oracle = dense_sup([&](double eta) { return c1_integrand(c1, c2, eta); });
            EXPECT_GE(value, 1.0 - 1e-12);
            EXPECT_NEAR(value, std::max(oracle, 1.0), 1e-6 * value) << c1 << " " << c2;
        }
    }
    EXPECT_THROW(bound_constant_C1({1.0, 2.0, 1.0, 0.1}), ConfigError);
}

TEST(LipschitzC2, MatchesDenseScan) {
    for (double eps : {0.25, 1.0, 4.0}) {
        const DriftConfig cfg{1.2, 1.6, eps, 0.3};
        const double A = 2.0, M = 1.5;
        const double weight = bound_constant_C1(cfg) * A * std::max(1.0, 1.0 / std::sqrt(eps));
        const double sup = dense_sup([&](double eta) {
            return -std::expm1(-cfg.c1 * eta) / -std::expm1(-(cfg.c1 - cfg.r) * eta) +
                   weight * -std::expm1(-cfg.c2 * eta) / -std::expm1(-(cfg.c2 - cfg.r) * eta);
        });
        const double oracle = M / std::sqrt(eps) * sup;
        EXPECT_NEAR(lipschitz_constant_C2(cfg, A, M), oracle, 1e-6 * oracle) << eps;
    }
}

TEST(LipschitzC2, LimitsAndEdgeCases) {
    const DriftConfig cfg{1.0, 1.5, 1.0, 1e-9};
    const double C1 = bound_constant_C1(cfg);
    EXPECT_NEAR(lipschitz_constant_C2(cfg, 2.0, 3.0), 3.0 * (1.0 + 2.0 * C1), 1e-6);
    EXPECT_EQ(lipschitz_constant_C2({1.0, 1.5, 1.0, 0.2}, 2.0, 0.0), 0.0);
    EXPECT_THROW(lipschitz_constant_C2({1.0, 1.5, 1.0, 1.0}, 1.0, 1.0), ConfigError);
}

TEST(DriftGap, ZeroOnConstantPaths) {
    const DriftConfig cfg{1.0, 1.5, 0.5, 0.1};
    std::vector<std::vector<CrPath>> snaps(2);
    for (int i = 0; i < 4; ++i) {
        snaps[0].push_back(CrPath::constant(Vector::Constant(2, 0.3 * i - 0.5), 0.05, cfg.r, 50));
        snaps[1].push_back(CrPath::constant(Vector::Constant(2, 1.1 * i), 0.05, cfg.r, 50));
    }
    for (auto reading : {PathReading::Linear, PathReading::SampleHold}) {
        const DriftGap gap = drift_gap_estimate(snaps, sin_grad, cfg, reading);
        EXPECT_LT(gap.max_norm, 1e-12);
        EXPECT_LT(gap.sup_mean_squared, 1e-24);
    }
}

TEST(DriftGap, SampleHoldGapWithinKernelBound) {
    const NoiseSource src(17);
    for (double eps : {0.1, 1.0}) {
        const DriftConfig cfg{1.0, 1.5, eps, 0.1};
        for (double eta : {0.01, 0.1, 0.5}) {
            std::vector<std::vector<CrPath>> snaps(1);
            for (std::uint64_t id = 0; id < 30; ++id) {
                std::deque<Vector> values;
                for (std::uint64_t j = 0; j < 200; ++j) values.push_back(2.0 * src.draw(id * 1000 + j, 3));
                snaps[0].emplace_back(eta, cfg.r, 210, values, values.front());
            }
            const DriftGap gap = drift_gap_estimate(snaps, sin_grad, cfg, PathReading::SampleHold);
            EXPECT_GT(gap.max_norm, 0.0);
            EXPECT_LE(gap.max_norm, gap.kernel_bound) << "eps=" << eps << " eta=" << eta;
        }
    }
}

TEST(DriftGap, ShrinksWithStep) {
    const DriftConfig cfg{1.0, 1.5, 0.5, 0.1};
    double previous = 1e300;
    for (double eta : {0.2, 0.1, 0.05, 0.025}) {
        const std::vector<std::vector<CrPath>> snaps{{smooth_path(eta, cfg.r)}};
        const double gap = drift_gap_estimate(snaps, sin_grad, cfg).sup_mean_squared;
        EXPECT_LT(gap, previous);
        previous = gap;
    }
}

TEST(Envelope, RecoversExactEnvelope) {
    std::vector<double> t, y, se;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.1 * i);
        y.push_back(10.0 * std::exp(-2.0 * t.back()) + 1.0);
        se.push_back(1e-3);
    }
    const EnvelopeFit fit = fit_envelope(t, y, se, 10.0);
    EXPECT_NEAR(fit.gamma, 2.0, 1e-3);
    EXPECT_NEAR(fit.C, 1.0, 1e-3);
    EXPECT_EQ(fit.violations, 0U);
    EXPECT_LT(fit.residual, 1e-3);
}

TEST(Envelope, LiesAboveNoisyData) {
    const NoiseSource src(2);
    std::vector<double> t, y, se;
    for (int i = 0; i <= 200; ++i) {
        t.push_back(0.05 * i);
        y.push_back(5.0 * std::exp(-t.back()) + 0.5 + 0.02 * src.normal(i, 0));
        se.push_back(0.02);
    }
    const EnvelopeFit fit = fit_envelope(t, y, se, 5.0);
    EXPECT_EQ(fit.violations, 0U);
    EXPECT_EQ(fit.violation_fraction(), 0.0);
    EXPECT_NEAR(fit.gamma, 1.0, 0.1);
    EXPECT_NEAR(fit.C, 0.55, 0.05);
}

TEST(Lyapunov, FlatProblemDecaysFromFarStart) {
    const Problem p = make("flat", 1, 4, 1.0, 4.0);
    const OptimizerConfig cfg = config(0.05, 5.0, {1.0, 1.5, 1.0, 0.1});
    EnsembleSpec spec;
    spec.replicas = 200;
    spec.horizon = 20.0;
    spec.seed = 3;
    spec.workers = 4;
    const LyapunovEstimate est = lyapunov_estimate(p, cfg, 2.0, scalar(10.0), spec);
    EXPECT_DOUBLE_EQ(est.initial_value, 100.0);
    EXPECT_EQ(est.divergent, 0U);
    EXPECT_LT(est.mean.back(), 0.1 * est.initial_value);
    EXPECT_GT(est.fit.gamma, 0.0);
    EXPECT_LE(est.fit.violation_fraction(), 0.05);
    EXPECT_THROW(lyapunov_estimate(p, cfg, 1.5, scalar(10.0), spec), ConfigError);
}

TEST(Lyapunov, ZeroStartStaysBoundedAndColderIsSmaller) {
    const Problem p = make("flat", 1, 4, 1.0, 4.0);
    EnsembleSpec spec;
    spec.replicas = 200;
    spec.horizon = 20.0;
    spec.seed = 4;
    spec.workers = 4;
    const LyapunovEstimate hot = lyapunov_estimate(p, config(0.05, 1.0, {1.0, 1.5, 1.0, 0.1}), 2.0, scalar(0.0), spec);
    const LyapunovEstimate cold = lyapunov_estimate(p, config(0.05, 50.0, {1.0, 1.5, 1.0, 0.1}), 2.0, scalar(0.0), spec);
    EXPECT_EQ(hot.initial_value, 0.0);
    EXPECT_EQ(hot.mean.front(), 0.0);
    EXPECT_GT(hot.fit.C, 0.0);
    EXPECT_LT(cold.fit.C, hot.fit.C);
    EXPECT_THROW(lyapunov_estimate(p, config(0.05, 0.1, {1.0, 1.5, 1.0, 0.1}), 2.0, scalar(0.0), spec), ConfigError);
}

TEST(Contraction, SeriesFitRecoversRate) {
    std::vector<double> t, y, se;
    for (int i = 0; i <= 50; ++i) {
        t.push_back(0.2 * i);
        y.push_back(i < 10 ? 100.0 : 3.0 * std::exp(-0.5 * t.back()));
        se.push_back(0.0);
    }
    const ContractionEstimate est = contraction_from_series(t, y, se, 0.2);
    EXPECT_FALSE(est.degenerate);
    EXPECT_NEAR(est.fit.parameter, 0.5, 1e-12);
    EXPECT_EQ(est.fit.points, 41U);
}

TEST(Contraction, IdenticalStartsAreDegenerate) {
    const Problem p = make("double_well", 1, 16, 2.0, 2.0);
    EnsembleSpec spec;
    spec.replicas = 20;
    spec.horizon = 5.0;
    const ContractionEstimate est =
        coupling_contraction(p, config(0.05, 10.0, {1.0, 1.5, 1.0, 0.1}), scalar(0.5), scalar(0.5), spec);
    for (double m : est.mean) EXPECT_EQ(m, 0.0);
    EXPECT_TRUE(est.degenerate);
}

TEST(Contraction, DistanceShrinksAndIgnoresWorkerCount) {
    const Problem p = make("sinusoidal", 1, 32, 1.0, 4.0);
    EnsembleSpec spec;
    spec.replicas = 64;
    spec.horizon = 20.0;
    spec.seed = 9;
    const OptimizerConfig cfg = config(0.05, 10.0, {1.0, 1.5, 1.0, 0.5});
    spec.workers = 1;
    const ContractionEstimate one = coupling_contraction(p, cfg, scalar(4.0), scalar(-4.0), spec);
    spec.workers = 4;
    const ContractionEstimate four = coupling_contraction(p, cfg, scalar(4.0), scalar(-4.0), spec);
    EXPECT_EQ(one.mean, four.mean);
    EXPECT_FALSE(one.degenerate);
    EXPECT_GT(one.fit.parameter, 0.0);
    EXPECT_LT(one.mean.back(), 0.01 * one.mean.front());
}

TEST(InvariantDensity, QuadraticIsGaussianWithScaledVariance) {
    ProblemParams prm;
    prm.name = "quadratic";
    prm.n = 16;
    prm.radius_K = 20.0;
    prm.curvature = 2.0;
    prm.tilt = 0.3;
    const Problem p = make_problem(prm);
    double centre = 0.0;
    for (const auto& z : p.data.points) centre += z[0] / 16.0;
    for (double beta : {2.0, 4.0}) {
        const double c = 1.5;
        const DensityTable t = invariant_density_1d(p, beta, c, -10.0, 10.0, 20001);
        std::vector<double> f1(t.grid.size()), f2(t.grid.size());
        for (std::size_t i = 0; i < t.grid.size(); ++i) {
            f1[i] = t.grid[i] * t.density[i];
            f2[i] = (t.grid[i] - centre) * (t.grid[i] - centre) * t.density[i];
        }
        const double h = t.grid[1] - t.grid[0];
        EXPECT_NEAR(simpson(t.density, h), 1.0, 1e-12);
        EXPECT_NEAR(simpson(f1, h), centre, 1e-10);
        EXPECT_NEAR(simpson(f2, h), c / (beta * prm.curvature), 1e-10);
        EXPECT_NEAR(t.cdf.back(), 1.0, 1e-15);
        EXPECT_LT(t.tail_mass, 1e-8);
    }
}

TEST(InvariantDensity, SymmetricDoubleWellAndNarrowGrid) {
    ProblemParams prm;
    prm.name = "double_well";
    prm.n = 32;
    prm.tilt = 0.0;
    prm.data_noise = 0.0;
    const Problem p = make_problem(prm);
    const DensityTable t = invariant_density_1d(p, 5.0, 1.0, -5.0, 5.0, 4001);
    const std::size_t n = t.grid.size();
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(t.density[i], t.density[n - 1 - i], 1e-12);
    EXPECT_NEAR(t.cdf[n / 2], 0.5, 1e-10);
    EXPECT_THROW(invariant_density_1d(p, 5.0, 1.0, -0.5, 0.5, 101), ConfigError);
    EXPECT_THROW(invariant_density_1d(p, 5.0, 1.0, -5.0, 5.0, 100), ConfigError);
}

TEST(InvariantDensity, FrozenSgldSamplesMatch) {
    ProblemParams prm;
    prm.name = "quadratic";
    prm.n = 8;
    prm.radius_K = 20.0;
    const Problem p = make_problem(prm);
    const OptimizerConfig cfg = config(0.01, 4.0, {1.0, 1.5, 1.0, 0.1});
    const double c = 1.2;
    const auto samples = frozen_sgld_samples(p, cfg, c, scalar(0.0), 200, 100, 1000, 20, 5, 4);
    const DensityTable t = invariant_density_1d(p, cfg.beta, c, -8.0, 8.0, 8001);
    // Discrete OU overdispersion is O(eta); 2e4 samples resolve ~0.01.
    EXPECT_LT(ks_distance(samples, t.grid, t.cdf), 0.03);
}

TEST(Minimizer, SinusoidalMinimumAtOrigin) {
    const Problem p = make("sinusoidal", 1, 32, 2.0, 1.0);
    const Minimizer m = find_minimizer(p, 1.0);
    EXPECT_TRUE(m.converged);
    EXPECT_TRUE(m.exhaustive);
    EXPECT_NEAR(m.point[0], 0.0, 1e-6);
    EXPECT_NEAR(m.value, 0.0, 1e-8);
    EXPECT_EQ(m.regularizer_at_point, 0.0);
}

TEST(Minimizer, TiltedDoubleWellMatchesFineGrid) {
    ProblemParams prm;
    prm.name = "double_well";
    prm.n = 16;
    prm.tilt = 0.2;
    prm.radius_K = 2.0;
    const Problem p = make_problem(prm);
    const double eps = 0.5;
    const Minimizer m = find_minimizer(p, eps);
    double grid_min = 1e300;
    Vector w(1);
    for (int i = 0; i <= 3000000; ++i) {
        w[0] = -3.0 + 6.0 * i / 3000000.0;
        grid_min = std::min(grid_min, population_objective(p, w, eps));
    }
    EXPECT_LE(m.value, grid_min + 1e-14);
    EXPECT_NEAR(m.value, grid_min, 1e-8);
    EXPECT_LT(m.point[0], 0.0);  // tilt favours the negative well
}

TEST(Minimizer, TwoDimensionalSearchFindsDiagonalMinimum) {
    ProblemParams prm;
    prm.name = "double_well";
    prm.dim = 2;
    prm.n = 16;
    prm.tilt = 0.2;
    prm.data_noise = 0.0;
    prm.radius_K = 2.0;
    const Problem p = make_problem(prm);
    const Minimizer m = find_minimizer(p, 1.0);
    // With noiseless data the objective depends on |w| and on w.1 only.
    const Vector diag = Vector::Constant(2, -1.0 / std::sqrt(2.0));
    double line_min = 1e300;
    for (int i = 0; i <= 1000000; ++i) {
        const double s = 3.0 * i / 1000000.0;
        line_min = std::min(line_min, population_objective(p, Vector(s * diag), 1.0));
    }
    EXPECT_TRUE(m.converged);
    EXPECT_NEAR(m.value, line_min, 1e-8);
    EXPECT_NEAR(m.point[0], m.point[1], 1e-4);
}

TEST(ExcessLoss, PlugInValues) {
    const Problem p = make("sinusoidal", 1, 32, 2.0, 1.0);
    const Minimizer m = find_minimizer(p, 1.0);
    const std::vector<double> times{0.0, 1.0};
    const std::vector<std::vector<Vector>> positions{{m.point, m.point}, {scalar(0.7), scalar(1.5)}};
    const auto series = excess_loss(times, positions, p, 1.0, m);
    ASSERT_EQ(series.size(), 2U);
    EXPECT_NEAR(series[0].mean, 0.0, 1e-12);
    EXPECT_EQ(series[0].count, 2U);
    const double g = 0.5 * (population_objective(p, scalar(0.7), 1.0) + population_objective(p, scalar(1.5), 1.0)) -
                     m.value;
    EXPECT_NEAR(series[1].mean, g, 1e-14);
    EXPECT_GT(series[1].mean, 0.0);
}

TEST(ExcessLoss, NonNegativeAlongRun) {
    const Problem p = make("double_well", 1, 16, 2.0, 1.0);
    const OptimizerConfig cfg = config(0.05, 10.0, {1.0, 1.5, 1.0, 0.1});
    EnsembleSpec spec;
    spec.replicas = 50;
    spec.horizon = 5.0;
    spec.seed = 1;
    const Ensemble ens = simulate_ensemble(p, cfg, spec, scalar(1.5));
    const Minimizer m = find_minimizer(p, cfg.drift.epsilon);
    for (const auto& pt : excess_loss(ens, p, cfg.drift.epsilon, m)) {
        EXPECT_GE(pt.mean, -1e-12);
        EXPECT_EQ(pt.count, 50U);
    }
}
