#include "clipadam/drift.hpp"
#include "clipadam/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <string>

using namespace clipadam;

namespace {

Vector sin_grad(const Vector& x) { return x.array().sin().matrix() + 0.3 * x; }

CrPath random_path(const NoiseSource& src, std::uint64_t id, Eigen::Index d, std::size_t len, double eta,
                   double r) {
    std::deque<Vector> values;
    for (std::size_t j = 0; j < len; ++j) values.push_back(src.draw(id * 100000 + j, d));
    return CrPath(eta, r, len + 10, values, src.draw(id * 100000 + 99999, d));
}

// Direct sums over the first `terms` lags plus the closed-form geometric tail.
EmaState brute_force_sums(const CrPath& p, const DriftConfig& cfg, std::size_t terms) {
    const double eta = p.grid_step();
    EmaState s{Vector::Zero(p.dim()), 0.0};
    for (std::size_t j = 0; j < terms; ++j) {
        const Vector g = sin_grad(p.sample(j));
        s.s1 += std::exp(-cfg.c1 * static_cast<double>(j) * eta) * g;
        s.s2 += std::exp(-cfg.c2 * static_cast<double>(j) * eta) * g.squaredNorm();
    }
    const Vector gt = sin_grad(p.tail());
    const double n = static_cast<double>(terms);
    s.s1 += std::exp(-cfg.c1 * n * eta) / one_minus_exp_neg(cfg.c1 * eta) * gt;
    s.s2 += std::exp(-cfg.c2 * n * eta) / one_minus_exp_neg(cfg.c2 * eta) * gt.squaredNorm();
    return s;
}

std::string config_error(const DriftConfig& cfg) {
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(DriftConfig, ConstraintMessages) {
    EXPECT_EQ(config_error({1.0, 1.0, 1.0, 0.1}), "");
    EXPECT_EQ(config_error({1.0, 2.0, 1.0, 0.1}), "2c1 > c2 violated");
    EXPECT_EQ(config_error({1.0, 1.5, 1.0, 1.0}), "min(c1, c2) > r violated");
    EXPECT_NE(config_error({1.0, 1.0, 0.0, 0.1}), "");
    EXPECT_NE(config_error({1.0, 1.0, 1.0, 0.0}), "");
}

TEST(DriftConfig, BetasAreDecayFactors) {
    const DriftConfig cfg{2.0, 3.0, 1.0, 0.5};
    EXPECT_DOUBLE_EQ(cfg.beta1(0.1), std::exp(-0.2));
    EXPECT_DOUBLE_EQ(cfg.beta2(0.1), std::exp(-0.3));
}

TEST(DiscreteDrift, EmaRecursionMatchesBruteForce) {
    const NoiseSource src(21);
    const DriftConfig cfg{1.3, 2.1, 0.5, 0.2};
    for (std::uint64_t id = 0; id < 20; ++id) {
        const double eta = 0.01 + 0.2 * src.uniform(id, 0);
        const CrPath p = random_path(src, id, 4, 1000, eta, cfg.r);
        EmaState ema = EmaState::constant_history(sin_grad(p.tail()), cfg, eta);
        for (std::size_t j = p.size(); j-- > 0;) ema_update_in_place(ema, sin_grad(p.sample(j)), cfg, eta);
        const EmaState oracle = brute_force_sums(p, cfg, 5000);
        EXPECT_LT((ema.s1 - oracle.s1).norm(), 1e-10 * oracle.s1.norm());
        EXPECT_NEAR(ema.s2, oracle.s2, 1e-10 * oracle.s2);
        const Vector h = drift_from_ema(ema, cfg, eta);
        const Vector h_oracle = drift_from_ema(oracle, cfg, eta);
        EXPECT_LT((h - h_oracle).norm(), 1e-10 * h_oracle.norm());
        EXPECT_LT((drift_discrete(p, sin_grad, cfg) - h_oracle).norm(), 1e-10 * h_oracle.norm());
    }
}

TEST(DiscreteDrift, ConstantPathFixedPoint) {
    const DriftConfig cfg{1.0, 1.5, 0.3, 0.1};
    const Vector x0 = (Vector(3) << 0.4, -1.2, 2.0).finished();
    const Vector g = sin_grad(x0);
    const Vector expected = -g / std::sqrt(cfg.epsilon + g.squaredNorm());
    for (double eta : {1e-4, 0.01, 0.5, 3.0}) {
        const CrPath p = CrPath::constant(x0, eta, cfg.r, 100);
        EXPECT_LT((drift_discrete(p, sin_grad, cfg) - expected).norm(), 1e-12);
        EXPECT_LT((drift_from_ema(EmaState::constant_history(g, cfg, eta), cfg, eta) - expected).norm(), 1e-12);
    }
}

TEST(ContinuousDrift, ConstantPathFixedPoint) {
    const DriftConfig cfg{1.0, 1.5, 0.3, 0.1};
    const Vector x0 = (Vector(2) << -0.7, 0.9).finished();
    const Vector g = sin_grad(x0);
    const Vector expected = -g / std::sqrt(cfg.epsilon + g.squaredNorm());
    for (auto reading : {PathReading::Linear, PathReading::SampleHold}) {
        const CrPath p = CrPath::constant(x0, 0.05, cfg.r, 40);
        EXPECT_LT((drift_continuous(p, sin_grad, cfg, reading) - expected).norm(), 1e-12);
    }
    CrPath grown = CrPath::constant(x0, 0.05, cfg.r, 40);
    for (int i = 0; i < 30; ++i) grown.push(x0);
    EXPECT_LT((drift_continuous(grown, sin_grad, cfg) - expected).norm(), 1e-12);
    EXPECT_LT((drift_continuous(KernelState::constant_history(g), cfg) - expected).norm(), 1e-15);
}

TEST(ContinuousDrift, LinearReadingMatchesFineQuadrature) {
    const NoiseSource src(8);
    const DriftConfig cfg{1.1, 1.7, 0.8, 0.2};
    const double eta = 0.05;
    for (std::uint64_t id = 0; id < 5; ++id) {
        const CrPath p = random_path(src, id, 2, 101, eta, cfg.r);
        const double J = static_cast<double>(p.horizon_steps());
        constexpr int kNodes = 100001;
        const double h = J * eta / (kNodes - 1);
        Vector a = Vector::Zero(2);
        double b = 0.0;
        for (int i = 0; i < kNodes; ++i) {
            const double s = -J * eta + h * i;
            const double w = (i == 0 || i == kNodes - 1) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
            const Vector g = sin_grad(p.at(s, PathReading::Linear));
            a += w * cfg.c1 * std::exp(cfg.c1 * s) * g;
            b += w * cfg.c2 * std::exp(cfg.c2 * s) * g.squaredNorm();
        }
        const Vector gt = sin_grad(p.tail());
        a += std::exp(-cfg.c1 * J * eta) * gt;
        b += std::exp(-cfg.c2 * J * eta) * gt.squaredNorm();
        const KernelState k = kernel_from_path(p, sin_grad, cfg, PathReading::Linear);
        EXPECT_LT((k.a - a).norm(), 1e-8);
        EXPECT_NEAR(k.b, b, 1e-8);
    }
}

TEST(ContinuousDrift, SampleHoldEqualsForwardKernelIntegration) {
    const NoiseSource src(12);
    const DriftConfig cfg{0.9, 1.4, 0.5, 0.1};
    const double eta = 0.1;
    const CrPath p = random_path(src, 1, 3, 60, eta, cfg.r);
    KernelState state = KernelState::constant_history(sin_grad(p.tail()));
    for (std::size_t j = p.horizon_steps(); j > 0; --j) kernel_advance(state, sin_grad(p.sample(j)), cfg, eta);
    const KernelState direct = kernel_from_path(p, sin_grad, cfg, PathReading::SampleHold);
    EXPECT_LT((state.a - direct.a).norm(), 1e-13);
    EXPECT_NEAR(state.b, direct.b, 1e-13);
}

TEST(KernelAdvance, ExactForHeldGradient) {
    const DriftConfig cfg{1.5, 2.5, 1.0, 0.1};
    KernelState s{(Vector(2) << 1.0, -1.0).finished(), 4.0};
    const Vector g = (Vector(2) << 0.5, 2.0).finished();
    KernelState twice = s;
    kernel_advance(s, g, cfg, 0.3);
    kernel_advance(twice, g, cfg, 0.15);
    kernel_advance(twice, g, cfg, 0.15);
    const Vector a_exact = g + (Vector(2) << 0.5, -3.0).finished() * std::exp(-1.5 * 0.3);
    const double b_exact = g.squaredNorm() + (4.0 - g.squaredNorm()) * std::exp(-2.5 * 0.3);
    EXPECT_LT((s.a - a_exact).norm(), 1e-15);
    EXPECT_NEAR(s.b, b_exact, 1e-14);
    EXPECT_LT((twice.a - s.a).norm(), 1e-15);
}

TEST(Drift, DiscreteApproachesContinuousAsStepShrinks) {
    // Same smooth underlying path x(s) = (sin s, cos 2s) sampled at two steps.
    const DriftConfig cfg{1.0, 1.5, 0.5, 0.1};
    auto sampled = [&](double eta) {
        std::deque<Vector> values;
        const int J = static_cast<int>(std::round(30.0 / eta));
        for (int j = J; j >= 0; --j) {
            const double s = -eta * j;
            values.push_back((Vector(2) << std::sin(s), std::cos(2.0 * s)).finished());
        }
        return CrPath(eta, cfg.r, values.size(), values, values.front());
    };
    double previous = 1e300;
    for (double eta : {0.2, 0.1, 0.05, 0.025}) {
        const CrPath p = sampled(eta);
        const double gap = (drift_discrete(p, sin_grad, cfg) - drift_continuous(p, sin_grad, cfg)).norm();
        EXPECT_LT(gap, previous);
        previous = gap;
    }
}
