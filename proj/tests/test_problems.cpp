#include "clipadam/noise.hpp"
#include "clipadam/problems.hpp"
#include "clipadam/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace clipadam;

namespace {

ProblemParams params(const std::string& name, Eigen::Index dim = 1, std::size_t n = 32) {
    ProblemParams p;
    p.name = name;
    p.dim = dim;
    p.n = n;
    return p;
}

Vector central_difference(const Problem& p, const Vector& w, double h) {
    Vector g(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        Vector up = w, down = w;
        up[i] += h;
        down[i] -= h;
        g[i] = (p.empirical(up) - p.empirical(down)) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST(Problems, UnknownIdIsConfigError) {
    EXPECT_THROW(make_problem(params("rosenbrock")), ConfigError);
}

TEST(Problems, EmpiricalLossBasics) {
    const Problem p = make_problem(params("sinusoidal", 2, 5));
    const Vector w = (Vector(2) << 0.3, -0.7).finished();
    long double sum = 0.0L;
    for (const auto& z : p.data.points) sum += static_cast<long double>(p.loss.eval(w, z));
    EXPECT_NEAR(p.empirical(w), static_cast<double>(sum / 5.0L), 1e-15);

    Dataset doubled = p.data;
    doubled.points.insert(doubled.points.end(), p.data.points.begin(), p.data.points.end());
    EXPECT_NEAR(empirical_loss(p.loss, doubled, w), p.empirical(w), 1e-15);

    Dataset single;
    single.points = {p.data.points.front()};
    EXPECT_DOUBLE_EQ(empirical_loss(p.loss, single, w), p.loss.eval(w, single.points.front()));
    EXPECT_THROW(empirical_loss(p.loss, Dataset{}, w), ConfigError);
}

TEST(Problems, GradientsMatchFiniteDifferences) {
    for (const std::string name : {"double_well", "sinusoidal", "logistic", "quadratic"}) {
        for (Eigen::Index d : {1, 3}) {
            const Problem p = make_problem(params(name, d, 20));
            const NoiseSource src(31);
            for (std::uint64_t i = 0; i < 30; ++i) {
                // Points across the interior, the fade band and beyond.
                Vector w = src.draw(i, d);
                w *= (0.2 + 3.5 * src.uniform(i, 0)) / w.norm();
                const Vector g = p.loss_gradient(w);
                const Vector fd = central_difference(p, w, 1e-5);
                EXPECT_LT((g - fd).norm(), 1e-4 * std::max(1.0, g.norm())) << name << " d=" << d << " |w|=" << w.norm();
                EXPECT_LT((empirical_grad(p.loss, p.data, w) - g).norm(), 1e-12 * std::max(1.0, g.norm()));
            }
        }
    }
}

TEST(Problems, DataRegenerationIsBitIdentical) {
    for (const std::string name : {"double_well", "sinusoidal", "logistic"}) {
        const Problem a = make_problem(params(name, 2, 50));
        const Problem b = make_problem(params(name, 2, 50));
        ASSERT_EQ(a.data.size(), 50U);
        for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(a.data.points[i], b.data.points[i]);
        ProblemParams other = params(name, 2, 50);
        other.data_seed = 2;
        EXPECT_NE(make_problem(other).data.points.front(), a.data.points.front());
    }
}

TEST(Problems, SinusoidalExpectedLossMatchesMonteCarlo) {
    ProblemParams prm = params("sinusoidal", 2, 1);
    prm.sigma = 0.8;
    const Problem p = make_problem(prm);
    const Vector w = (Vector(2) << 0.9, -0.5).finished();
    const NoiseSource src(101);
    RunningStats mc;
    for (std::uint64_t i = 0; i < 1000000; ++i) {
        const Vector z = prm.sigma * src.draw(i, 2);
        mc.add(1.0 - std::cos(w.dot(z)));
    }
    EXPECT_NEAR(expected_loss(p, w), mc.mean(), 3.0 * mc.std_error());
    EXPECT_EQ(expected_loss(p, Vector::Zero(2)), 0.0);
    EXPECT_DOUBLE_EQ(expected_loss(p, w), expected_loss(p, Vector(-w)));
}

TEST(Problems, DoubleWellExpectedLossMatchesLargeSample) {
    ProblemParams prm = params("double_well", 1, 200000);
    prm.tilt = 0.2;
    prm.data_noise = 0.5;
    const Problem p = make_problem(prm);
    for (double x : {-1.3, -0.2, 0.5, 1.1}) {
        const Vector w = Vector::Constant(1, x);
        // Truncated noise is symmetric, so only the sampling error of the mean remains.
        EXPECT_NEAR(p.empirical(w), expected_loss(p, w), 5.0 * 0.5 * std::abs(x) / std::sqrt(200000.0) + 1e-12);
    }
}

TEST(Problems, LogisticUsesLargeReferenceSample) {
    const Problem p = make_problem(params("logistic", 2, 100));
    EXPECT_FALSE(p.expected_is_analytic);
    EXPECT_GE(p.expected_reference_size, 1000000U);
    EXPECT_NEAR(expected_loss(p, Vector::Zero(2)), std::log(2.0), 1e-10);
}

TEST(Regularizer, ZeroInsideBallAndDirectFormula) {
    const RegularizerSpec reg = build_regularizer(1.0, 1.0, 1);
    EXPECT_EQ(reg.eval(Vector::Constant(1, 0.99)), 0.0);
    EXPECT_EQ(reg.grad(Vector::Constant(1, -1.0)).norm(), 0.0);
    const double expected = std::pow(std::sqrt(10.0) - std::sqrt(2.0), 2);
    EXPECT_NEAR(reg.eval(Vector::Constant(1, 3.0)), expected, 1e-14);
    EXPECT_LT(reg.eval(Vector::Constant(1, 1.0 + 1e-9)), 1e-17);
    EXPECT_THROW(build_regularizer(-1.0, 1.0, 1), ConfigError);
}

TEST(Regularizer, GradientIsContinuousAcrossTheBoundary) {
    const RegularizerSpec reg = build_regularizer(2.0, 3.0, 2);
    const Vector dir = (Vector(2) << 0.6, 0.8).finished();
    for (double h : {1e-4, 1e-6, 1e-8}) {
        const Vector in = (2.0 - h) * dir, out = (2.0 + h) * dir;
        // Zero inside, and the outside gradient vanishes linearly in the distance to K.
        EXPECT_EQ(reg.grad(in).norm(), 0.0);
        EXPECT_LT(reg.grad(out).norm(), 2.0 * 3.0 * 2.0 * h);
    }
    // Finite differences of R agree with the closed-form gradient near and away from K.
    for (double rho : {2.0 + 1e-3, 2.5, 4.0}) {
        const Vector x = rho * dir;
        Vector fd(2);
        for (Eigen::Index i = 0; i < 2; ++i) {
            Vector up = x, down = x;
            up[i] += 1e-6;
            down[i] -= 1e-6;
            fd[i] = (reg.eval(up) - reg.eval(down)) / 2e-6;
        }
        EXPECT_LT((fd - reg.grad(x)).norm(), 1e-6);
    }
}

TEST(Regularizer, CertifiedDissipativityHoldsOnShells) {
    for (double K : {0.5, 1.0, 3.0}) {
        for (double lambda : {0.5, 4.0}) {
            const RegularizerSpec reg = build_regularizer(K, lambda, 3);
            const double c0 = 1.0 - std::sqrt(K * K + 1.0) / std::sqrt((K + 1.0) * (K + 1.0) + 1.0);
            EXPECT_NEAR(reg.dissipativity_m, 2.0 * lambda * c0, 1e-15);
            EXPECT_GT(reg.dissipativity_b, 0.0);
            EXPECT_NEAR(reg.smoothness_MR, 2.0 * lambda, 1e-15);
            for (int i = 0; i <= 20000; ++i) {
                const double rho = 10.0 * (K + 1.0) * i / 20000.0;
                EXPECT_GE(reg.radial_inner(rho), reg.dissipativity_m * rho * rho - reg.dissipativity_b)
                    << "K=" << K << " rho=" << rho;
            }
        }
    }
}

TEST(Validation, BuiltInProblemsPass) {
    for (const std::string name : {"double_well", "sinusoidal", "logistic", "flat"}) {
        for (Eigen::Index d : {1, 2}) {
            const Problem p = make_problem(params(name, d, 16));
            const ValidationReport report = validate_assumptions(p, 4000);
            for (const auto& c : report.checks) {
                EXPECT_TRUE(c.passed) << name << " d=" << d << " " << c.name << " empirical=" << c.empirical
                                      << " certified=" << c.certified;
            }
        }
    }
}

TEST(Validation, RawQuadraticFailsGradientBound) {
    const Problem p = make_problem(params("quadratic", 2, 16));
    const ValidationReport report = validate_assumptions(p, 2000);
    EXPECT_FALSE(report.at("grad_bound").passed);
    EXPECT_FALSE(report.all_passed());
    EXPECT_THROW(validate_assumptions(p, 10), ConfigError);
}

TEST(Validation, LogisticGradientBoundedByFeatureNorm) {
    ProblemParams prm = params("logistic", 3, 64);
    prm.feature_bound = 2.0;
    const Problem p = make_problem(prm);
    const NoiseSource src(5);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const Vector w = 0.5 * src.draw(i, 3);
        for (const auto& z : p.data.points) {
            Vector g = Vector::Zero(3);
            p.raw_add_grad(w, z, 1.0, g);
            EXPECT_LE(g.norm(), z.head(3).norm() + 1e-15);
            EXPECT_LE(z.head(3).norm(), prm.feature_bound + 1e-15);
        }
    }
}

TEST(Dataset, CsvIngestion) {
    const auto path = std::filesystem::temp_directory_path() / "clipadam_data_test.csv";
    {
        std::ofstream out(path);
        out << "0.5,1.0\n-0.25,2\n\n3,4\n";
    }
    const Dataset d = read_dataset_csv(path.string());
    ASSERT_EQ(d.size(), 3U);
    EXPECT_EQ(d.width(), 2);
    EXPECT_EQ(d.points[1][0], -0.25);

    ProblemParams prm = params("sinusoidal", 2, 1);
    prm.dataset_csv = path.string();
    EXPECT_EQ(make_problem(prm).data.size(), 3U);
    prm.dim = 3;
    EXPECT_THROW(make_problem(prm), ConfigError);

    {
        std::ofstream out(path);
        out << "1,2\n3\n";
    }
    EXPECT_THROW(read_dataset_csv(path.string()), ConfigError);
    {
        std::ofstream out(path);
        out << "1,abc\n";
    }
    EXPECT_THROW(read_dataset_csv(path.string()), ConfigError);
    std::filesystem::remove(path);
    EXPECT_THROW(read_dataset_csv(path.string()), ConfigError);
}

TEST(Fade, LossIsConstantBeyondKAndUnchangedInside) {
    ProblemParams prm = params("double_well", 2, 8);
    const Problem p = make_problem(prm);
    ASSERT_TRUE(p.fade.has_value());
    const Vector dir = (Vector(2) << 0.8, -0.6).finished();
    const double K = prm.radius_K;
    EXPECT_EQ(p.loss_gradient(Vector((K + 0.01) * dir)).norm(), 0.0);
    EXPECT_DOUBLE_EQ(p.empirical(Vector((K + 0.5) * dir)), p.empirical(Vector((K + 3.0) * dir)));
    const Vector inside = 0.7 * dir;
    double raw = 0.0;
    for (const auto& z : p.data.points) raw += p.raw_eval(inside, z);
    EXPECT_NEAR(p.empirical(inside), raw / 8.0, 1e-15);
}
