#pragma once

#include "clipadam/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clipadam {

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

// Welford accumulation; stderr is the sample standard deviation over sqrt(n).
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
    MeanStderr summary() const { return {mean(), std_error(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> values) {
    RunningStats s;
    for (double v : values) s.add(v);
    return s.summary();
}

enum class RateModel { LogLog, Exp };

inline RateModel parse_rate_model(const std::string& name) {
    if (name == "loglog") return RateModel::LogLog;
    if (name == "exp") return RateModel::Exp;
    throw ConfigError("fit: unknown model '" + name + "' (expected loglog or exp)");
}

/// Ordinary least squares in transformed coordinates.  LogLog fits
/// log y = intercept + slope log x and reports the slope; Exp fits
/// log y = intercept - rate x and reports the rate.
struct RateFit {
    double parameter = 0.0;
    double std_error = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // root mean square residual in log y
    std::size_t points = 0;

    double relative_stderr() const { return std::abs(std_error / parameter); }
};

inline RateFit fit_rate(std::span<const double> x, std::span<const double> y, RateModel model) {
    require(x.size() == y.size(), "fit_rate: x and y must have equal length");
    require(x.size() >= 3, "fit_rate: at least 3 points are required");
    std::vector<double> u(x.size()), v(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(y[i] > 0.0, "fit_rate: values must be positive for a log fit");
        if (model == RateModel::LogLog) {
            require(x[i] > 0.0, "fit_rate: x must be positive for a loglog fit");
            u[i] = std::log(x[i]);
        } else {
            u[i] = x[i];
        }
        v[i] = std::log(y[i]);
    }
    const double n = static_cast<double>(u.size());
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= n;
    mv /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sxx += (u[i] - mu) * (u[i] - mu);
        sxy += (u[i] - mu) * (v[i] - mv);
    }
    require(sxx > 0.0, "fit_rate: x values must not all be equal");
    const double slope = sxy / sxx;
    const double intercept = mv - slope * mu;
    double ssr = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double e = v[i] - intercept - slope * u[i];
        ssr += e * e;
    }
    RateFit fit;
    fit.parameter = model == RateModel::LogLog ? slope : -slope;
    fit.std_error = std::sqrt(ssr / (n - 2.0) / sxx);
    fit.intercept = intercept;
    fit.residual = std::sqrt(ssr / n);
    fit.points = u.size();
    return fit;
}

/// Composite Simpson rule on a uniform grid with an odd number of points.
inline double simpson(std::span<const double> f, double spacing) {
    require(f.size() >= 3 && f.size() % 2 == 1, "simpson: need an odd number (>= 3) of points");
    double sum = f.front() + f.back();
    for (std::size_t i = 1; i + 1 < f.size(); ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    return sum * spacing / 3.0;
}

/// sup |F_n - F| for the empirical CDF of `samples` against a CDF tabulated
/// at increasing `grid` points (linear interpolation, 0 / 1 outside).
inline double ks_distance(std::vector<double> samples, std::span<const double> grid,
                          std::span<const double> cdf) {
    require(!samples.empty(), "ks_distance: no samples");
    require(grid.size() == cdf.size() && grid.size() >= 2, "ks_distance: malformed CDF table");
    std::sort(samples.begin(), samples.end());
    auto reference = [&](double x) {
        if (x <= grid.front()) return 0.0;
        if (x >= grid.back()) return 1.0;
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
        return (1.0 - t) * cdf[lo] + t * cdf[hi];
    };
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = reference(samples[i]);
        worst = std::max({worst, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return worst;
}

}  // namespace clipadam
