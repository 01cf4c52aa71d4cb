#pragma once

#include "clipadam/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>

namespace clipadam {

// How a grid-sampled path is read between grid points when a continuous-time
// functional (an integral over s) is evaluated on it.
enum class PathReading {
    Linear,      // linear interpolation between neighbouring samples
    SampleHold,  // xi(s) = xi(floor(s / eta) * eta)
};

/// Element of the weighted path space C_r, stored as the most recent grid
/// samples xi(-J eta), ..., xi(0) plus a constant value for everything older.
///
/// The tail value applies to every s < -J eta where J = size() - 1.  Once the
/// buffer holds more than capacity() + 1 samples the oldest one is absorbed
/// into the tail.
class CrPath {
public:
    CrPath(double grid_step, double decay_rate, std::size_t capacity, std::deque<Vector> values,
           Vector tail)
        : grid_step_(grid_step),
          decay_rate_(decay_rate),
          capacity_(capacity),
          values_(std::move(values)),
          tail_(std::move(tail)) {
        require(grid_step_ > 0.0, "CrPath: grid_step must be positive");
        require(decay_rate_ > 0.0, "CrPath: decay_rate must be positive");
        require(!values_.empty(), "CrPath: values must be non-empty");
        require(tail_.size() >= 1, "CrPath: dimension must be at least 1");
        for (const auto& v : values_) {
            require(v.size() == tail_.size(), "CrPath: all points must share one dimension");
        }
        while (values_.size() > capacity_ + 1) absorb_oldest();
    }

    static CrPath constant(const Vector& value, double grid_step, double decay_rate,
                           std::size_t capacity) {
        return CrPath(grid_step, decay_rate, capacity, std::deque<Vector>{value}, value);
    }

    static CrPath zero(Eigen::Index dim, double grid_step, double decay_rate, std::size_t capacity) {
        return constant(Vector::Zero(dim), grid_step, decay_rate, capacity);
    }

    // Buffer length giving neglected kernel mass e^{-min(c1, c2, r) J eta} < 1e-8.
    static std::size_t default_capacity(double c1, double c2, double r, double eta) {
        const double slowest = std::min({c1, c2, r});
        return static_cast<std::size_t>(std::ceil(20.0 / (slowest * eta)));
    }

    double grid_step() const { return grid_step_; }
    double decay_rate() const { return decay_rate_; }
    std::size_t capacity() const { return capacity_; }
    Eigen::Index dim() const { return tail_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t horizon_steps() const { return values_.size() - 1; }
    const Vector& tail() const { return tail_; }
    const std::deque<Vector>& values() const { return values_; }

    // xi(-j eta); indices past the buffer read the tail.
    const Vector& sample(std::size_t j) const {
        return j < values_.size() ? values_[values_.size() - 1 - j] : tail_;
    }
    const Vector& current() const { return values_.back(); }

    // xi(s) for s <= 0 under the given reading.
    Vector at(double s, PathReading reading) const {
        const double steps_back = -s / grid_step_;
        if (steps_back <= 0.0) return current();
        if (steps_back > static_cast<double>(horizon_steps())) return tail_;
        const double lower = std::floor(steps_back);
        const auto j = static_cast<std::size_t>(lower);
        if (reading == PathReading::SampleHold) {
            // s in [-(j+1) eta, -j eta) holds the sample at -(j+1) eta.
            return lower == steps_back ? sample(j) : sample(j + 1);
        }
        const double frac = steps_back - lower;
        if (frac == 0.0) return sample(j);
        return (1.0 - frac) * sample(j) + frac * sample(j + 1);
    }

    // In-place shift: xi_{t + eta} from xi_t with xi(t + eta) = point.
    void push(const Vector& point) {
        require(point.size() == dim(), "CrPath::push: dimension mismatch");
        values_.push_back(point);
        while (values_.size() > capacity_ + 1) absorb_oldest();
    }

    CrPath shifted(const Vector& point) const {
        CrPath next = *this;
        next.push(point);
        return next;
    }

    bool same_grid(const CrPath& other) const {
        return dim() == other.dim() && grid_step_ == other.grid_step_ &&
               decay_rate_ == other.decay_rate_;
    }

    friend bool operator==(const CrPath& a, const CrPath& b) {
        if (!a.same_grid(b)) return false;
        const std::size_t n = std::max(a.size(), b.size());
        for (std::size_t j = 0; j < n; ++j) {
            if (a.sample(j) != b.sample(j)) return false;
        }
        return a.tail_ == b.tail_;
    }

private:
    void absorb_oldest() {
        tail_ = values_.front();
        values_.pop_front();
    }

    double grid_step_;
    double decay_rate_;
    std::size_t capacity_;
    std::deque<Vector> values_;
    Vector tail_;
};

inline CrPath shift_append(const CrPath& path, const Vector& new_point) {
    return path.shifted(new_point);
}

// sup_{s <= 0} e^{rs} |xi(s)|, attained on the grid or at the start of the tail.
inline double r_norm(const CrPath& path) {
    const double decay = std::exp(-path.decay_rate() * path.grid_step());
    double weight = 1.0;
    double best = 0.0;
    for (std::size_t j = 0; j < path.size(); ++j) {
        best = std::max(best, weight * path.sample(j).norm());
        if (j + 1 < path.size()) weight *= decay;
    }
    return std::max(best, weight * path.tail().norm());
}

// r-norm of the pointwise difference; the shorter buffer is read through its tail.
inline double rho_r(const CrPath& p1, const CrPath& p2) {
    if (!p1.same_grid(p2)) {
        throw ConfigError("rho_r: paths must share dimension, grid_step and decay_rate");
    }
    const std::size_t n = std::max(p1.size(), p2.size());
    const double decay = std::exp(-p1.decay_rate() * p1.grid_step());
    double weight = 1.0;
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        best = std::max(best, weight * (p1.sample(j) - p2.sample(j)).norm());
        if (j + 1 < n) weight *= decay;
    }
    return std::max(best, weight * (p1.tail() - p2.tail()).norm());
}

inline double rho_r_delta(const CrPath& p1, const CrPath& p2, double delta) {
    require(delta > 0.0, "rho_r_delta: delta must be positive");
    return std::min(1.0, rho_r(p1, p2) / delta);
}

inline double tilde_rho(const CrPath& p1, const CrPath& p2, double delta) {
    const double n1 = r_norm(p1);
    const double n2 = r_norm(p2);
    return std::sqrt(rho_r_delta(p1, p2, delta) *
                     (1.0 + std::pow(n1, 4) + std::pow(n2, 4)));
}

/// Running r-norm of a trajectory's path segment: for a chain sampled on the
/// eta-grid, |X_{t+eta}|_r = max(|X(t+eta)|, e^{-r eta} |X_t|_r) exactly.
class RunningRNorm {
public:
    RunningRNorm(double initial_norm, double decay_rate, double grid_step)
        : value_(initial_norm), decay_(std::exp(-decay_rate * grid_step)) {}

    void advance(double newest_point_norm) {
        value_ = std::max(newest_point_norm, decay_ * value_);
    }
    void reset(double value) { value_ = value; }
    double value() const { return value_; }

private:
    double value_;
    double decay_;
};

}  // namespace clipadam
