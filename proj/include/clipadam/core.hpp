#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace clipadam {

using Vector = Eigen::VectorXd;

// Raised for invalid parameters or inconsistent inputs (CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when a trajectory produces non-finite state (CLI exit code 2).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ConfigError(message);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// 1 - e^{-x}, accurate for small x.
inline double one_minus_exp_neg(double x) { return -std::expm1(-x); }

}  // namespace clipadam
