#pragma once

#include "clipadam/core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace clipadam {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of replica `index` under experiment seed `seed`:
//   derive_seed(seed, i) = mix64(seed ^ mix64(i + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + 1));
}

// Uniform in (0, 1) from the top 53 bits; never returns 0.
inline double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based standard normal source: the draw for (step, coordinate) is a
/// pure function of (seed, step, coordinate), so replicas, coupled chains and
/// re-runs are reproducible independent of scheduling.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double normal(std::uint64_t step, std::uint64_t coordinate) const {
        const std::uint64_t pair = coordinate >> 1;
        const std::uint64_t key = mix64(mix64(seed_ ^ mix64(step)) + pair);
        const double u1 = to_open_unit(mix64(key));
        const double u2 = to_open_unit(mix64(key ^ 0xd1b54a32d192ed03ULL));
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return (coordinate & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
    }

    double uniform(std::uint64_t step, std::uint64_t coordinate) const {
        return to_open_unit(mix64(mix64(seed_ ^ mix64(step ^ 0x5851f42d4c957f2dULL)) + coordinate));
    }

    void fill(std::uint64_t step, Vector& out) const {
        for (Eigen::Index i = 0; i < out.size(); ++i) {
            out[i] = normal(step, static_cast<std::uint64_t>(i));
        }
    }

    Vector draw(std::uint64_t step, Eigen::Index dim) const {
        Vector out(dim);
        fill(step, out);
        return out;
    }

    // Standard normal equal to (W(t + count h) - W(t)) / sqrt(count h) when the
    // fine increments over [t, t + count h] are draws first_step .. first_step + count - 1.
    void fill_aggregated(std::uint64_t first_step, std::uint64_t count, Vector& out) const {
        out.setZero();
        for (std::uint64_t k = 0; k < count; ++k) {
            for (Eigen::Index i = 0; i < out.size(); ++i) {
                out[i] += normal(first_step + k, static_cast<std::uint64_t>(i));
            }
        }
        out /= std::sqrt(static_cast<double>(count));
    }

private:
    std::uint64_t seed_;
};

}  // namespace clipadam
