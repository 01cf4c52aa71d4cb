#pragma once

#include "clipadam/core.hpp"
#include "clipadam/optimizers.hpp"
#include "clipadam/problems.hpp"
#include "clipadam/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace clipadam::harness {

// Every key the loader understands.  Anything else is rejected so that typos
// fail loudly instead of silently running the defaults.
inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "problem.name", "problem.dim", "problem.n", "problem.K", "problem.lambda", "problem.data_seed",
        "problem.height", "problem.tilt", "problem.data_noise", "problem.sigma", "problem.truncation",
        "problem.feature_bound", "problem.curvature", "problem.dataset_csv",
        "optimizer.algorithm", "optimizer.eta", "optimizer.beta", "optimizer.fine_step", "optimizer.frozen_scale",
        "drift.c1", "drift.c2", "drift.epsilon", "drift.r",
        "run.replicas", "run.horizon", "run.burn_in", "run.checkpoint_every", "run.seed", "run.workers",
        "init.theta0", "init.theta0_prime",
        "sweep.axis", "sweep.values", "sweep.draws", "sweep.fine_ratio",
        "fit.input", "fit.metric", "fit.model", "fit.min_x",
        "diagnose.p", "diagnose.reading", "diagnose.gap_replicas", "diagnose.gap_snapshots", "diagnose.chains",
        "diagnose.samples_per_chain", "diagnose.burn_in_steps", "diagnose.thin", "diagnose.grid_lo",
        "diagnose.grid_hi", "diagnose.grid_points",
    };
    return keys;
}

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Flat key = value store with dotted keys; `#` starts a comment.
class ConfigMap {
public:
    static ConfigMap parse(const std::string& text, const std::string& origin = "<string>") {
        ConfigMap out;
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
            }
            out.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return out;
    }

    static ConfigMap load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str(), path);
    }

    void set(const std::string& key, const std::string& value) {
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
        values_[key] = value;
    }

    // "key=value" from the command line.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must look like key=value");
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_double(key, it->second);
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_uint(key, it->second);
    }

    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_double(key, item));
        }
        return out;
    }

    // Canonical "key=value\n" text in key order; the config hash is taken over it.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

    static double parse_double(const std::string& key, const std::string& text) {
        if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
            throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
        }
        return v;
    }

    static std::uint64_t parse_uint(const std::string& key, const std::string& text) {
        if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); })) {
            throw ConfigError("config key '" + key + "': '" + text + "' is not a nonnegative integer");
        }
        errno = 0;
        const unsigned long long v = std::strtoull(text.c_str(), nullptr, 10);
        if (errno == ERANGE) throw ConfigError("config key '" + key + "': '" + text + "' is out of range");
        return static_cast<std::uint64_t>(v);
    }

private:
    std::map<std::string, std::string> values_;
};

// FNV-1a over the canonical text, as 16 hex digits.
inline std::string config_hash(const ConfigMap& map) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : map.canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ExperimentConfig {
    ProblemParams problem;
    OptimizerConfig optimizer;
    Algorithm algorithm = Algorithm::ClippedAdam;
    double fine_step = 0.0;
    double frozen_scale = 0.0;
    std::size_t replicas = 100;
    double horizon = 10.0;
    double burn_in = 0.2;
    std::uint64_t checkpoint_every = 0;
    std::size_t workers = 1;
    Vector theta0;
    std::optional<Vector> theta0_prime;
    std::string hash;

    std::uint64_t seed() const { return optimizer.seed; }

    EnsembleSpec ensemble_spec() const {
        EnsembleSpec spec;
        spec.algorithm = algorithm;
        spec.replicas = replicas;
        spec.horizon = horizon;
        spec.checkpoint_every = checkpoint_every;
        spec.fine_step = fine_step;
        spec.frozen_scale = frozen_scale;
        spec.seed = optimizer.seed;
        spec.workers = workers;
        return spec;
    }
};

namespace detail {

inline Vector read_point(const ConfigMap& map, const std::string& key, Eigen::Index dim, double fallback) {
    auto values = map.get_list(key);
    if (values.empty()) return Vector::Constant(dim, fallback);
    if (values.size() == 1) return Vector::Constant(dim, values.front());
    if (static_cast<Eigen::Index>(values.size()) != dim) {
        throw ConfigError("config key '" + key + "' has " + std::to_string(values.size()) +
                          " entries but problem.dim = " + std::to_string(dim));
    }
    return Eigen::Map<const Vector>(values.data(), dim);
}

}  // namespace detail

/// Builds and validates an experiment.  Every constraint the dynamics rely on
/// is checked here, including the problem-dependent beta >= 2/m and m/3 > r.
inline ExperimentConfig load_experiment(const ConfigMap& map) {
    ExperimentConfig cfg;
    ProblemParams& p = cfg.problem;
    p.name = map.get_string("problem.name", p.name);
    p.dim = static_cast<Eigen::Index>(map.get_uint("problem.dim", static_cast<std::uint64_t>(p.dim)));
    p.n = map.get_uint("problem.n", p.n);
    p.radius_K = map.get_double("problem.K", p.radius_K);
    p.lambda = map.get_double("problem.lambda", p.lambda);
    p.data_seed = map.get_uint("problem.data_seed", p.data_seed);
    p.height = map.get_double("problem.height", p.height);
    p.tilt = map.get_double("problem.tilt", p.tilt);
    p.data_noise = map.get_double("problem.data_noise", p.data_noise);
    p.sigma = map.get_double("problem.sigma", p.sigma);
    p.truncation = map.get_double("problem.truncation", p.truncation);
    p.feature_bound = map.get_double("problem.feature_bound", p.feature_bound);
    p.curvature = map.get_double("problem.curvature", p.curvature);
    p.dataset_csv = map.get_string("problem.dataset_csv", p.dataset_csv);
    static const std::set<std::string> kProblems{"double_well", "sinusoidal", "logistic", "quadratic", "flat"};
    if (!kProblems.count(p.name)) throw ConfigError("unknown problem id '" + p.name + "'");
    require(p.dim >= 1, "problem.dim >= 1 violated");
    require(p.n >= 1, "problem.n >= 1 violated");
    require(p.radius_K > 0.0, "problem.K > 0 violated");
    require(p.lambda > 0.0, "problem.lambda > 0 violated");

    OptimizerConfig& o = cfg.optimizer;
    cfg.algorithm = parse_algorithm(map.get_string("optimizer.algorithm", "clipped_adam"));
    o.eta = map.get_double("optimizer.eta", o.eta);
    o.beta = map.get_double("optimizer.beta", o.beta);
    cfg.fine_step = map.get_double("optimizer.fine_step", 0.0);
    cfg.frozen_scale = map.get_double("optimizer.frozen_scale", 0.0);
    o.drift.c1 = map.get_double("drift.c1", o.drift.c1);
    o.drift.c2 = map.get_double("drift.c2", o.drift.c2);
    o.drift.epsilon = map.get_double("drift.epsilon", o.drift.epsilon);
    o.drift.r = map.get_double("drift.r", o.drift.r);
    o.seed = map.get_uint("run.seed", 0);

    const RegularizerSpec reg = build_regularizer(p.radius_K, p.lambda, p.dim);
    o.validate(reg.dissipativity_m);
    if (cfg.fine_step != 0.0) {
        require(cfg.fine_step > 0.0 && cfg.fine_step <= o.eta / 4.0 * (1.0 + 1e-12),
                "optimizer.fine_step in (0, eta/4] violated");
        const double ratio = o.eta / cfg.fine_step;
        require(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio, "eta / fine_step must be an integer");
    }
    require(cfg.frozen_scale == 0.0 || cfg.frozen_scale >= std::sqrt(o.drift.epsilon),
            "optimizer.frozen_scale >= sqrt(epsilon) violated");

    cfg.replicas = map.get_uint("run.replicas", cfg.replicas);
    cfg.horizon = map.get_double("run.horizon", cfg.horizon);
    cfg.burn_in = map.get_double("run.burn_in", cfg.burn_in);
    cfg.checkpoint_every = map.get_uint("run.checkpoint_every", 0);
    cfg.workers = map.get_uint("run.workers", 1);
    require(cfg.replicas >= 1, "replicas >= 1 violated");
    require(cfg.horizon >= 0.0 && std::isfinite(cfg.horizon), "horizon >= 0 violated");
    require(cfg.burn_in >= 0.0 && cfg.burn_in < 1.0, "run.burn_in in [0, 1) violated");
    require(cfg.workers >= 1, "run.workers >= 1 violated");

    cfg.theta0 = detail::read_point(map, "init.theta0", p.dim, 1.0);
    if (map.has("init.theta0_prime")) cfg.theta0_prime = detail::read_point(map, "init.theta0_prime", p.dim, 0.0);
    cfg.hash = config_hash(map);
    return cfg;
}

enum class SweepAxis { Eta, Beta, N, Horizon };

inline SweepAxis parse_axis(const std::string& name) {
    if (name == "eta") return SweepAxis::Eta;
    if (name == "beta") return SweepAxis::Beta;
    if (name == "n") return SweepAxis::N;
    if (name == "horizon") return SweepAxis::Horizon;
    throw ConfigError("sweep.axis must be one of eta, beta, n, horizon (got '" + name + "')");
}

inline std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::Eta: return "eta";
        case SweepAxis::Beta: return "beta";
        case SweepAxis::N: return "n";
        case SweepAxis::Horizon: return "horizon";
    }
    return "unknown";
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::Eta;
    std::vector<double> values;
    std::size_t draws = 1;          // dataset draws per value (n axis)
    std::uint64_t fine_ratio = 16;  // eta / h for the discretization gap (eta axis)
    ConfigMap base;
};

inline SweepSpec load_sweep(const ConfigMap& map) {
    SweepSpec s;
    s.axis = parse_axis(map.get_string("sweep.axis", "eta"));
    s.values = map.get_list("sweep.values");
    s.draws = map.get_uint("sweep.draws", 1);
    s.fine_ratio = map.get_uint("sweep.fine_ratio", 16);
    s.base = map;
    require(!s.values.empty(), "sweep.values must list at least one value");
    require(s.draws >= 1, "sweep.draws >= 1 violated");
    require(s.fine_ratio >= 4, "sweep.fine_ratio >= 4 violated");
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        require(s.values[i] > 0.0, "sweep values must be strictly positive");
        require(i == 0 || s.values[i] > s.values[i - 1], "sweep values must be strictly increasing");
        if (s.axis == SweepAxis::N) {
            require(s.values[i] == std::floor(s.values[i]), "n sweep values must be integers");
        }
    }
    load_experiment(map);
    return s;
}

// Text form of a sweep value that round-trips through the config parser.
inline std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Base config with the swept hyperparameter set to `value`.
inline ConfigMap sweep_point(const SweepSpec& spec, double value) {
    ConfigMap map = spec.base;
    switch (spec.axis) {
        case SweepAxis::Eta: map.set("optimizer.eta", format_value(value)); break;
        case SweepAxis::Beta: map.set("optimizer.beta", format_value(value)); break;
        case SweepAxis::N: map.set("problem.n", std::to_string(static_cast<std::uint64_t>(value))); break;
        case SweepAxis::Horizon: map.set("run.horizon", format_value(value)); break;
    }
    return map;
}

}  // namespace clipadam::harness
