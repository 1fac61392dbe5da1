// Run configuration for the command-line front end. A JSON file supplies any
// subset of the fields, command-line flags are merged on top, and the result
// is validated as a whole. Unknown keys are errors.

#pragma once

#include "qmarkov/estimator.hpp"
#include "qmarkov/qubit_model.hpp"
#include "qmarkov/trajectory.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmarkov {

/// Invalid configuration. The message starts with the offending field path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class StrategyName { adaptive, adaptive_with_system, fixed, two_stage };

inline const char* to_string(StrategyName s) {
    switch (s) {
        case StrategyName::adaptive: return "adaptive";
        case StrategyName::adaptive_with_system: return "adaptive_with_system";
        case StrategyName::fixed: return "fixed";
        case StrategyName::two_stage: return "two_stage";
    }
    return "?";
}

struct RunConfig {
    struct Model {
        double lambda = 0.8;
        double phi = std::numbers::pi / 4.0;
        double theta0 = 0.0;
        double theta_true = 0.0;
    } model;
    struct Sim {
        std::size_t n = 200;
        std::size_t n_traj = 10000;
        std::uint64_t seed = 0;
        StrategyName strategy = StrategyName::adaptive;
        double fixed_basis_angle = 0.0;
        double initial_angle = 0.0;
        std::size_t n_max = 100;  // fisher: rows at n_step, 2 n_step, ..., n_max
        std::size_t n_step = 10;
        std::size_t n_runs = 10000;  // mle
        std::vector<std::size_t> n_list;  // mle: sizes to study; empty means {n}
        double epsilon = 0.2;  // two-stage split
    } sim;
    struct Mle {
        std::optional<double> search_lo;  // default theta0 - 0.3
        std::optional<double> search_hi;  // default theta0 + 0.3
        double tol = 1e-6;
        std::size_t grid_points = 41;
    } mle;
    struct Output {
        std::string dir = ".";
        std::string format = "csv";
    } output;

    QubitModelParams params_at(double theta) const { return {theta, model.lambda, model.phi}; }

    MleConfig mle_config() const {
        MleConfig c = MleConfig::around(model.theta0);
        if (mle.search_lo) c.search_lo = *mle.search_lo;
        if (mle.search_hi) c.search_hi = *mle.search_hi;
        c.tol = mle.tol;
        c.grid_points = mle.grid_points;
        return c;
    }

    Strategy strategy() const {
        switch (sim.strategy) {
            case StrategyName::fixed: return Strategy::fixed(basis_from_angle(wrap_half_pi(sim.fixed_basis_angle)));
            case StrategyName::adaptive_with_system: return Strategy::adaptive_with_system(sim.initial_angle);
            default: return Strategy::adaptive(sim.initial_angle);
        }
    }

    std::vector<std::size_t> mle_sizes() const { return sim.n_list.empty() ? std::vector<std::size_t>{sim.n} : sim.n_list; }
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown key");
}

inline double get_real(const json& obj, const std::string& key, const std::string& path, double def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::uint64_t get_uint(const json& obj, const std::string& key, const std::string& path, std::uint64_t def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path, const std::string& def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace detail

/// Parse and validate. `j` is the merged document (file plus flag overrides).
inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::get_real, detail::get_uint, detail::get_string, detail::require;
    RunConfig c;
    const nlohmann::json root = j.is_null() ? nlohmann::json::object() : j;
    detail::check_keys(root, "", {"model", "sim", "mle", "output"});
    const auto section = [&](const char* name) { return root.contains(name) ? root.at(name) : nlohmann::json::object(); };

    const auto m = section("model");
    detail::check_keys(m, "model", {"lambda", "phi", "theta0", "theta_true"});
    c.model.lambda = get_real(m, "lambda", "model", c.model.lambda);
    c.model.phi = get_real(m, "phi", "model", c.model.phi);
    c.model.theta0 = get_real(m, "theta0", "model", c.model.theta0);
    c.model.theta_true = get_real(m, "theta_true", "model", c.model.theta_true);
    require(c.model.lambda > 0.0 && c.model.lambda <= 1.0, "model.lambda", "must lie in (0, 1]");
    require(std::isfinite(c.model.phi), "model.phi", "must be finite");
    require(std::abs(c.model.theta0) < 1.0, "model.theta0", "must satisfy |theta0| < 1");
    require(std::abs(c.model.theta_true) < 1.0, "model.theta_true", "must satisfy |theta_true| < 1");

    const auto s = section("sim");
    detail::check_keys(s, "sim", {"n", "n_traj", "seed", "strategy", "fixed_basis_angle", "initial_angle", "n_max",
                                  "n_step", "n_runs", "n_list", "epsilon"});
    c.sim.n = get_uint(s, "n", "sim", c.sim.n);
    c.sim.n_traj = get_uint(s, "n_traj", "sim", c.sim.n_traj);
    c.sim.seed = get_uint(s, "seed", "sim", c.sim.seed);
    const std::string strat = get_string(s, "strategy", "sim", "adaptive");
    if (strat == "adaptive") c.sim.strategy = StrategyName::adaptive;
    else if (strat == "adaptive_with_system") c.sim.strategy = StrategyName::adaptive_with_system;
    else if (strat == "fixed") c.sim.strategy = StrategyName::fixed;
    else if (strat == "two_stage") c.sim.strategy = StrategyName::two_stage;
    else throw ConfigError("sim.strategy: must be one of adaptive, adaptive_with_system, fixed, two_stage");
    c.sim.fixed_basis_angle = get_real(s, "fixed_basis_angle", "sim", c.sim.fixed_basis_angle);
    c.sim.initial_angle = get_real(s, "initial_angle", "sim", c.sim.initial_angle);
    c.sim.n_max = get_uint(s, "n_max", "sim", c.sim.n_max);
    c.sim.n_step = get_uint(s, "n_step", "sim", c.sim.n_step);
    c.sim.n_runs = get_uint(s, "n_runs", "sim", c.sim.n_runs);
    c.sim.epsilon = get_real(s, "epsilon", "sim", c.sim.epsilon);
    if (s.contains("n_list")) {
        const auto& l = s.at("n_list");
        require(l.is_array(), "sim.n_list", "expected an array");
        for (std::size_t i = 0; i < l.size(); ++i) {
            const std::string f = "sim.n_list[" + std::to_string(i) + "]";
            require(l[i].is_number_integer() && l[i].get<std::int64_t>() >= 1, f, "expected a positive integer");
            c.sim.n_list.push_back(l[i].get<std::size_t>());
        }
    }
    require(c.sim.n >= 1, "sim.n", "must be >= 1");
    require(c.sim.n_traj >= 2, "sim.n_traj", "must be >= 2");
    require(std::isfinite(c.sim.fixed_basis_angle), "sim.fixed_basis_angle", "must be finite");
    require(std::isfinite(c.sim.initial_angle), "sim.initial_angle", "must be finite");
    require(c.sim.n_step >= 1, "sim.n_step", "must be >= 1");
    require(c.sim.n_max >= c.sim.n_step, "sim.n_max", "must be >= sim.n_step");
    require(c.sim.n_runs >= 100, "sim.n_runs", "must be >= 100");
    require(c.sim.epsilon > 0.0 && c.sim.epsilon < 0.5, "sim.epsilon", "must lie in (0, 0.5)");

    const auto e = section("mle");
    detail::check_keys(e, "mle", {"search_lo", "search_hi", "tol", "grid_points"});
    if (e.contains("search_lo")) c.mle.search_lo = get_real(e, "search_lo", "mle", 0.0);
    if (e.contains("search_hi")) c.mle.search_hi = get_real(e, "search_hi", "mle", 0.0);
    c.mle.tol = get_real(e, "tol", "mle", c.mle.tol);
    c.mle.grid_points = get_uint(e, "grid_points", "mle", c.mle.grid_points);
    const auto mc = c.mle_config();
    require(mc.search_lo < mc.search_hi, "mle.search_lo", "must be < mle.search_hi");
    require(std::abs(mc.search_lo) < 1.0 && std::abs(mc.search_hi) < 1.0, "mle.search_hi",
            "search interval must lie inside (-1, 1)");
    require(c.mle.tol > 0.0, "mle.tol", "must be > 0");
    require(c.mle.grid_points >= 3, "mle.grid_points", "must be >= 3");

    const auto o = section("output");
    detail::check_keys(o, "output", {"dir", "format"});
    c.output.dir = get_string(o, "dir", "output", c.output.dir);
    c.output.format = get_string(o, "format", "output", c.output.format);
    require(c.output.format == "csv" || c.output.format == "json", "output.format", "must be csv or json");
    require(!c.output.dir.empty(), "output.dir", "must not be empty");
    return c;
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
}

}  // namespace qmarkov
