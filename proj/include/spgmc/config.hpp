#ifndef SPGMC_CONFIG_HPP
#define SPGMC_CONFIG_HPP

// JSON run configuration.
//
// Solver keys (defaulted): mu0, alpha (number or "inf"), rho, sigma_exp,
// gamma_lo, gamma_hi, lambda, nu, max_iter, step_tol, mu_stop, init
// ("zero" | "observed"), svt_tau, svt_step, ablate_mu0 (array).
// Data keys: m, n, r (no defaults; required by commands that generate
// data), sr (default 0.8), var_a, var_b, c (default 1e-4, 0.1, 0.1),
// seed (default 0), solver ("spg" | "svt", default "spg").
// Unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spgmc/experiments.hpp"
#include "spgmc/spg_solver.hpp"
#include "spgmc/svt.hpp"

namespace spgmc {

/// Config schema violation; what() starts with the offending key path.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : ValidationError(key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  SolverConfig solver{};
  SvtConfig svt{};
  SolverKind solver_kind = SolverKind::kSpg;
  TrialSpec trial{};
  bool has_data_shape = false;  // m, n, r all present
  std::vector<double> ablate_mu0{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};

  void require_data_shape() const {
    if (!has_data_shape) throw ConfigError("m", "data keys m, n, r are required");
  }
};

namespace detail {

inline const std::set<std::string_view>& known_config_keys() {
  static const std::set<std::string_view> keys{
      "mu0",   "alpha", "rho",    "sigma_exp", "gamma_lo", "gamma_hi", "lambda",
      "nu",    "max_iter", "step_tol", "mu_stop", "seed", "m",        "n",
      "r",     "sr",    "var_a",  "var_b",     "c",        "solver",   "init",
      "svt_tau", "svt_step", "ablate_mu0"};
  return keys;
}

inline double json_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key, "must be finite");
  return d;
}

inline std::uint64_t json_count(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw ConfigError(key, "must be nonnegative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && std::floor(d) == d && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(key, "expected a nonnegative integer");
}

inline double json_alpha(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") {
      return std::numeric_limits<double>::infinity();
    }
    throw ConfigError("alpha", "expected a positive number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError("alpha", "expected a positive number or \"inf\"");
  return v.get<double>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("$", "config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!detail::known_config_keys().count(key)) throw ConfigError(key, "unknown key");
  }
  RunConfig cfg;
  SolverConfig& s = cfg.solver;
  auto real = [&](const char* key, double& dst) {
    if (doc.contains(key)) dst = detail::json_real(doc.at(key), key);
  };
  real("mu0", s.mu0);
  if (doc.contains("alpha")) s.alpha = detail::json_alpha(doc.at("alpha"));
  real("rho", s.rho);
  real("sigma_exp", s.sigma_exp);
  real("gamma_lo", s.gamma_lo);
  real("gamma_hi", s.gamma_hi);
  real("lambda", s.penalty.lambda);
  real("nu", s.penalty.nu);
  real("step_tol", s.step_tol);
  real("mu_stop", s.mu_stop);
  if (doc.contains("max_iter")) s.max_iter = detail::json_count(doc.at("max_iter"), "max_iter");
  if (doc.contains("seed")) {
    s.seed = detail::json_count(doc.at("seed"), "seed");
    cfg.trial.seed = s.seed;
  }
  if (doc.contains("init")) {
    const auto& v = doc.at("init");
    if (v == "zero") {
      s.init = InitPolicy::kZero;
    } else if (v == "observed") {
      s.init = InitPolicy::kObserved;
    } else {
      throw ConfigError("init", "expected \"zero\" or \"observed\"");
    }
  }
  if (doc.contains("solver")) {
    const auto& v = doc.at("solver");
    if (v == "spg") {
      cfg.solver_kind = SolverKind::kSpg;
    } else if (v == "svt") {
      cfg.solver_kind = SolverKind::kSvt;
    } else {
      throw ConfigError("solver", "expected \"spg\" or \"svt\"");
    }
  }
  real("svt_tau", cfg.svt.tau);
  real("svt_step", cfg.svt.step);
  cfg.svt.max_iter = s.max_iter;
  if (doc.contains("ablate_mu0")) {
    const auto& v = doc.at("ablate_mu0");
    if (!v.is_array() || v.empty()) throw ConfigError("ablate_mu0", "expected a non-empty array");
    cfg.ablate_mu0.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string key = "ablate_mu0[" + std::to_string(i) + "]";
      const double mu0 = detail::json_real(v[i], key);
      if (!(mu0 > 0.0)) throw ConfigError(key, "must be positive");
      cfg.ablate_mu0.push_back(mu0);
    }
  }

  TrialSpec& t = cfg.trial;
  const int shape_keys =
      static_cast<int>(doc.contains("m")) + doc.contains("n") + doc.contains("r");
  if (shape_keys != 0 && shape_keys != 3) {
    for (const char* k : {"m", "n", "r"}) {
      if (!doc.contains(k)) throw ConfigError(k, "required together with the other data keys");
    }
  }
  if (shape_keys == 3) {
    cfg.has_data_shape = true;
    t.m = detail::json_count(doc.at("m"), "m");
    t.n = detail::json_count(doc.at("n"), "n");
    t.r = detail::json_count(doc.at("r"), "r");
  }
  real("sr", t.sr);
  real("var_a", t.noise.var_a);
  real("var_b", t.noise.var_b);
  real("c", t.noise.c);

  // Re-key validation failures onto the config key path.
  try {
    s.validate();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(msg.substr(0, colon),
                      colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  try {
    cfg.svt.validate();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    throw ConfigError("svt_" + msg.substr(0, msg.find(':')), msg.substr(msg.find(':') + 2));
  }
  try {
    t.noise.validate();
    if (!(t.sr > 0.0 && t.sr <= 1.0)) throw ValidationError("sr: must lie in (0, 1]");
    if (cfg.has_data_shape) t.validate();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(msg.substr(0, colon),
                      colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return cfg;
}

inline RunConfig config_read(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

/// Applies "key=value" on top of a parsed JSON document. The value is read
/// as JSON when it parses, otherwise as a bare string (so alpha=inf works).
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--override", "expected key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  doc[key] = value;
}

}  // namespace spgmc

#endif  // SPGMC_CONFIG_HPP
