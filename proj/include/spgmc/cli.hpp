#ifndef SPGMC_CLI_HPP
#define SPGMC_CLI_HPP

// Command-line driver. Subcommands:
//   synth                      ground truth M.csv, observations mask.csv, meta.json
//   solve MASK.csv [TRUTH.csv] completion; with --trials T a Monte Carlo run instead
//   rpca L.csv [TRUTH.csv]     l1 fit to a fully observed matrix
//   inpaint IMAGE.pgm          mask + noise injection, completion, PSNR
//   ablate                     mu0 sweep x alpha in {0.8, inf}
//   eval X.csv M.csv           rmse / psnr of two matrices
// Exit status: 0 success, 1 invalid input or arguments, 2 runtime failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spgmc/config.hpp"
#include "spgmc/experiments.hpp"
#include "spgmc/io.hpp"
#include "spgmc/smoothing_loss.hpp"
#include "spgmc/spg_solver.hpp"
#include "spgmc/svt.hpp"

namespace spgmc::cli {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<std::size_t> trials;
  std::optional<std::string> solver;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline RunConfig load_config(const CommonArgs& args) {
  nlohmann::json doc = nlohmann::json::object();
  if (!args.config_path.empty()) {
    const std::string bytes = read_file(args.config_path);
    doc = nlohmann::json::parse(bytes, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("$", "invalid JSON in '" + args.config_path + "'");
  }
  if (!doc.is_object()) throw ConfigError("$", "config must be a JSON object");
  for (const auto& o : args.overrides) apply_override(doc, o);
  if (args.solver) doc["solver"] = *args.solver;
  if (args.seed) doc["seed"] = *args.seed;
  return config_from_json(doc);
}

inline std::filesystem::path out_path(const CommonArgs& args, const char* name) {
  std::filesystem::create_directories(args.out_dir);
  return std::filesystem::path(args.out_dir) / name;
}

inline void write_out(const CommonArgs& args, const char* name, std::string_view bytes) {
  write_file(out_path(args, name).string(), bytes);
}

// JSON has no infinity; +inf is spelled as a string, NaN as null.
inline nlohmann::json real_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

inline std::string alpha_text(double alpha) {
  return std::isinf(alpha) ? std::string("inf") : format_real(alpha);
}

struct Timed {
  SolveResult result;
  double wall_time_s = 0.0;
};

template <typename Fn>
Timed timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult r = fn();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return Timed{std::move(r), s};
}

inline nlohmann::json metrics_json(const RunConfig& cfg, const Timed& t,
                                   const std::optional<Matrix>& truth) {
  nlohmann::json m;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m["rmse"] = real_json(truth ? rmse(t.result.X_final, *truth) : nan);
  m["psnr"] = real_json(truth ? psnr(t.result.X_final, *truth) : nan);
  m["rank"] = rank_estimate(t.result.sigma_final);
  m["iterations"] = t.result.iterations();
  m["wall_time_s"] = t.wall_time_s;
  m["stationarity_residual"] = real_json(t.result.stationarity_residual);
  m["objective_gap"] = real_json(t.result.objective_gap);
  m["status"] = to_string(t.result.status);
  m["solver"] = to_string(cfg.solver_kind);
  m["seed"] = cfg.solver.seed;
  m["prng"] = kPrngName;
  return m;
}

inline void write_solution(const CommonArgs& args, const RunConfig& cfg, const Timed& t,
                           const std::optional<Matrix>& truth, std::ostream& out) {
  write_out(args, "X.csv", matrix_csv_write(t.result.X_final));
  write_out(args, "trace.csv", trace_csv_write(t.result.trace));
  const nlohmann::json m = metrics_json(cfg, t, truth);
  write_out(args, "metrics.json", m.dump(2) + "\n");
  out << m.dump() << "\n";
}

inline SolveResult solve_completion(const RunConfig& cfg, const MaskedData& data) {
  SolverChoice choice{cfg.solver_kind, cfg.solver, cfg.svt};
  return run_solver(choice, data);
}

inline void advise(const RunConfig& cfg, std::size_t terms, std::ostream& err) {
  if (cfg.solver_kind != SolverKind::kSpg) return;
  const double lf = std::sqrt(static_cast<double>(terms));
  if (cfg.solver.penalty.exceeds_threshold_bound(lf)) {
    err << "warning: nu = " << format_real(cfg.solver.penalty.nu) << " >= lambda / L_f = "
        << format_real(cfg.solver.penalty.lambda / lf) << "\n";
  }
}

inline Matrix read_matrix(const std::string& path) { return matrix_csv_read(read_file(path)); }

inline int cmd_synth(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = load_config(args);
  cfg.require_data_shape();
  const TrialData trial = make_trial(cfg.trial);
  write_out(args, "M.csv", matrix_csv_write(trial.truth));
  write_out(args, "mask.csv", mask_csv_write(trial.observed));
  nlohmann::json meta;
  meta["m"] = cfg.trial.m;
  meta["n"] = cfg.trial.n;
  meta["r"] = cfg.trial.r;
  meta["sr"] = cfg.trial.sr;
  meta["var_a"] = cfg.trial.noise.var_a;
  meta["var_b"] = cfg.trial.noise.var_b;
  meta["c"] = cfg.trial.noise.c;
  meta["observed"] = trial.observed.size();
  meta["seed"] = cfg.trial.seed;
  meta["prng"] = kPrngName;
  write_out(args, "meta.json", meta.dump(2) + "\n");
  out << "wrote M.csv, mask.csv (" << trial.observed.size() << " entries) to " << args.out_dir
      << "\n";
  return 0;
}

inline std::string trials_csv(const MonteCarloSummary& s) {
  std::string csv = "seed,ok,rmse,runtime_s,iterations,rank,status,stationarity_residual,error\n";
  for (const auto& o : s.outcomes) {
    std::string err = o.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ' ';
    }
    csv += std::to_string(o.seed) + ',' + (o.ok ? "1" : "0") + ',' +
           (o.ok ? format_real(o.rmse) : "") + ',' + format_real(o.runtime_s) + ',' +
           std::to_string(o.iterations) + ',' + std::to_string(o.rank) + ',' +
           (o.ok ? to_string(o.status) : "") + ',' +
           (o.ok ? format_real(o.stationarity_residual) : "") + ',' + err + '\n';
  }
  return csv;
}

inline int cmd_monte_carlo(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = load_config(args);
  cfg.require_data_shape();
  const SolverChoice choice{cfg.solver_kind, cfg.solver, cfg.svt};
  const MonteCarloSummary s = monte_carlo(cfg.trial, choice, *args.trials);
  write_out(args, "trials.csv", trials_csv(s));
  nlohmann::json j;
  j["trials"] = s.trials;
  j["failures"] = s.failures;
  j["mean_rmse"] = real_json(s.mean_rmse);
  j["median_rmse"] = real_json(s.median_rmse);
  j["mean_runtime_s"] = real_json(s.mean_runtime_s);
  j["mean_iterations"] = real_json(s.mean_iterations);
  j["solver"] = to_string(cfg.solver_kind);
  j["seed"] = cfg.trial.seed;
  j["prng"] = kPrngName;
  write_out(args, "summary.json", j.dump(2) + "\n");
  out << j.dump() << "\n";
  return s.failures == 0 ? 0 : 2;
}

inline int cmd_solve(const CommonArgs& args, const std::string& mask_path,
                     const std::string& truth_path, std::ostream& out, std::ostream& err) {
  if (args.trials) {
    if (!mask_path.empty()) throw ValidationError("--trials generates its own data; drop MASK");
    return cmd_monte_carlo(args, out);
  }
  if (mask_path.empty()) throw ValidationError("solve: MASK.csv is required without --trials");
  const RunConfig cfg = load_config(args);
  std::optional<Matrix> truth;
  if (!truth_path.empty()) truth = read_matrix(truth_path);

  const std::string text = read_file(mask_path);
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (cfg.has_data_shape) {
    rows = cfg.trial.m;
    cols = cfg.trial.n;
  } else if (truth) {
    rows = static_cast<std::size_t>(truth->rows());
    cols = static_cast<std::size_t>(truth->cols());
  } else {
    for (const auto& o : mask_csv_triplets(text)) {
      rows = std::max(rows, o.i + 1);
      cols = std::max(cols, o.j + 1);
    }
  }
  if (truth && (static_cast<std::size_t>(truth->rows()) != rows ||
                static_cast<std::size_t>(truth->cols()) != cols)) {
    throw ValidationError("solve: truth shape does not match the mask shape");
  }
  const MaskedData data = mask_csv_read(text, rows, cols);
  advise(cfg, data.size(), err);
  const Timed t = timed([&] { return solve_completion(cfg, data); });
  write_solution(args, cfg, t, truth, out);
  return 0;
}

inline int cmd_rpca(const CommonArgs& args, const std::string& input_path,
                    const std::string& truth_path, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(args);
  const Matrix l = read_matrix(input_path);
  std::optional<Matrix> truth;
  if (!truth_path.empty()) {
    truth = read_matrix(truth_path);
    require_same_shape(l, *truth, "rpca: truth");
  }
  advise(cfg, static_cast<std::size_t>(l.size()), err);
  const Timed t = timed([&] {
    if (cfg.solver_kind == SolverKind::kSvt) {
      IndexSet all;
      for (Eigen::Index i = 0; i < l.rows(); ++i)
        for (Eigen::Index j = 0; j < l.cols(); ++j)
          all.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      return svt_solve(MaskedData::from_matrix(l, all), cfg.svt);
    }
    return solve(SmoothedLoss::rpca(l), cfg.solver);
  });
  write_solution(args, cfg, t, truth, out);
  return 0;
}

inline int cmd_inpaint(const CommonArgs& args, const std::string& image_path, std::ostream& out,
                       std::ostream& err) {
  const RunConfig cfg = load_config(args);
  const Matrix image = pgm_read(read_file(image_path));
  const auto m = static_cast<std::size_t>(image.rows());
  const auto n = static_cast<std::size_t>(image.cols());
  const IndexSet omega = sample_mask(m, n, cfg.trial.sr, cfg.trial.seed);
  const MaskedData data = observe_with_noise(image, omega, cfg.trial.noise, cfg.trial.seed);
  advise(cfg, data.size(), err);
  const Timed t = timed([&] { return solve_completion(cfg, data); });
  write_out(args, "observed.pgm", pgm_write(data.observed_matrix()));
  write_out(args, "recovered.pgm", pgm_write(t.result.X_final));
  write_solution(args, cfg, t, image, out);
  return 0;
}

inline int cmd_ablate(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = load_config(args);
  cfg.require_data_shape();
  const std::size_t trials = args.trials.value_or(1);
  if (trials == 0) throw ValidationError("trials: must be positive");
  std::string csv =
      "mu0,alpha,trials,failures,mean_rmse,median_rmse,mean_runtime_s,mean_iterations\n";
  for (const double mu0 : cfg.ablate_mu0) {
    for (const double alpha : {0.8, std::numeric_limits<double>::infinity()}) {
      SolverChoice choice{SolverKind::kSpg, cfg.solver, cfg.svt};
      choice.spg.mu0 = mu0;
      choice.spg.alpha = alpha;
      const MonteCarloSummary s = monte_carlo(cfg.trial, choice, trials);
      auto cell = [](double v) { return std::isnan(v) ? std::string() : format_real(v); };
      csv += format_real(mu0) + ',' + alpha_text(alpha) + ',' + std::to_string(s.trials) + ',' +
             std::to_string(s.failures) + ',' + cell(s.mean_rmse) + ',' + cell(s.median_rmse) +
             ',' + cell(s.mean_runtime_s) + ',' + cell(s.mean_iterations) + '\n';
      out << "mu0=" << format_real(mu0) << " alpha=" << alpha_text(alpha)
          << " mean_rmse=" << cell(s.mean_rmse) << " mean_iterations=" << cell(s.mean_iterations)
          << "\n";
    }
  }
  write_out(args, "ablate.csv", csv);
  return 0;
}

inline int cmd_eval(const std::string& x_path, const std::string& m_path, std::ostream& out) {
  const Matrix x = read_matrix(x_path);
  const Matrix m = read_matrix(m_path);
  nlohmann::json j;
  j["rmse"] = real_json(rmse(x, m));
  j["psnr"] = real_json(psnr(x, m));
  out << j.dump() << "\n";
  return 0;
}

inline void add_common(CLI::App* cmd, CommonArgs& args, bool with_trials) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--out-dir", args.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--override", args.overrides, "key=value applied after the config (repeatable)")
      ->allow_extra_args(false);
  if (with_trials) cmd->add_option("--trials", args.trials, "Monte Carlo trial count");
  cmd->add_option("--solver", args.solver, "spg or svt")
      ->check(CLI::IsMember({"spg", "svt"}));
  cmd->add_option("--seed", args.seed, "seed for every random draw");
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank recovery with a capped-l1 spectral penalty", "spgmc"};
  app.require_subcommand(1, 1);

  CommonArgs args;
  std::string first;
  std::string second;

  auto* synth = app.add_subcommand("synth", "generate a synthetic completion instance");
  detail::add_common(synth, args, false);

  auto* solve_cmd = app.add_subcommand("solve", "complete a partially observed matrix");
  detail::add_common(solve_cmd, args, true);
  solve_cmd->add_option("mask", first, "observations, i,j,value CSV");
  solve_cmd->add_option("truth", second, "ground truth matrix CSV");

  auto* rpca = app.add_subcommand("rpca", "robust low-rank fit of a full matrix");
  detail::add_common(rpca, args, false);
  rpca->add_option("input", first, "observed matrix CSV")->required();
  rpca->add_option("truth", second, "ground truth matrix CSV");

  auto* inpaint = app.add_subcommand("inpaint", "recover a masked, noisy grayscale image");
  detail::add_common(inpaint, args, false);
  inpaint->add_option("image", first, "PGM image")->required();

  auto* ablate = app.add_subcommand("ablate", "sweep mu0 for alpha in {0.8, inf}");
  detail::add_common(ablate, args, true);

  auto* eval = app.add_subcommand("eval", "rmse and psnr of X against M");
  eval->add_option("x", first, "estimate CSV")->required();
  eval->add_option("m", second, "reference CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return detail::cmd_synth(args, out);
    if (solve_cmd->parsed()) return detail::cmd_solve(args, first, second, out, err);
    if (rpca->parsed()) return detail::cmd_rpca(args, first, second, out, err);
    if (inpaint->parsed()) return detail::cmd_inpaint(args, first, out, err);
    if (ablate->parsed()) return detail::cmd_ablate(args, out);
    return detail::cmd_eval(first, second, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace spgmc::cli

#endif  // SPGMC_CLI_HPP
