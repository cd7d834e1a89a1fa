#ifndef SPGMC_EXPERIMENTS_HPP
#define SPGMC_EXPERIMENTS_HPP

// Synthetic recovery protocol: uniform-factor low-rank ground truth, uniform
// random masks, two-component Gaussian mixture noise on observed entries,
// RMSE/PSNR metrics and Monte Carlo aggregation.
//
// All randomness comes from std::mt19937_64 engines seeded through
// std::seed_seq{seed, stream}, one stream per random object, so each draw is
// a pure function of (inputs, seed).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spgmc/linalg.hpp"
#include "spgmc/smoothing_loss.hpp"
#include "spgmc/spg_solver.hpp"
#include "spgmc/svt.hpp"

namespace spgmc {

inline constexpr const char* kPrngName = "mt19937_64+seed_seq(seed,stream)";

enum class RandomStream : std::uint32_t { kFactors = 1, kMask = 2, kNoise = 3 };

inline std::mt19937_64 make_engine(std::uint64_t seed, RandomStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

struct GmmNoiseParams {
  double var_a = 1e-4;
  double var_b = 0.1;
  double c = 0.1;

  void validate() const {
    if (!(var_a >= 0.0) || !std::isfinite(var_a)) throw ValidationError("var_a: must be >= 0");
    if (!(var_b >= 0.0) || !std::isfinite(var_b)) throw ValidationError("var_b: must be >= 0");
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("c: must lie in [0, 1]");
  }

  double mixture_variance() const { return (1.0 - c) * var_a + c * var_b; }
};

struct TrialSpec {
  std::size_t m = 40;
  std::size_t n = 40;
  std::size_t r = 3;
  double sr = 0.8;
  GmmNoiseParams noise{};
  std::uint64_t seed = 0;

  void validate() const {
    if (m == 0) throw ValidationError("m: must be positive");
    if (n == 0) throw ValidationError("n: must be positive");
    if (r == 0 || r > std::min(m, n)) throw ValidationError("r: must lie in [1, min(m, n)]");
    if (!(sr > 0.0 && sr <= 1.0)) throw ValidationError("sr: must lie in (0, 1]");
    noise.validate();
  }
};

/// M = M_L M_R^T with M_L (m x r), M_R (n x r) i.i.d. Uniform(-0.1, 0.3).
inline Matrix gen_low_rank(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ValidationError("gen_low_rank: dimensions must be positive");
  if (r == 0 || r > std::min(m, n)) throw ValidationError("r: must lie in [1, min(m, n)]");
  auto rng = make_engine(seed, RandomStream::kFactors);
  std::uniform_real_distribution<double> unif(-0.1, 0.3);
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ri = static_cast<Eigen::Index>(r);
  Matrix left(mi, ri);
  Matrix right(ni, ri);
  for (Eigen::Index j = 0; j < ri; ++j)
    for (Eigen::Index i = 0; i < mi; ++i) left(i, j) = unif(rng);
  for (Eigen::Index j = 0; j < ri; ++j)
    for (Eigen::Index i = 0; i < ni; ++i) right(i, j) = unif(rng);
  return left * right.transpose();
}

using IndexSet = std::vector<std::pair<std::size_t, std::size_t>>;

/// round-half-up(sr * m * n) distinct positions, uniformly at random,
/// returned in row-major order.
inline IndexSet sample_mask(std::size_t m, std::size_t n, double sr, std::uint64_t seed) {
  if (!(sr > 0.0 && sr <= 1.0)) throw ValidationError("sr: must lie in (0, 1]");
  const std::size_t total = m * n;
  const auto count = std::min(
      total, static_cast<std::size_t>(std::floor(sr * static_cast<double>(total) + 0.5)));
  std::vector<std::size_t> linear(total);
  std::iota(linear.begin(), linear.end(), std::size_t{0});
  auto rng = make_engine(seed, RandomStream::kMask);
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, total - 1);
    std::swap(linear[k], linear[pick(rng)]);
  }
  linear.resize(count);
  std::sort(linear.begin(), linear.end());
  IndexSet out;
  out.reserve(count);
  for (auto l : linear) out.emplace_back(l / n, l % n);
  return out;
}

struct GmmDraw {
  std::vector<double> values;
  std::vector<bool> outlier;  // drawn from the var_b component
};

inline GmmDraw gmm_noise_labeled(std::size_t count, const GmmNoiseParams& params,
                                 std::uint64_t seed) {
  params.validate();
  auto rng = make_engine(seed, RandomStream::kNoise);
  std::bernoulli_distribution pick_b(params.c);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd_a = std::sqrt(params.var_a);
  const double sd_b = std::sqrt(params.var_b);
  GmmDraw out;
  out.values.resize(count);
  out.outlier.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const bool b = pick_b(rng);
    out.outlier[k] = b;
    out.values[k] = (b ? sd_b : sd_a) * gauss(rng);
  }
  return out;
}

/// Samples of (1-c) N(0, var_a) + c N(0, var_b).
inline std::vector<double> gmm_noise(std::size_t count, const GmmNoiseParams& params,
                                     std::uint64_t seed) {
  return gmm_noise_labeled(count, params, seed).values;
}

inline double rmse(const Matrix& estimate, const Matrix& truth) {
  require_same_shape(estimate, truth, "rmse");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(truth.size()));
}

/// 10 log10(mn / ||X - M||_F^2) for images in [0, 1]; +inf for a perfect match.
inline double psnr(const Matrix& estimate, const Matrix& truth) {
  require_same_shape(estimate, truth, "psnr");
  const double err = (estimate - truth).squaredNorm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(truth.size()) / err);
}

/// Observes `truth` on `omega` and adds GMM noise to the observed values only.
inline MaskedData observe_with_noise(const Matrix& truth, const IndexSet& omega,
                                     const GmmNoiseParams& noise, std::uint64_t seed) {
  const std::vector<double> eps = gmm_noise(omega.size(), noise, seed);
  std::size_t k = 0;
  return MaskedData::from_matrix(truth, omega).with_values(
      [&](const Observation& o) { return o.value + eps[k++]; });
}

struct TrialData {
  Matrix truth;
  MaskedData observed;
};

inline TrialData make_trial(const TrialSpec& spec) {
  spec.validate();
  Matrix truth = gen_low_rank(spec.m, spec.n, spec.r, spec.seed);
  const IndexSet omega = sample_mask(spec.m, spec.n, spec.sr, spec.seed);
  MaskedData observed = observe_with_noise(truth, omega, spec.noise, spec.seed);
  return TrialData{std::move(truth), std::move(observed)};
}

enum class SolverKind { kSpg, kSvt };

inline const char* to_string(SolverKind s) { return s == SolverKind::kSpg ? "spg" : "svt"; }

struct SolverChoice {
  SolverKind kind = SolverKind::kSpg;
  SolverConfig spg{};
  SvtConfig svt{};
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double runtime_s = 0.0;
  std::size_t iterations = 0;
  std::size_t rank = 0;
  SolveStatus status = SolveStatus::kMaxIter;
  double stationarity_residual = std::numeric_limits<double>::quiet_NaN();
};

inline SolveResult run_solver(const SolverChoice& choice, const MaskedData& data) {
  if (choice.kind == SolverKind::kSvt) return svt_solve(data, choice.svt);
  return solve(SmoothedLoss::completion(data), choice.spg);
}

/// One synthetic trial: generate, solve, score.
inline TrialOutcome run_trial(const TrialSpec& spec, const SolverChoice& choice) {
  TrialOutcome out;
  out.seed = spec.seed;
  try {
    const TrialData trial = make_trial(spec);
    const auto start = std::chrono::steady_clock::now();
    const SolveResult res = run_solver(choice, trial.observed);
    out.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.rmse = rmse(res.X_final, trial.truth);
    out.iterations = res.iterations();
    out.rank = rank_estimate(res.sigma_final);
    out.status = res.status;
    out.stationarity_residual = res.stationarity_residual;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

struct MonteCarloSummary {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double mean_rmse = std::numeric_limits<double>::quiet_NaN();
  double median_rmse = std::numeric_limits<double>::quiet_NaN();
  double mean_runtime_s = std::numeric_limits<double>::quiet_NaN();
  double mean_iterations = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrialOutcome> outcomes;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline MonteCarloSummary summarize(std::vector<TrialOutcome> outcomes) {
  MonteCarloSummary s;
  s.trials = outcomes.size();
  std::vector<double> errs;
  double rt = 0.0;
  double it = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++s.failures;
      continue;
    }
    errs.push_back(o.rmse);
    rt += o.runtime_s;
    it += static_cast<double>(o.iterations);
  }
  if (!errs.empty()) {
    const auto ok = static_cast<double>(errs.size());
    s.mean_rmse = std::accumulate(errs.begin(), errs.end(), 0.0) / ok;
    s.median_rmse = median(errs);
    s.mean_runtime_s = rt / ok;
    s.mean_iterations = it / ok;
  }
  s.outcomes = std::move(outcomes);
  return s;
}

/// T independent trials with seeds spec.seed + t. Trials share nothing, so
/// callers may also fan them out; this runs them in order.
inline MonteCarloSummary monte_carlo(const TrialSpec& spec, const SolverChoice& choice,
                                     std::size_t trials) {
  if (trials == 0) throw ValidationError("trials: must be positive");
  spec.validate();
  std::vector<TrialOutcome> outcomes;
  outcomes.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    TrialSpec s = spec;
    s.seed = spec.seed + t;
    outcomes.push_back(run_trial(s, choice));
  }
  return summarize(std::move(outcomes));
}

}  // namespace spgmc

#endif  // SPGMC_EXPERIMENTS_HPP
