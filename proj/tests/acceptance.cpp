// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "spgmc/cli.hpp"
#include "spgmc/experiments.hpp"
#include "spgmc/io.hpp"

using namespace spgmc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o) {
  std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

DVector random_d(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution two(0.5);
  std::vector<std::uint8_t> d(n);
  for (auto& e : d) e = two(rng) ? 2 : 1;
  return DVector(d);
}

// ------------------------------------------------------------------ 1

Outcome prox_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_real_distribution<double> wdist(0.0, 3.0);
  std::uniform_real_distribution<double> ratio(0.01, 2.0);
  std::uniform_real_distribution<double> nudist(0.05, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int n = len(rng);
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = wdist(rng);
    const DVector d = random_d(static_cast<std::size_t>(n), rng);
    const double nu = nudist(rng);
    const double tau = ratio(rng) * nu;
    const Vector x = prox_vector(w, d, tau, nu);
    double got = 0.0;
    double ref = 0.0;
    for (int i = 0; i < n; ++i) {
      auto f = [&](double t) { return oracle::coord_objective(t, w[i], d[i], tau, nu); };
      got += f(x[i]);
      ref += f(oracle::grid_minimize(f, 0.0, w[i] + 1e-5, 1e-5));
    }
    worst = std::max(worst, got - ref);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-5 && secs < 10.0;
  o.detail = "1000 instances, max objective excess over grid " + fmt("%.2e", worst) +
             " (tol 1e-5), " + fmt("%.1f", secs) + " s (limit 10 s)";
  return o;
}

// ------------------------------------------------------------------ 2

double matrix_prox_objective(const Matrix& x, const Matrix& w, const DVector& d, double tau,
                             double nu) {
  Eigen::JacobiSVD<Matrix> js(x);
  const Vector s = js.singularValues();
  double pen = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    pen += d[static_cast<std::size_t>(i)] == 2 ? 1.0 : s[i] / nu;
  }
  return tau * pen + 0.5 * (x - w).squaredNorm();
}

Outcome matrix_prox() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240102);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> twos(0, 4);
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_spec = 0.0;
  bool ordered = true;
  for (int inst = 0; inst < 200; ++inst) {
    const Matrix w = oracle::gaussian(5, 4, rng);
    const double nu = 0.1 + u(rng);
    const double tau = (0.01 + 2.0 * u(rng)) * nu;
    std::vector<std::uint8_t> dv(4, 1);
    std::fill(dv.begin(), dv.begin() + twos(rng), 2);
    const DVector d(dv);
    const Matrix x = prox_matrix(w, d, tau, nu);

    const Vector sw = Eigen::JacobiSVD<Matrix>(w).singularValues();
    const Vector sx = Eigen::JacobiSVD<Matrix>(x).singularValues();
    const Vector expect = prox_vector(sw, d, tau, nu);
    for (Eigen::Index i = 0; i < 4; ++i) {
      worst_spec = std::max(worst_spec, std::fabs(sx[i] - expect[i]));
      if (i && expect[i] > expect[i - 1]) ordered = false;
    }

    const double best = matrix_prox_objective(x, w, d, tau, nu);
    for (double radius : {1e-3, 1e-2}) {
      for (int p = 0; p < 10000; ++p) {
        Matrix e = oracle::gaussian(5, 4, rng);
        e *= radius / e.norm();
        worst_excess = std::max(worst_excess, best - matrix_prox_objective(x + e, w, d, tau, nu));
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_excess <= 0.0 && worst_spec <= 1e-9 && ordered && secs < 30.0;
  o.detail = "200 instances x 2 radii x 1e4 perturbations, max f(X^) - f(X^+E) " +
             fmt("%.2e", worst_excess) + " (need <= 0), spectrum error " + fmt("%.2e", worst_spec) +
             " (tol 1e-9), nonincreasing " + (ordered ? "yes" : "no") + ", " + fmt("%.1f", secs) +
             " s (limit 30 s)";
  return o;
}

// ------------------------------------------------------------------ 3

Outcome smoothing_contract() {
  std::mt19937_64 rng(20240103);
  const Matrix full = oracle::gaussian(8, 6, rng, 0.5);
  const IndexSet omega = sample_mask(8, 6, 0.7, 3);
  const std::vector<SmoothedLoss> losses{
      SmoothedLoss::completion(MaskedData::from_matrix(full, omega)), SmoothedLoss::rpca(full)};
  double worst_bound = -1.0;  // max (|f~ - f| - kappa mu)
  double worst_fd = 0.0;
  double worst_lip = 0.0;  // max ratio * mu
  for (const auto& loss : losses) {
    for (double mu : {1.0, 0.1, 0.01}) {
      for (int k = 0; k < 100; ++k) {
        const Matrix x = full + oracle::gaussian(8, 6, rng, 3.0 * mu);
        const double gap = std::fabs(loss.value(x, mu) - loss.exact_value(x));
        worst_bound = std::max(worst_bound, gap - loss.kappa() * mu);
        const Matrix g = loss.gradient(x, mu);
        const Matrix fd =
            oracle::fd_gradient([&](const Matrix& y) { return loss.value(y, mu); }, x, 1e-6);
        worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(g.norm(), 1e-300));

        const Matrix a = full + oracle::gaussian(8, 6, rng, 2.0 * mu);
        const Matrix b = full + oracle::gaussian(8, 6, rng, 2.0 * mu);
        const double ratio =
            (loss.gradient(a, mu) - loss.gradient(b, mu)).norm() / (a - b).norm();
        worst_lip = std::max(worst_lip, ratio * mu);
      }
    }
  }
  Outcome o;
  o.pass = worst_bound <= 0.0 && worst_fd < 1e-5 && worst_lip <= 1.0;
  o.detail = "2 losses x 3 mu x 100 points, max(|f~-f| - kappa mu) " + fmt("%.2e", worst_bound) +
             ", FD relative error " + fmt("%.2e", worst_fd) + " (tol 1e-5), max Lipschitz ratio * mu " +
             fmt("%.4f", worst_lip) + " (<= 1)";
  return o;
}

// ------------------------------------------------------------ 4, 5, 6

struct RunRecord {
  double alpha;
  std::uint64_t seed;
  SolveResult result;
  double max_energy_increase;
  std::size_t bound_checks;
  double worst_bound_excess;
};

constexpr double kLambda40 = 1.2;
constexpr double kNu = 0.1;

SolverConfig acceptance_solver(double lambda) {
  SolverConfig cfg;
  cfg.penalty = {lambda, kNu};
  cfg.mu_stop = 1e-2;
  cfg.step_tol = 1e-4;
  cfg.max_iter = 5000;
  return cfg;
}

std::vector<RunRecord> energy_runs(double& secs) {
  const auto t0 = Clock::now();
  std::vector<RunRecord> runs;
  for (double alpha : {0.8, std::numeric_limits<double>::infinity()}) {
    for (std::uint64_t t = 0; t < 20; ++t) {
      TrialSpec spec;
      spec.m = spec.n = 40;
      spec.r = 3;
      spec.sr = 0.8;
      spec.noise = {1e-4, 0.1, 0.1};
      spec.seed = 4000 + t;
      const TrialData data = make_trial(spec);
      const SmoothedLoss loss = SmoothedLoss::completion(data.observed);
      SolverConfig cfg = acceptance_solver(kLambda40);
      cfg.alpha = alpha;

      RunRecord rec{alpha, spec.seed, {}, -std::numeric_limits<double>::infinity(), 0, -1.0};
      const double slope = cfg.penalty.lambda / cfg.penalty.nu;
      const double root_n = std::sqrt(static_cast<double>(std::min(spec.m, spec.n)));
      double prev = energy(loss, Matrix::Zero(40, 40), cfg.mu0, cfg.penalty);
      rec.result = solve(loss, cfg, [&](const IterationView& v) {
        rec.max_energy_increase = std::max(rec.max_energy_increase, v.record.energy - prev);
        prev = v.record.energy;
        if (v.gradient.norm() <= slope) {
          ++rec.bound_checks;
          const double bound =
              (root_n + 1.0) * slope * v.record.mu_k / v.record.gamma_k + 1e-9;
          rec.worst_bound_excess = std::max(rec.worst_bound_excess, v.record.step_norm - bound);
        }
      });
      runs.push_back(std::move(rec));
    }
  }
  secs = seconds_since(t0);
  return runs;
}

Outcome energy_monotone(const std::vector<RunRecord>& runs, double secs) {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t iters = 0;
  for (const auto& r : runs) {
    worst = std::max(worst, r.max_energy_increase);
    iters += r.result.iterations();
  }
  Outcome o;
  o.pass = worst <= 1e-10 && secs < 60.0;
  o.detail = std::to_string(runs.size()) + " runs (alpha 0.8 and inf), " + std::to_string(iters) +
             " iterations, max energy increase " + fmt("%.2e", worst) + " (slack 1e-10), " +
             fmt("%.1f", secs) + " s (limit 60 s)";
  return o;
}

Outcome lower_bound(const std::vector<RunRecord>& runs) {
  std::size_t converged = 0;
  std::size_t qualifying = 0;
  std::size_t violations = 0;
  double min_residual = std::numeric_limits<double>::infinity();
  // Same two properties over every converged run, reported for information.
  std::size_t gap_free = 0;
  double worst_gap = 0.0;
  for (const auto& r : runs) {
    if (r.result.status != SolveStatus::kConverged) continue;
    ++converged;
    min_residual = std::min(min_residual, r.result.stationarity_residual);
    bool in_gap = false;
    for (Eigen::Index i = 0; i < r.result.sigma_final.size(); ++i) {
      const double s = r.result.sigma_final[i];
      if (s > 0.05 * kNu && s < 0.95 * kNu) in_gap = true;
    }
    if (!in_gap && r.result.objective_gap <= 1e-6) ++gap_free;
    worst_gap = std::max(worst_gap, r.result.objective_gap);
    if (r.result.stationarity_residual < 1e-4) {
      ++qualifying;
      if (in_gap || r.result.objective_gap > 1e-6) ++violations;
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::string(qualifying == 0 ? "vacuous: " : "") + std::to_string(qualifying) +
             " of " + std::to_string(converged) +
             " converged runs have residual < 1e-4 (smallest " + fmt("%.2e", min_residual) +
             "), " + std::to_string(violations) + " violations; all converged runs: " +
             std::to_string(gap_free) + " satisfy both properties, max |F_l0 - F| " +
             fmt("%.2e", worst_gap);
  return o;
}

Outcome step_bound(const std::vector<RunRecord>& runs) {
  std::size_t checks = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    checks += r.bound_checks;
    if (r.bound_checks) worst = std::max(worst, r.worst_bound_excess);
  }
  Outcome o;
  o.pass = worst <= 0.0;
  o.detail = std::to_string(checks) + " iterations with ||grad||_F <= lambda/nu, max step minus bound " +
             (checks ? fmt("%.2e", worst) : std::string("n/a"));
  return o;
}

// ------------------------------------------------------------ 7, 8

constexpr double kLambda60 = 1.5;
constexpr double kSvtTau = 1.0;
// Median SPG RMSE of the reference run of criterion 7 (seeds 7000..7009),
// recorded once; later runs must stay below 1.1 times this.
constexpr double kReferenceMedianRmse = 0.00653;

TrialSpec spec60(std::uint64_t seed) {
  TrialSpec spec;
  spec.m = spec.n = 60;
  spec.r = 5;
  spec.sr = 0.8;
  spec.noise = {1e-4, 0.1, 0.1};
  spec.seed = seed;
  return spec;
}

MonteCarloSummary spg60(double mu0, double alpha) {
  SolverChoice c;
  c.spg = acceptance_solver(kLambda60);
  c.spg.mu0 = mu0;
  c.spg.alpha = alpha;
  return monte_carlo(spec60(7000), c, 10);
}

Outcome recovery_vs_baseline(const MonteCarloSummary& spg, double spg_secs) {
  const auto t0 = Clock::now();
  SolverChoice c;
  c.kind = SolverKind::kSvt;
  c.svt.tau = kSvtTau;
  c.svt.max_iter = 5000;
  c.svt.tol = 1e-6;
  const MonteCarloSummary svt = monte_carlo(spec60(7000), c, 10);
  const double secs = spg_secs + seconds_since(t0);
  int wins = 0;
  for (std::size_t t = 0; t < 10; ++t) {
    if (spg.outcomes[t].ok && svt.outcomes[t].ok && spg.outcomes[t].rmse < svt.outcomes[t].rmse) {
      ++wins;
    }
  }
  const bool have_ref = kReferenceMedianRmse > 0.0;
  const bool under_ref = have_ref && spg.median_rmse < 1.1 * kReferenceMedianRmse;
  Outcome o;
  o.pass = spg.failures == 0 && svt.failures == 0 && wins >= 8 &&
           spg.median_rmse < svt.median_rmse && under_ref && secs < 300.0;
  o.detail = "SPG beats SVT in " + std::to_string(wins) + "/10 paired trials, median RMSE SPG " +
             fmt("%.5f", spg.median_rmse) + " vs SVT " + fmt("%.5f", svt.median_rmse) +
             ", reference " + (have_ref ? fmt("%.5f", kReferenceMedianRmse) : std::string("unset")) +
             " x 1.1, " + fmt("%.1f", secs) + " s (limit 300 s)";
  return o;
}

Outcome mu0_alpha_ablation(const MonteCarloSummary& base) {
  const MonteCarloSummary big = spg60(100.0, 0.8);
  const MonteCarloSummary every = spg60(10.0, std::numeric_limits<double>::infinity());
  const bool rmse_ok = big.mean_rmse <= base.mean_rmse;
  const bool iter_ok = big.mean_iterations >= base.mean_iterations;
  const bool alpha_ok = base.mean_iterations <= every.mean_iterations;
  Outcome o;
  o.pass = rmse_ok && iter_ok && alpha_ok && base.failures + big.failures + every.failures == 0;
  o.detail = std::string("mean RMSE mu0=100 ") + fmt("%.5f", big.mean_rmse) + " vs mu0=10 " +
             fmt("%.5f", base.mean_rmse) + (rmse_ok ? " ok" : " WRONG") + "; mean iterations mu0=100 " +
             fmt("%.1f", big.mean_iterations) + " vs mu0=10 " + fmt("%.1f", base.mean_iterations) +
             (iter_ok ? " ok" : " WRONG") + "; mean iterations alpha=0.8 " +
             fmt("%.1f", base.mean_iterations) + " vs alpha=inf " +
             fmt("%.1f", every.mean_iterations) + (alpha_ok ? " ok" : " WRONG");
  return o;
}

// ------------------------------------------------------------------ 9

Outcome gmm_statistics() {
  const GmmNoiseParams p{1e-4, 0.1, 0.1};
  const GmmDraw d = gmm_noise_labeled(1000000, p, 20240109);
  const double n = static_cast<double>(d.values.size());
  double mean = 0.0;
  for (double v : d.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : d.values) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  const double expected = 0.9 * 1e-4 + 0.1 * 0.1;
  const double frac =
      static_cast<double>(std::count(d.outlier.begin(), d.outlier.end(), true)) / n;
  const double rel = std::fabs(var - expected) / expected;
  Outcome o;
  o.pass = rel <= 0.05 && std::fabs(frac - p.c) <= 0.01;
  o.detail = "sample variance " + fmt("%.6f", var) + " vs " + fmt("%.5f", expected) + " (" +
             fmt("%.2f", 100 * rel) + "% off, tol 5%), outlier fraction " + fmt("%.4f", frac) +
             " (tol 0.01 of 0.1)";
  return o;
}

// ----------------------------------------------------------------- 10

int cli_run(const std::vector<std::string>& args, std::string& err_text) {
  std::vector<const char*> argv{"spgmc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  err_text = err.str();
  return code;
}

Outcome io_round_trips() {
  std::mt19937_64 rng(20240110);
  bool csv_ok = true;
  for (int t = 0; t < 20; ++t) {
    Matrix x = oracle::gaussian(50, 40, rng);
    x(0, 0) = std::nextafter(1.0, 2.0);
    x(1, 0) = 5e-324;
    const Matrix y = matrix_csv_read(matrix_csv_write(x));
    csv_ok = csv_ok && y.rows() == x.rows() && y.cols() == x.cols() &&
             std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  }

  bool mask_ok = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix m = oracle::gaussian(30, 25, rng);
    const MaskedData d = MaskedData::from_matrix(m, sample_mask(30, 25, 0.3, s));
    const MaskedData back = mask_csv_read(mask_csv_write(d), 30, 25);
    std::set<std::tuple<std::size_t, std::size_t, double>> a;
    std::set<std::tuple<std::size_t, std::size_t, double>> b;
    for (const auto& e : d.entries()) a.emplace(e.i, e.j, e.value);
    for (const auto& e : back.entries()) b.emplace(e.i, e.j, e.value);
    mask_ok = mask_ok && a == b;
  }

  double pgm_err = 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Matrix x(37, 23);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = u(rng);
    pgm_err = std::max(pgm_err, (pgm_read(pgm_write(x)) - x).cwiseAbs().maxCoeff());
  }

  const auto dir = std::filesystem::temp_directory_path() / "spgmc_acceptance_io";
  std::filesystem::create_directories(dir);
  const std::string mask = (dir / "mask.csv").string();
  write_file(mask, "i,j,value\n0,0,1\n1,1,2\n");
  const std::pair<std::string, std::string> cases[] = {
      {R"({"nu": -0.5})", "nu"},
      {R"({"lambda": "big"})", "lambda"},
      {R"({"colour": 3})", "colour"},
      {R"({"alpha": "sometimes"})", "alpha"},
      {R"({"m": 5, "n": 5, "r": 9})", "r"},
      {R"({"ablate_mu0": [10, 0]})", "ablate_mu0[1]"},
      {"{\"mu0\": ", "$"},
  };
  int config_ok = 0;
  for (const auto& [json, key] : cases) {
    const std::string cfg = (dir / "c.json").string();
    write_file(cfg, json);
    std::string err;
    const int code = cli_run({"solve", mask, "--config", cfg, "--out-dir", (dir / "o").string()}, err);
    if (code == 1 && err.find(key + ":") != std::string::npos) ++config_ok;
  }
  std::filesystem::remove_all(dir);

  const int ncases = static_cast<int>(std::size(cases));
  Outcome o;
  o.pass = csv_ok && mask_ok && pgm_err <= 1.0 / 510.0 && config_ok == ncases;
  o.detail = std::string("matrix CSV bit-exact ") + (csv_ok ? "yes" : "no") + ", mask CSV set-equal " +
             (mask_ok ? "yes" : "no") + ", PGM max error " + fmt("%.5f", pgm_err) + " (<= " +
             fmt("%.5f", 1.0 / 510.0) + "), config rejections with exit 1 and key path " +
             std::to_string(config_ok) + "/" + std::to_string(ncases);
  return o;
}

}  // namespace

int main() {
  report(1, "prox oracle equivalence", prox_oracle());
  report(2, "matrix prox optimality", matrix_prox());
  report(3, "smoothing contract", smoothing_contract());

  double secs = 0.0;
  const std::vector<RunRecord> runs = energy_runs(secs);
  report(4, "energy monotonicity", energy_monotone(runs, secs));
  report(5, "lower bound and objective equality", lower_bound(runs));
  report(6, "step-norm bound", step_bound(runs));

  const auto t0 = Clock::now();
  const MonteCarloSummary base = spg60(10.0, 0.8);
  report(7, "recovery vs nuclear-norm baseline", recovery_vs_baseline(base, seconds_since(t0)));
  report(8, "mu0 and alpha ablation", mu0_alpha_ablation(base));

  report(9, "GMM noise statistics", gmm_statistics());
  report(10, "I/O round trips", io_round_trips());

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
