#ifndef SPGMC_SPG_SOLVER_HPP
#define SPGMC_SPG_SOLVER_HPP

// Smoothing proximal gradient (SPG) solver for
//
//   min_X  f(X) + lambda * sum_i min{1, sigma_i(X)/nu}
//
// with f a nonsmooth l1 loss replaced by its smoothing f~(., mu). Each
// iteration linearises the penalty through the branch selector d^k of the
// current spectrum, takes a proximal gradient step with a backtracked
// curvature gamma_k, and shrinks mu whenever the energy
// F~(X^{k+1}, mu_k) + kappa * mu_k fails to drop by at least alpha * mu_k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "spgmc/capped_l1.hpp"
#include "spgmc/linalg.hpp"
#include "spgmc/smoothing_loss.hpp"

namespace spgmc {

enum class InitPolicy {
  kZero,      // X^0 = 0; components enter only where the loss gradient beats lambda/nu
  kObserved,  // X^0 = P_Omega(M) for completion, L for RPCA
};

struct SolverConfig {
  double mu0 = 10.0;
  double alpha = 0.8;  // +inf: shrink mu at every iteration
  double rho = 2.0;
  double sigma_exp = 1.5;
  double gamma_lo = 1e-4;
  double gamma_hi = 1e4;
  CappedPenaltyParams penalty{};
  std::size_t max_iter = 500;
  double step_tol = 1e-6;
  double mu_stop = 1e-6;
  std::uint64_t seed = 0;
  InitPolicy init = InitPolicy::kZero;

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0.0) || std::isnan(v)) {
        throw ValidationError(std::string(key) + ": must be positive");
      }
    };
    auto finite_positive = [&](double v, const char* key) {
      positive(v, key);
      if (!std::isfinite(v)) throw ValidationError(std::string(key) + ": must be finite");
    };
    finite_positive(mu0, "mu0");
    positive(alpha, "alpha");
    if (!(rho > 1.0) || !std::isfinite(rho)) throw ValidationError("rho: must exceed 1");
    if (!(sigma_exp > 1.0) || !std::isfinite(sigma_exp)) {
      throw ValidationError("sigma_exp: must exceed 1");
    }
    finite_positive(gamma_lo, "gamma_lo");
    finite_positive(gamma_hi, "gamma_hi");
    if (gamma_lo > gamma_hi) throw ValidationError("gamma_lo: must not exceed gamma_hi");
    penalty.validate();
    if (max_iter == 0) throw ValidationError("max_iter: must be positive");
    finite_positive(step_tol, "step_tol");
    finite_positive(mu_stop, "mu_stop");
  }
};

struct IterationRecord {
  std::size_t k = 0;
  double mu_k = 0.0;
  double gamma_k = 0.0;
  double smoothed_objective = 0.0;  // F~(X^{k+1}, mu_k)
  double energy = 0.0;              // F~(X^{k+1}, mu_k) + kappa * mu_k
  double exact_objective = 0.0;     // F(X^{k+1})
  double step_norm = 0.0;           // ||X^{k+1} - X^k||_F
  std::size_t rank_estimate = 0;
  bool mu_reset = false;            // mu_{k+1} != mu_k
};

enum class SolveStatus { kConverged, kMaxIter };

inline const char* to_string(SolveStatus s) {
  return s == SolveStatus::kConverged ? "converged" : "max_iter";
}

struct SolveResult {
  Matrix X_final;
  SolveStatus status = SolveStatus::kMaxIter;
  std::vector<IterationRecord> trace;
  double stationarity_residual = 0.0;
  double objective_gap = 0.0;  // |F_l0(X) - F(X)|
  Vector sigma_final;

  std::size_t iterations() const { return trace.size(); }
};

/// Everything an observer may want to check about one iteration.
struct IterationView {
  const IterationRecord& record;
  const Matrix& x_current;
  const Matrix& x_next;
  const Matrix& gradient;  // grad f~(X^k, mu_k)
  const DVector& d;
};

using IterationObserver = std::function<void(const IterationView&)>;

/// Q_{d,gamma}(X, Z, mu): linearised smooth part plus proximal term plus
/// lambda * Phi^d(X).
inline double q_model(const Matrix& x, const Matrix& z, double mu, double gamma,
                      const DVector& d, const SmoothedLoss& loss,
                      const CappedPenaltyParams& params) {
  if (!(mu > 0.0)) throw ValidationError("mu: must be positive");
  if (!(gamma > 0.0)) throw ValidationError("gamma: must be positive");
  require_same_shape(x, z, "q_model");
  const Matrix diff = x - z;
  return loss.value(z, mu) + inner_product(diff, loss.gradient(z, mu)) +
         0.5 * gamma / mu * diff.squaredNorm() +
         params.lambda * phi_d(singular_values(x), d, params.nu);
}

struct ProxStep {
  Matrix x;
  Vector sigma;  // spectrum of x, nonincreasing
};

namespace detail {

inline ProxStep prox_step(const Matrix& x_k, const Matrix& grad, double mu, double gamma,
                          const DVector& d, const CappedPenaltyParams& params) {
  const double step = mu / gamma;
  const Matrix w = x_k - step * grad;
  const SvdFactors f = svd(w);
  if (d.size() != static_cast<std::size_t>(f.sigma.size()) || !d.is_nonincreasing()) {
    throw ValidationError("spg_step: d must be nonincreasing with min(rows, cols) entries");
  }
  Vector x = prox_vector(f.sigma, d, params.lambda * step, params.nu);
  return ProxStep{f.compose(x), std::move(x)};
}

}  // namespace detail

/// argmin_X Q_{d,gamma}(X, X_k, mu): the prox of lambda*mu/gamma * Phi^d at
/// W = X_k - (mu/gamma) grad f~(X_k, mu).
inline Matrix spg_step(const Matrix& x_k, double mu, double gamma, const DVector& d,
                       const SmoothedLoss& loss, const CappedPenaltyParams& params) {
  if (!(mu > 0.0)) throw ValidationError("mu: must be positive");
  if (!(gamma > 0.0)) throw ValidationError("gamma: must be positive");
  return detail::prox_step(x_k, loss.gradient(x_k, mu), mu, gamma, d, params).x;
}

struct LineSearchResult {
  double gamma = 0.0;
  Matrix x_next;
  Vector sigma_next;
  std::size_t trials = 0;
};

/// True when f~(X^, mu) <= f~(Z, mu) + <X^ - Z, grad> + gamma/(2 mu) ||X^ - Z||^2,
/// which is F~^d(X^, mu) <= Q_{d,gamma}(X^, Z, mu) with the Phi^d terms cancelled.
inline bool sufficient_decrease(const SmoothedLoss& loss, const Matrix& x_hat,
                                const Matrix& z, double f_z, const Matrix& grad,
                                double mu, double gamma) {
  const Matrix diff = x_hat - z;
  const double model = f_z + diff.cwiseProduct(grad).sum() + 0.5 * gamma / mu * diff.squaredNorm();
  return loss.value(x_hat, mu) <= model;
}

namespace detail {

inline LineSearchResult line_search(const Matrix& x_k, const Matrix& grad, double f_k,
                                    double mu, double gamma_init, const DVector& d,
                                    const SmoothedLoss& loss,
                                    const CappedPenaltyParams& params, double rho) {
  // Accepted once gamma >= L = 1, so a few dozen trials always suffice.
  constexpr std::size_t kMaxTrials = 200;
  double gamma = gamma_init;
  for (std::size_t trial = 1; trial <= kMaxTrials; ++trial) {
    ProxStep step = prox_step(x_k, grad, mu, gamma, d, params);
    if (sufficient_decrease(loss, step.x, x_k, f_k, grad, mu, gamma)) {
      return LineSearchResult{gamma, std::move(step.x), std::move(step.sigma), trial};
    }
    gamma *= rho;
  }
  throw std::runtime_error("line_search: no acceptable gamma after " +
                           std::to_string(kMaxTrials) + " trials");
}

}  // namespace detail

/// Backtracking on gamma: gamma_init, rho*gamma_init, ... until the
/// sufficient-decrease test holds.
inline LineSearchResult line_search(const Matrix& x_k, double mu, double gamma_init,
                                    const DVector& d, const SmoothedLoss& loss,
                                    const CappedPenaltyParams& params, double rho) {
  if (!(mu > 0.0)) throw ValidationError("mu: must be positive");
  if (!(gamma_init > 0.0)) throw ValidationError("gamma: must be positive");
  if (!(rho > 1.0)) throw ValidationError("rho: must exceed 1");
  return detail::line_search(x_k, loss.gradient(x_k, mu), loss.value(x_k, mu), mu,
                             gamma_init, d, loss, params, rho);
}

/// Keeps mu_k when the energy dropped by at least alpha * mu_k, otherwise
/// resets to mu0 / (k+1)^sigma_exp. alpha = +inf always resets.
inline double update_mu(std::size_t k, double mu_k, double energy_new, double energy_old,
                        double alpha, double mu0, double sigma_exp) {
  if (!std::isinf(alpha) && energy_new - energy_old <= -alpha * mu_k) {
    return mu_k;
  }
  return mu0 / std::pow(static_cast<double>(k + 1), sigma_exp);
}

/// f~(X, mu) + lambda * Phi(X) + kappa * mu. With mu = 0 this is F(X).
inline double energy(const SmoothedLoss& loss, const Matrix& x, double mu,
                     const CappedPenaltyParams& params) {
  if (mu < 0.0) throw ValidationError("mu: must be nonnegative");
  return loss.value(x, mu) + params.lambda * capped_surrogate(singular_values(x), params.nu) +
         loss.kappa() * mu;
}

/// Finite check of lifted stationarity at X using grad f~(X, mu_probe)
/// as the subgradient proxy.
///
/// With G = U^T grad V in the SVD basis of X and d = d^X, each diagonal
/// entry must satisfy G_ii + (lambda/nu) s_i - lambda theta'_{d_i} = 0 for
/// some s_i in the subdifferential of |.| at sigma_i; off-diagonal entries of
/// G inside the support block must vanish. Returns the largest diagonal
/// violation plus the largest off-diagonal magnitude.
inline double stationarity_residual(const Matrix& x, double mu_probe, const SmoothedLoss& loss,
                                    const CappedPenaltyParams& params) {
  if (!(mu_probe > 0.0)) throw ValidationError("mu_probe: must be positive");
  const SvdFactors f = svd(x);
  const DVector d = d_vector(f.sigma, params.nu);
  const Matrix g = f.U.transpose() * loss.gradient(x, mu_probe) * f.V;
  const double slope = params.lambda / params.nu;
  const auto support = static_cast<Eigen::Index>(rank_estimate(f.sigma));

  double diag = 0.0;
  for (Eigen::Index i = 0; i < f.sigma.size(); ++i) {
    const double theta_slope = d[static_cast<std::size_t>(i)] == 2 ? slope : 0.0;
    double r;
    if (i < support) {
      r = std::abs(g(i, i) + slope - theta_slope);
    } else {
      // s_i in [-1, 1] absorbs up to lambda/nu of G_ii.
      r = std::max(0.0, std::abs(g(i, i) - theta_slope) - slope);
    }
    diag = std::max(diag, r);
  }
  double off = 0.0;
  for (Eigen::Index i = 0; i < support; ++i) {
    for (Eigen::Index j = 0; j < support; ++j) {
      if (i != j) off = std::max(off, std::abs(g(i, j)));
    }
  }
  return diag + off;
}

/// Runs SPG from the configured starting point until the stopping rule
/// (mu_k <= mu_stop and relative step <= step_tol on three consecutive
/// iterations) or max_iter. The reported stationarity residual is probed at
/// the last mu_k used.
inline SolveResult solve(const SmoothedLoss& loss, const SolverConfig& config,
                         const IterationObserver& observer = {}) {
  config.validate();
  const CappedPenaltyParams& pen = config.penalty;
  const double kappa = loss.kappa();

  Matrix x = config.init == InitPolicy::kZero ? Matrix::Zero(loss.rows(), loss.cols())
                                              : loss.initial_point();
  Vector sigma = singular_values(x);
  double mu = config.mu0;
  // mu_{-1} = mu_0.
  double energy_old =
      loss.value(x, mu) + pen.lambda * capped_surrogate(sigma, pen.nu) + kappa * mu;
  double gamma = std::clamp(loss.grad_lipschitz(), config.gamma_lo, config.gamma_hi);

  SolveResult result;
  result.trace.reserve(std::min<std::size_t>(config.max_iter, 4096));
  std::size_t quiet_steps = 0;
  double mu_last = mu;

  for (std::size_t k = 0; k < config.max_iter; ++k) {
    const DVector d = d_vector(sigma, pen.nu);
    const Matrix grad = loss.gradient(x, mu);
    const double f_k = loss.value(x, mu);
    LineSearchResult ls =
        detail::line_search(x, grad, f_k, mu, gamma, d, loss, pen, config.rho);

    IterationRecord rec;
    rec.k = k;
    rec.mu_k = mu;
    rec.gamma_k = ls.gamma;
    const double penalty = pen.lambda * capped_surrogate(ls.sigma_next, pen.nu);
    rec.smoothed_objective = loss.value(ls.x_next, mu) + penalty;
    rec.energy = rec.smoothed_objective + kappa * mu;
    rec.exact_objective = loss.exact_value(ls.x_next) + penalty;
    rec.step_norm = (ls.x_next - x).norm();
    rec.rank_estimate = rank_estimate(ls.sigma_next);

    const double mu_next = update_mu(k, mu, rec.energy, energy_old, config.alpha,
                                     config.mu0, config.sigma_exp);
    rec.mu_reset = mu_next != mu;
    mu_last = mu;
    result.trace.push_back(rec);
    if (observer) observer(IterationView{result.trace.back(), x, ls.x_next, grad, d});

    const double rel_step = rec.step_norm / std::max(1.0, x.norm());
    quiet_steps = (mu <= config.mu_stop && rel_step <= config.step_tol) ? quiet_steps + 1 : 0;

    x = std::move(ls.x_next);
    sigma = std::move(ls.sigma_next);
    energy_old = rec.energy;
    mu = mu_next;
    gamma = std::clamp(ls.gamma / config.rho, config.gamma_lo, config.gamma_hi);

    if (quiet_steps >= 3) {
      result.status = SolveStatus::kConverged;
      break;
    }
  }

  result.X_final = std::move(x);
  result.sigma_final = singular_values(result.X_final);
  result.stationarity_residual =
      stationarity_residual(result.X_final, mu_last, loss, pen);
  const double rank = static_cast<double>(rank_estimate(result.sigma_final));
  result.objective_gap =
      pen.lambda * std::abs(rank - capped_surrogate(result.sigma_final, pen.nu));
  return result;
}

}  // namespace spgmc

#endif  // SPGMC_SPG_SOLVER_HPP
