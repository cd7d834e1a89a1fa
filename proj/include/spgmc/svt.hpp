#ifndef SPGMC_SVT_HPP
#define SPGMC_SVT_HPP

// Nuclear-norm baseline: proximal gradient on
//   0.5 ||P_Omega(X - M)||_F^2 + tau ||X||_*
// i.e. singular value soft-thresholding after each gradient step.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "spgmc/linalg.hpp"
#include "spgmc/smoothing_loss.hpp"
#include "spgmc/spg_solver.hpp"

namespace spgmc {

struct SvtConfig {
  double tau = 1.0;
  double step = 1.0;
  std::size_t max_iter = 500;
  double tol = 1e-6;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau: must be positive");
    if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError("step: must be positive");
    if (max_iter == 0) throw ValidationError("max_iter: must be positive");
    if (!(tol > 0.0)) throw ValidationError("tol: must be positive");
  }
};

inline Vector soft_threshold_sigma(const Vector& sigma, double tau) {
  if (tau < 0.0) throw ValidationError("tau: must be nonnegative");
  return (sigma.array() - tau).cwiseMax(0.0).matrix();
}

inline double svt_objective(const MaskedData& data, const Matrix& x, double tau,
                            const Vector& sigma) {
  double fit = 0.0;
  for (const auto& e : data.entries()) {
    const double r = x(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) - e.value;
    fit += r * r;
  }
  return 0.5 * fit + tau * sigma.sum();
}

/// Starts from zero; stops when ||X^{k+1} - X^k||_F / max(1, ||X^k||_F) <= tol.
/// Trace rows reuse the SPG schema: mu_k = 0, gamma_k = 1/step and every
/// objective column carries the nuclear-norm objective.
inline SolveResult svt_solve(const MaskedData& data, const SvtConfig& config) {
  config.validate();
  const auto rows = static_cast<Eigen::Index>(data.rows());
  const auto cols = static_cast<Eigen::Index>(data.cols());
  Matrix x = Matrix::Zero(rows, cols);
  Vector sigma = Vector::Zero(std::min(rows, cols));

  SolveResult result;
  for (std::size_t k = 0; k < config.max_iter; ++k) {
    Matrix w = x;
    for (const auto& e : data.entries()) {
      const auto i = static_cast<Eigen::Index>(e.i);
      const auto j = static_cast<Eigen::Index>(e.j);
      w(i, j) -= config.step * (x(i, j) - e.value);
    }
    const SvdFactors f = svd(w);
    Vector shrunk = soft_threshold_sigma(f.sigma, config.step * config.tau);
    Matrix next = f.compose(shrunk);

    IterationRecord rec;
    rec.k = k;
    rec.mu_k = 0.0;
    rec.gamma_k = 1.0 / config.step;
    rec.smoothed_objective = svt_objective(data, next, config.tau, shrunk);
    rec.energy = rec.smoothed_objective;
    rec.exact_objective = rec.smoothed_objective;
    rec.step_norm = (next - x).norm();
    rec.rank_estimate = rank_estimate(shrunk);
    result.trace.push_back(rec);

    const double rel = rec.step_norm / std::max(1.0, x.norm());
    x = std::move(next);
    sigma = std::move(shrunk);
    if (rel <= config.tol) {
      result.status = SolveStatus::kConverged;
      break;
    }
  }
  result.X_final = std::move(x);
  result.sigma_final = std::move(sigma);
  result.stationarity_residual =
      result.trace.empty() ? 0.0 : result.trace.back().step_norm / config.step;
  result.objective_gap = 0.0;
  return result;
}

}  // namespace spgmc

#endif  // SPGMC_SVT_HPP
