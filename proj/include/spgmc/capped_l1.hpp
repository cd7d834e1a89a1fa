#ifndef SPGMC_CAPPED_L1_HPP
#define SPGMC_CAPPED_L1_HPP

// Capped-l1 singular value penalty phi(t) = min{1, t/nu}, its DC pieces and
// the closed-form proximal maps of the linearised penalty Phi^d.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "spgmc/linalg.hpp"

namespace spgmc {

struct CappedPenaltyParams {
  double lambda = 0.1;
  double nu = 0.05;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw ValidationError("lambda: must be a finite positive number");
    }
    if (!(nu > 0.0) || !std::isfinite(nu)) {
      throw ValidationError("nu: must be a finite positive number");
    }
  }

  /// True when nu >= lambda / L_f, i.e. the threshold is too large for zero
  /// to be the only lifted stationary point below nu. Advisory only.
  bool exceeds_threshold_bound(double loss_lipschitz) const {
    return nu >= lambda / loss_lipschitz;
  }
};

/// Per-singular-value branch selector in {1, 2}.
///
/// Branch 1 is the linear piece (theta_1 = 0, sigma < nu); branch 2 is the
/// capped piece (theta_2(t) = t/nu - 1, sigma >= nu).
class DVector {
 public:
  DVector() = default;
  explicit DVector(std::vector<std::uint8_t> entries) : entries_(std::move(entries)) {
    for (auto e : entries_) {
      if (e != 1 && e != 2) {
        throw ValidationError("d-vector entries must be 1 or 2");
      }
    }
  }
  DVector(std::initializer_list<int> entries)
      : DVector(std::vector<std::uint8_t>(entries.begin(), entries.end())) {}

  static DVector filled(std::size_t n, std::uint8_t value) {
    return DVector(std::vector<std::uint8_t>(n, value));
  }

  std::size_t size() const { return entries_.size(); }
  std::uint8_t operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<std::uint8_t>& entries() const { return entries_; }

  /// All 2s precede all 1s.
  bool is_nonincreasing() const {
    return std::is_sorted(entries_.rbegin(), entries_.rend());
  }

  std::size_t count_capped() const {
    return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), 2));
  }

  friend bool operator==(const DVector&, const DVector&) = default;

 private:
  std::vector<std::uint8_t> entries_;
};

inline double phi(double t, double nu) {
  if (t < 0.0) throw ValidationError("phi: argument must be nonnegative");
  if (!(nu > 0.0)) throw ValidationError("nu: must be positive");
  return std::min(1.0, t / nu);
}

/// Phi(X) = sum_i phi(sigma_i).
inline double capped_surrogate(const Vector& sigma, double nu) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) total += phi(sigma[i], nu);
  return total;
}

/// d^X: 2 where sigma_i >= nu, 1 otherwise. The boundary sigma_i == nu is 2.
inline DVector d_vector(const Vector& sigma, double nu) {
  if (!(nu > 0.0)) throw ValidationError("nu: must be positive");
  std::vector<std::uint8_t> d(static_cast<std::size_t>(sigma.size()));
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] < 0.0) throw ValidationError("d_vector: negative singular value");
    d[static_cast<std::size_t>(i)] = sigma[i] >= nu ? 2 : 1;
  }
  return DVector(std::move(d));
}

inline double theta(std::uint8_t branch, double t, double nu) {
  return branch == 2 ? t / nu - 1.0 : 0.0;
}

/// Phi^d(X) = sum sigma_i/nu - sum theta_{d_i}(sigma_i). Majorises Phi for
/// every d and coincides with it at d = d_vector(sigma, nu).
inline double phi_d(const Vector& sigma, const DVector& d, double nu) {
  if (static_cast<std::size_t>(sigma.size()) != d.size()) {
    throw ValidationError("phi_d: length mismatch between sigma and d");
  }
  if (!(nu > 0.0)) throw ValidationError("nu: must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    total += sigma[i] / nu - theta(d[static_cast<std::size_t>(i)], sigma[i], nu);
  }
  return total;
}

/// argmin_{x >= 0} tau * Phi^d(diag(x)) + 0.5 ||x - w||^2, coordinate-wise:
/// x_i = max{w_i - tau/nu, 0} on branch 1 and x_i = w_i on branch 2.
inline Vector prox_vector(const Vector& w, const DVector& d, double tau, double nu) {
  if (!(tau > 0.0)) throw ValidationError("tau: must be positive");
  if (!(nu > 0.0)) throw ValidationError("nu: must be positive");
  if (static_cast<std::size_t>(w.size()) != d.size()) {
    throw ValidationError("prox_vector: length mismatch between w and d");
  }
  const double shift = tau / nu;
  Vector x(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0) throw ValidationError("prox_vector: w must be nonnegative");
    // On branch 2, wbar = w + shift cancels the shift exactly.
    x[i] = d[static_cast<std::size_t>(i)] == 2 ? w[i] : std::max(w[i] - shift, 0.0);
  }
  return x;
}

/// Global minimiser of tau * Phi^d(X) + 0.5 ||X - W||_F^2 through the SVD
/// of W. `d` must be nonincreasing (as produced by d_vector on a sorted
/// spectrum); the ordering of the output spectrum relies on it.
inline Matrix prox_matrix(const Matrix& w, const DVector& d, double tau, double nu) {
  const auto k = static_cast<std::size_t>(std::min(w.rows(), w.cols()));
  if (d.size() != k) {
    throw ValidationError("prox_matrix: d must have min(rows, cols) = " +
                          std::to_string(k) + " entries");
  }
  if (!d.is_nonincreasing()) {
    throw ValidationError("prox_matrix: d must be nonincreasing");
  }
  const SvdFactors f = svd(w);
  return f.compose(prox_vector(f.sigma, d, tau, nu));
}

/// tau * Phi^d(X) + 0.5 ||X - W||_F^2, evaluated from scratch.
inline double prox_objective(const Matrix& x, const Matrix& w, const DVector& d,
                             double tau, double nu) {
  return tau * phi_d(singular_values(x), d, nu) + 0.5 * (x - w).squaredNorm();
}

}  // namespace spgmc

#endif  // SPGMC_CAPPED_L1_HPP
