#ifndef SPGMC_SMOOTHING_LOSS_HPP
#define SPGMC_SMOOTHING_LOSS_HPP

// l1 data-fit losses and their Huber smoothings.
//
//   completion:  f(X) = sum_{(i,j) in Omega} |X_ij - M_ij|
//   rpca:        f(X) = ||L - X||_1
//
// Each residual term is smoothed by
//   h(s, mu) = |s|                  if |s| > mu
//            = s^2 / (2 mu) + mu/2  otherwise,
// so |h(s, mu) - |s|| <= mu/2, h is convex, and dh/ds is (1/mu)-Lipschitz.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spgmc/linalg.hpp"

namespace spgmc {

inline double huber(double s, double mu) {
  const double a = std::abs(s);
  return a > mu ? a : s * s / (2.0 * mu) + 0.5 * mu;
}

inline double huber_grad(double s, double mu) {
  if (s > mu) return 1.0;
  if (s < -mu) return -1.0;
  return s / mu;
}

struct Observation {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

/// Observed entries M_ij for (i, j) in Omega of a rows x cols matrix.
class MaskedData {
 public:
  MaskedData(std::size_t rows, std::size_t cols, std::vector<Observation> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows_ == 0 || cols_ == 0) {
      throw ValidationError("mask: rows and cols must be positive");
    }
    if (entries_.empty()) {
      throw ValidationError("mask: at least one observed entry is required");
    }
    std::vector<std::size_t> linear;
    linear.reserve(entries_.size());
    for (const auto& e : entries_) {
      if (e.i >= rows_ || e.j >= cols_) {
        throw ValidationError("mask: index (" + std::to_string(e.i) + "," +
                              std::to_string(e.j) + ") out of range");
      }
      if (!std::isfinite(e.value)) {
        throw ValidationError("mask: non-finite observed value");
      }
      linear.push_back(e.i * cols_ + e.j);
    }
    std::sort(linear.begin(), linear.end());
    if (std::adjacent_find(linear.begin(), linear.end()) != linear.end()) {
      throw ValidationError("mask: duplicate index");
    }
  }

  /// Observes `full` at the given positions.
  static MaskedData from_matrix(const Matrix& full,
                                const std::vector<std::pair<std::size_t, std::size_t>>& omega) {
    std::vector<Observation> obs;
    obs.reserve(omega.size());
    for (auto [i, j] : omega) {
      if (i >= static_cast<std::size_t>(full.rows()) ||
          j >= static_cast<std::size_t>(full.cols())) {
        throw ValidationError("mask: index out of range");
      }
      obs.push_back({i, j, full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
    return MaskedData(static_cast<std::size_t>(full.rows()),
                      static_cast<std::size_t>(full.cols()), std::move(obs));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Observation>& entries() const { return entries_; }

  /// P_Omega(M): observed values in place, zeros elsewhere.
  Matrix observed_matrix() const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (const auto& e : entries_) {
      out(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.value;
    }
    return out;
  }

  /// Same positions, values replaced through `fn(obs) -> double`.
  template <typename Fn>
  MaskedData with_values(Fn&& fn) const {
    std::vector<Observation> out = entries_;
    for (auto& e : out) e.value = fn(e);
    return MaskedData(rows_, cols_, std::move(out));
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Observation> entries_;
};

enum class LossKind { kCompletionL1, kRpcaL1 };

/// A smoothed l1 loss bound to its data.
///
/// kappa = (#terms)/2 is the uniform smoothing error, L = 1 the gradient
/// Lipschitz factor (grad is L/mu-Lipschitz) and L_f = sqrt(#terms) the
/// Lipschitz constant of the unsmoothed loss.
class SmoothedLoss {
 public:
  static SmoothedLoss completion(MaskedData data) { return SmoothedLoss(std::move(data)); }
  static SmoothedLoss rpca(Matrix observed) { return SmoothedLoss(std::move(observed)); }

  LossKind kind() const {
    return std::holds_alternative<MaskedData>(data_) ? LossKind::kCompletionL1
                                                     : LossKind::kRpcaL1;
  }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t term_count() const { return terms_; }

  double kappa() const { return 0.5 * static_cast<double>(terms_); }
  double grad_lipschitz() const { return 1.0; }
  double loss_lipschitz() const { return std::sqrt(static_cast<double>(terms_)); }

  const MaskedData* masked() const { return std::get_if<MaskedData>(&data_); }
  const Matrix* full() const { return std::get_if<Matrix>(&data_); }

  /// Smoothed value for mu > 0; the exact l1 loss for mu == 0.
  double value(const Matrix& x, double mu) const {
    check_shape(x);
    if (mu < 0.0) throw ValidationError("mu: must be nonnegative");
    auto term = [mu](double s) { return mu > 0.0 ? huber(s, mu) : std::abs(s); };
    double total = 0.0;
    if (const auto* m = masked()) {
      for (const auto& e : m->entries()) {
        total += term(x(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) - e.value);
      }
    } else {
      const Matrix& l = *full();
      for (Eigen::Index k = 0; k < x.size(); ++k) total += term(x.data()[k] - l.data()[k]);
    }
    return total;
  }

  double exact_value(const Matrix& x) const { return value(x, 0.0); }

  Matrix gradient(const Matrix& x, double mu) const {
    check_shape(x);
    if (!(mu > 0.0)) throw ValidationError("mu: gradient requires mu > 0");
    if (const auto* m = masked()) {
      Matrix g = Matrix::Zero(rows_, cols_);
      for (const auto& e : m->entries()) {
        const auto i = static_cast<Eigen::Index>(e.i);
        const auto j = static_cast<Eigen::Index>(e.j);
        g(i, j) = huber_grad(x(i, j) - e.value, mu);
      }
      return g;
    }
    const Matrix& l = *full();
    Matrix g(rows_, cols_);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      g.data()[k] = huber_grad(x.data()[k] - l.data()[k], mu);
    }
    return g;
  }

  /// Starting iterate: P_Omega(M) for completion, L for RPCA.
  Matrix initial_point() const {
    if (const auto* m = masked()) return m->observed_matrix();
    return *full();
  }

 private:
  explicit SmoothedLoss(MaskedData data)
      : rows_(static_cast<Eigen::Index>(data.rows())),
        cols_(static_cast<Eigen::Index>(data.cols())),
        terms_(data.size()),
        data_(std::move(data)) {}

  explicit SmoothedLoss(Matrix observed)
      : rows_(checked(observed).rows()),
        cols_(observed.cols()),
        terms_(static_cast<std::size_t>(observed.size())),
        data_(std::move(observed)) {}

  static const Matrix& checked(const Matrix& m) {
    require_dense(m, "rpca data");
    return m;
  }

  void check_shape(const Matrix& x) const {
    if (x.rows() != rows_ || x.cols() != cols_) {
      throw ValidationError("loss: iterate shape " + std::to_string(x.rows()) + "x" +
                            std::to_string(x.cols()) + " does not match data " +
                            std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  Eigen::Index rows_;
  Eigen::Index cols_;
  std::size_t terms_;
  std::variant<MaskedData, Matrix> data_;
};

}  // namespace spgmc

#endif  // SPGMC_SMOOTHING_LOSS_HPP
