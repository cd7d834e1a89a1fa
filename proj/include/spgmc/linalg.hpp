#ifndef SPGMC_LINALG_HPP
#define SPGMC_LINALG_HPP

// Dense matrix type, thin SVD and the Frobenius geometry used everywhere else.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace spgmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the SVD backend does not converge.
class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& x) { return x.allFinite(); }

/// Throws unless `x` is non-empty and every entry is finite.
inline void require_dense(const Matrix& x, const char* what = "matrix") {
  if (x.rows() < 1 || x.cols() < 1) {
    throw ValidationError(std::string(what) + ": empty matrix");
  }
  if (!x.allFinite()) {
    throw ValidationError(std::string(what) + ": non-finite entry");
  }
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* what = "shape mismatch") {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

/// Thin SVD W = U diag(sigma) V^T with sigma sorted descending.
///
/// U is rows x k, V is cols x k, k = min(rows, cols). Signs of singular
/// vectors are whatever the backend produces; callers only consume sigma or
/// the product U diag(.) V^T.
struct SvdFactors {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }

  /// U diag(x) V^T for a replacement spectrum `x` of the same length.
  Matrix compose(const Vector& x) const {
    return U * x.asDiagonal() * V.transpose();
  }
};

namespace detail {

inline SvdFactors tall_svd(const Matrix& w) {
  // rows >= cols here.
  Eigen::BDCSVD<Matrix> solver(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw DecompositionError("svd: backend failed to converge");
  }
  SvdFactors out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  if (!out.sigma.allFinite()) {
    throw DecompositionError("svd: non-finite singular values");
  }
  return out;
}

}  // namespace detail

/// Thin SVD. Wide inputs are decomposed through their transpose so the
/// backend always sees rows >= cols; the factors are swapped back.
inline SvdFactors svd(const Matrix& w) {
  require_dense(w, "svd");
  if (w.rows() >= w.cols()) {
    return detail::tall_svd(w);
  }
  SvdFactors t = detail::tall_svd(w.transpose());
  return SvdFactors{std::move(t.V), std::move(t.sigma), std::move(t.U)};
}

inline Vector singular_values(const Matrix& w) {
  require_dense(w, "singular_values");
  Eigen::BDCSVD<Matrix> solver(w.rows() >= w.cols() ? w : Matrix(w.transpose()));
  if (solver.info() != Eigen::Success) {
    throw DecompositionError("singular_values: backend failed to converge");
  }
  return solver.singularValues();
}

/// Numerical rank: count of sigma_i > max(1e-8, 1e-8 * sigma_1).
inline std::size_t rank_estimate(const Vector& sigma) {
  if (sigma.size() == 0) return 0;
  const double cut = std::max(1e-8, 1e-8 * sigma[0]);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > cut) ++r;
  }
  return r;
}

inline double frobenius_norm(const Matrix& x) { return x.norm(); }

/// <X, Y> = tr(X Y^T).
inline double inner_product(const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "inner_product");
  return x.cwiseProduct(y).sum();
}

}  // namespace spgmc

#endif  // SPGMC_LINALG_HPP
