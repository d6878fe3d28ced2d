#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace psl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Rows are samples, columns are embedding coordinates.
using FeatureMatrix = Eigen::MatrixXd;

inline constexpr double kUnitNormTolerance = 1e-6;

// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a file cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a covariance fails its Cholesky factorization.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

template <typename Derived>
bool is_unit_norm(const Eigen::MatrixBase<Derived>& v, double tol = kUnitNormTolerance) {
  return std::abs(v.norm() - 1.0) <= tol;
}

template <typename Derived>
void require_unit_norm(const Eigen::MatrixBase<Derived>& v, const std::string& what) {
  if (!v.allFinite() || !is_unit_norm(v)) {
    throw ValidationError(what + " must be unit-norm (norm = " + std::to_string(v.norm()) + ")");
  }
}

inline Vector l2_normalize(const Vector& v) {
  const double n = v.norm();
  require(n > 0.0 && std::isfinite(n), "cannot normalize a zero or non-finite vector");
  return v / n;
}

inline void normalize_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    require(n > 0.0 && std::isfinite(n), "cannot normalize a zero or non-finite row");
    m.row(r) /= n;
  }
}

// Numerically stable log(sum(exp(x))).
inline double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

// Subgradient of |x| with sign(0) = 0.
inline double sign0(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace psl
