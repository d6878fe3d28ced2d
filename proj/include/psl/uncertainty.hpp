#pragma once

// Uncertainty scores over embeddings: the Mahalanobis distance to a single
// Gaussian fitted on all training features, and a softmax-confidence
// comparator over the prototype bank.

#include "psl/common.hpp"
#include "psl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace psl {

struct GaussianHead {
  Vector mean;
  Matrix covariance;  // includes ridge * I
  Matrix precision;
  Matrix cholesky;    // lower factor of covariance
  double ridge = 0.0;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Lower Cholesky factor of a symmetric matrix. Fails when any pivot is not
/// clearly positive relative to the largest diagonal entry.
inline Matrix cholesky_lower(const Matrix& a) {
  const Eigen::Index n = a.rows();
  require(a.cols() == n, "cholesky needs a square matrix");
  const double scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > tol)) {
      throw NotPositiveDefiniteError("covariance is not positive-definite (pivot " + std::to_string(j) + " = " +
                                     std::to_string(pivot) + "); increase the ridge");
    }
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

inline Matrix feature_covariance(const FeatureMatrix& features, const Vector& mean) {
  const Matrix centered = features.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(features.rows());
}

/// 1e-6 * trace(Sigma) / d. Unit-norm features span at most d-1
/// directions, so the raw covariance is singular.
inline double default_ridge(const FeatureMatrix& features) {
  require(features.rows() >= 1, "cannot compute a ridge from an empty feature set");
  const Vector mean = features.colwise().mean().transpose();
  const Matrix cov = feature_covariance(features, mean);
  return 1e-6 * cov.trace() / static_cast<double>(cov.rows());
}

inline GaussianHead fit_gaussian(const FeatureMatrix& features, double ridge) {
  require(features.rows() >= 1 && features.cols() >= 1, "fit_gaussian needs a nonempty feature matrix");
  require(ridge >= 0.0 && std::isfinite(ridge), "ridge must be nonnegative");
  require(features.allFinite(), "features must be finite");
  GaussianHead head;
  head.ridge = ridge;
  head.mean = features.colwise().mean().transpose();
  head.covariance = feature_covariance(features, head.mean);
  head.covariance.diagonal().array() += ridge;
  head.covariance = 0.5 * (head.covariance + head.covariance.transpose());
  head.cholesky = cholesky_lower(head.covariance);

  const Eigen::Index d = head.covariance.rows();
  const auto lower = head.cholesky.triangularView<Eigen::Lower>();
  const Matrix linv = lower.solve(Matrix::Identity(d, d));
  head.precision = linv.transpose() * linv;
  head.precision = 0.5 * (head.precision + head.precision.transpose());
  return head;
}

inline GaussianHead fit_gaussian(const FeatureMatrix& features) {
  return fit_gaussian(features, default_ridge(features));
}

/// (z - mu)^T Sigma^-1 (z - mu), evaluated as ||L^-1 (z - mu)||^2 so the
/// result is never negative.
inline double mahalanobis_score(const GaussianHead& head, const Vector& z) {
  require(z.size() == head.mean.size(), "feature dimension does not match the Gaussian head");
  const Vector diff = z - head.mean;
  const Vector w = head.cholesky.triangularView<Eigen::Lower>().solve(diff);
  return w.squaredNorm();
}

/// 1 - max_j softmax(K z / tau)_j.
inline double softmax_uncertainty(const Vector& z, const PrototypeBank& bank, double tau) {
  require(tau > 0.0, "tau must be positive");
  require(z.size() == bank.dim(), "feature dimension does not match the prototype bank");
  const Vector logits = bank.matrix() * z / tau;
  Eigen::Index best = 0;
  const double top = logits.maxCoeff(&best);
  double rest = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (j != best) rest += std::exp(logits(j) - top);
  }
  return rest / (1.0 + rest);
}

/// Nearest-rank percentile: the ceil(q * n)-th smallest value.
inline double percentile_threshold(std::span<const double> train_scores, double quantile = 0.95) {
  require(!train_scores.empty(), "threshold needs at least one training score");
  require(quantile > 0.0 && quantile <= 1.0, "quantile must lie in (0, 1]");
  std::vector<double> sorted(train_scores.begin(), train_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(quantile * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline std::vector<int> one_threshold_binarize(std::span<const double> scores, double threshold) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s > threshold ? 1 : 0);
  return out;
}

}  // namespace psl
