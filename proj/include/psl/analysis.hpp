#pragma once

// Representation analytics: covariance spectrum, intra-class similarity
// and variance statistics, per-class uncertainty and histograms.

#include "psl/common.hpp"
#include "psl/losses.hpp"
#include "psl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace psl {

inline constexpr double kLogFloor = 1e-300;

/// C = (1/M) sum_i (z_i - zbar)(z_i - zbar)^T.
inline Matrix covariance_matrix(const FeatureMatrix& features) {
  require(features.rows() >= 2, "covariance needs at least 2 samples");
  const Vector mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - mean.transpose();
  Matrix c = (centered.transpose() * centered) / static_cast<double>(features.rows());
  return 0.5 * (c + c.transpose());
}

struct SpectrumReport {
  std::vector<double> singular_values;  // descending
  std::vector<double> log_values;       // ln(sigma), floored at kLogFloor
  int dim = 0;
  int sample_count = 0;
  Matrix u;
  Matrix v;
};

inline SpectrumReport singular_spectrum(const Matrix& c, int sample_count = 0, double symmetry_tol = 1e-9) {
  require(c.rows() == c.cols() && c.rows() >= 1, "spectrum needs a nonempty square matrix");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  require((c - c.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol * scale, "spectrum input must be symmetric");

  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SpectrumReport out;
  out.dim = static_cast<int>(c.rows());
  out.sample_count = sample_count;
  out.u = svd.matrixU();
  out.v = svd.matrixV();
  const Vector& sv = svd.singularValues();  // already sorted descending
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    out.singular_values.push_back(sv(k));
    out.log_values.push_back(std::log(std::max(sv(k), kLogFloor)));
  }
  return out;
}

struct GroupStats {
  int label = 0;
  int count = 0;
  double mean_sim_center = 0.0;     // sim(z, zbar_i)
  double mean_sim_prototype = 0.0;  // sim(z, k_i)
  std::optional<double> variance;   // absent for groups with < 2 members
};

struct PopulationStats {
  std::vector<GroupStats> groups;
  double mean_sim_center = 0.0;
  double mean_sim_prototype = 0.0;
  double variance = 0.0;
  int count = 0;
  int groups_without_variance = 0;
};

struct ClassStats {
  PopulationStats ind;
  PopulationStats ood;
};

namespace detail {

inline double mean_dimension_variance(const FeatureMatrix& group) {
  const Vector mean = group.colwise().mean().transpose();
  const Matrix centered = group.rowwise() - mean.transpose();
  return centered.array().square().colwise().mean().mean();
}

inline FeatureMatrix gather_rows(const FeatureMatrix& features, const std::vector<Eigen::Index>& idx) {
  FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = features.row(idx[r]);
  return out;
}

inline void finish_population(PopulationStats& pop) {
  double sim_c = 0.0, sim_k = 0.0, var = 0.0;
  int var_groups = 0;
  for (const auto& g : pop.groups) {
    sim_c += g.mean_sim_center * g.count;
    sim_k += g.mean_sim_prototype * g.count;
    pop.count += g.count;
    if (g.variance) {
      var += *g.variance;
      ++var_groups;
    } else {
      ++pop.groups_without_variance;
    }
  }
  if (pop.count > 0) {
    pop.mean_sim_center = sim_c / pop.count;
    pop.mean_sim_prototype = sim_k / pop.count;
  }
  if (var_groups > 0) pop.variance = var / var_groups;
}

}  // namespace detail

/// InD rows are grouped by true label and compared with their class mean
/// and prototype. OoD rows are grouped by predicted label and compared with
/// the InD mean and prototype of that predicted class. Variance is the
/// per-dimension variance averaged over dimensions, then over groups.
inline ClassStats class_similarity_stats(const FeatureMatrix& features, std::span<const int> labels,
                                         std::span<const int> predicted, const PrototypeBank& bank,
                                         const std::vector<bool>& is_ood) {
  const auto n = static_cast<std::size_t>(features.rows());
  require(labels.size() == n && predicted.size() == n && is_ood.size() == n,
          "features, labels, predictions and OoD flags must have equal length");
  require(features.cols() == bank.dim(), "feature dimension does not match the prototype bank");

  std::map<int, std::vector<Eigen::Index>> ind_groups, ood_groups;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (is_ood[i]) {
      ood_groups[predicted[i]].push_back(r);
    } else {
      require(labels[i] >= 0 && labels[i] < bank.num_classes(), "InD label out of range");
      ind_groups[labels[i]].push_back(r);
    }
  }

  std::map<int, Vector> centers;
  for (const auto& [label, idx] : ind_groups) {
    const FeatureMatrix g = detail::gather_rows(features, idx);
    const Vector m = g.colwise().mean().transpose();
    centers[label] = m.norm() > 0.0 ? Vector(m.normalized()) : m;
  }

  const auto summarize = [&](int label, const std::vector<Eigen::Index>& idx) {
    GroupStats gs;
    gs.label = label;
    const Vector& center = centers.at(label);
    const Vector proto = bank.prototype(label);
    for (Eigen::Index r : idx) {
      const Vector z = features.row(r).transpose();
      const double zn = z.norm();
      gs.mean_sim_center += zn > 0.0 ? z.dot(center) / zn : 0.0;
      gs.mean_sim_prototype += zn > 0.0 ? z.dot(proto) / zn : 0.0;
    }
    gs.count = static_cast<int>(idx.size());
    gs.mean_sim_center /= gs.count;
    gs.mean_sim_prototype /= gs.count;
    if (idx.size() >= 2) gs.variance = detail::mean_dimension_variance(detail::gather_rows(features, idx));
    return gs;
  };

  ClassStats out;
  for (const auto& [label, idx] : ind_groups) out.ind.groups.push_back(summarize(label, idx));
  for (const auto& [label, idx] : ood_groups) {
    // OoD rows predicted into a class with no InD members have no center.
    if (!centers.contains(label)) continue;
    out.ood.groups.push_back(summarize(label, idx));
  }
  detail::finish_population(out.ind);
  detail::finish_population(out.ood);
  return out;
}

struct ClassUncertainty {
  int label = 0;
  bool is_ood = false;
  int count = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

namespace detail {

// Linear interpolation between closest ranks.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Per-class summary keyed by the record's true (or generator) label.
inline std::vector<ClassUncertainty> per_class_uncertainty(std::span<const ScoreRecord> scores) {
  std::map<int, std::vector<double>> by_class;
  std::map<int, bool> ood_flag;
  for (const auto& r : scores) {
    require(r.true_label.has_value(), "per-class uncertainty needs a class on every record");
    by_class[*r.true_label].push_back(r.uncertainty);
    ood_flag[*r.true_label] = r.is_ood;
  }
  std::vector<ClassUncertainty> out;
  for (auto& [label, v] : by_class) {
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    ClassUncertainty c;
    c.label = label;
    c.is_ood = ood_flag[label];
    c.count = static_cast<int>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    c.mean = sum / c.count;
    c.min = v.front();
    c.q1 = detail::quantile_sorted(v, 0.25);
    c.median = detail::quantile_sorted(v, 0.5);
    c.q3 = detail::quantile_sorted(v, 0.75);
    c.max = v.back();
    out.push_back(c);
  }
  return out;
}

struct HistogramBin {
  double low = 0.0;  // normalized units
  double high = 0.0;
  int ind_count = 0;
  int ood_count = 0;
};

struct Histogram {
  std::vector<HistogramBin> bins;
  double score_min = 0.0;
  double score_max = 0.0;
  bool degenerate = false;  // every score equal: one bin holds everything
};

/// Scores are min-max normalized jointly, then counted into equal-width
/// bins separately for InD and OoD.
inline Histogram uncertainty_histogram(std::span<const ScoreRecord> scores, int bins) {
  require(bins >= 2, "histogram needs at least 2 bins");
  require(!scores.empty(), "histogram needs at least one score");
  Histogram h;
  h.score_min = h.score_max = scores.front().uncertainty;
  for (const auto& r : scores) {
    h.score_min = std::min(h.score_min, r.uncertainty);
    h.score_max = std::max(h.score_max, r.uncertainty);
  }
  const double range = h.score_max - h.score_min;
  if (!(range > 0.0)) {
    h.degenerate = true;
    HistogramBin only{0.0, 1.0, 0, 0};
    for (const auto& r : scores) (r.is_ood ? only.ood_count : only.ind_count)++;
    h.bins.push_back(only);
    return h;
  }
  for (int b = 0; b < bins; ++b) {
    h.bins.push_back({static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins, 0, 0});
  }
  for (const auto& r : scores) {
    const double x = (r.uncertainty - h.score_min) / range;
    const int b = std::clamp(static_cast<int>(x * bins), 0, bins - 1);
    (r.is_ood ? h.bins[b].ood_count : h.bins[b].ind_count)++;
  }
  return h;
}

}  // namespace psl
