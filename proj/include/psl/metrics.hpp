#pragma once

// Open-set and closed-set evaluation. OoD is the positive class: a higher
// uncertainty means "more likely OoD". All curve metrics sweep every
// distinct score as a threshold (a sample is flagged when score >= t).

#include "psl/common.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psl {

struct ScoreRecord {
  std::int64_t sample_id = 0;
  double uncertainty = 0.0;
  bool is_ood = false;
  std::optional<int> true_label;
  std::optional<int> predicted_label;
};

using ScoreSet = std::vector<ScoreRecord>;

enum class Protocol { AllThresholds, OneThreshold };

inline std::string_view to_string(Protocol p) {
  return p == Protocol::AllThresholds ? "all_thresholds" : "one_threshold";
}

inline Protocol parse_protocol(std::string_view text) {
  if (text == "all_thresholds") return Protocol::AllThresholds;
  if (text == "one_threshold") return Protocol::OneThreshold;
  throw ValidationError("protocol must be all_thresholds or one_threshold (got '" + std::string(text) + "')");
}

struct SplitMetrics {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  std::size_t num_ood = 0;

  bool operator==(const SplitMetrics&) const = default;
};

struct MetricsReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double closed_set_acc = 0.0;
  Protocol protocol = Protocol::AllThresholds;
  int splits = 1;
  std::optional<double> threshold;  // one-threshold protocol only
  std::vector<SplitMetrics> per_split;

  bool operator==(const MetricsReport&) const = default;
};

// One ROC/PR operating point.
struct OperatingPoint {
  double threshold = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

namespace detail {

inline void count_populations(std::span<const ScoreRecord> scores, std::size_t& n_ood, std::size_t& n_ind) {
  n_ood = 0;
  n_ind = 0;
  for (const auto& r : scores) (r.is_ood ? n_ood : n_ind)++;
  require(n_ood > 0 && n_ind > 0, "open-set metrics need at least one InD and one OoD record");
}

}  // namespace detail

/// Operating points from the strictest threshold (highest score) to the
/// loosest; the last point flags every sample.
inline std::vector<OperatingPoint> operating_points(std::span<const ScoreRecord> scores) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(scores.size());
  for (const auto& r : scores) sorted.emplace_back(r.uncertainty, r.is_ood);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<OperatingPoint> points;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == t; ++i) (sorted[i].second ? tp : fp)++;
    points.push_back({t, tp, fp});
  }
  return points;
}

/// Mann-Whitney statistic P(u_ood > u_ind) + P(tie)/2.
inline double auroc(std::span<const ScoreRecord> scores) {
  std::size_t n_ood, n_ind;
  detail::count_populations(scores, n_ood, n_ind);
  // Accumulate 2 * (wins + ties / 2) in integers so the result is exact.
  std::uint64_t twice_wins = 0;
  std::size_t ind_seen = 0;
  const auto points = operating_points(scores);
  std::size_t prev_tp = 0, prev_fp = 0;
  for (const auto& p : points) {
    const std::size_t ood_here = p.true_positives - prev_tp;
    const std::size_t ind_here = p.false_positives - prev_fp;
    // OoD in this group beat every InD strictly below it.
    const std::size_t ind_below = n_ind - ind_seen - ind_here;
    twice_wins += static_cast<std::uint64_t>(ood_here) * (2 * ind_below + ind_here);
    ind_seen += ind_here;
    prev_tp = p.true_positives;
    prev_fp = p.false_positives;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_ood) * static_cast<double>(n_ind));
}

/// Step-wise area under the precision-recall curve (precision averaged
/// over recall increments), OoD positive.
inline double aupr(std::span<const ScoreRecord> scores) {
  std::size_t n_ood, n_ind;
  detail::count_populations(scores, n_ood, n_ind);
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : operating_points(scores)) {
    const double recall = static_cast<double>(p.true_positives) / static_cast<double>(n_ood);
    const double precision =
        static_cast<double>(p.true_positives) / static_cast<double>(p.true_positives + p.false_positives);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

/// False-positive rate at the strictest operating point whose TPR reaches
/// the target. No interpolation between points.
inline double fpr_at_tpr(std::span<const ScoreRecord> scores, double tpr_target = 0.95) {
  require(tpr_target > 0.0 && tpr_target <= 1.0, "tpr_target must lie in (0, 1]");
  std::size_t n_ood, n_ind;
  detail::count_populations(scores, n_ood, n_ind);
  for (const auto& p : operating_points(scores)) {
    const double tpr = static_cast<double>(p.true_positives) / static_cast<double>(n_ood);
    if (tpr >= tpr_target) return static_cast<double>(p.false_positives) / static_cast<double>(n_ind);
  }
  return 1.0;
}

inline double closed_set_accuracy(std::span<const ScoreRecord> scores) {
  std::size_t total = 0, correct = 0;
  for (const auto& r : scores) {
    if (r.is_ood) continue;
    require(r.true_label.has_value() && r.predicted_label.has_value(),
            "InD record " + std::to_string(r.sample_id) + " is missing a true or predicted label");
    ++total;
    correct += (*r.true_label == *r.predicted_label);
  }
  require(total > 0, "closed-set accuracy needs at least one InD record");
  return static_cast<double>(correct) / static_cast<double>(total);
}

inline SplitMetrics open_set_metrics(std::span<const ScoreRecord> scores) {
  std::size_t n_ood, n_ind;
  detail::count_populations(scores, n_ood, n_ind);
  return {auroc(scores), aupr(scores), fpr_at_tpr(scores, 0.95), n_ood};
}

/// Partitions the OoD records into k near-equal random splits, evaluates
/// each split against the full InD set and reports the per-metric mean.
inline MetricsReport split_evaluate(std::span<const ScoreRecord> scores, int k, std::uint64_t seed) {
  std::vector<std::size_t> ind_idx, ood_idx;
  for (std::size_t i = 0; i < scores.size(); ++i) (scores[i].is_ood ? ood_idx : ind_idx).push_back(i);
  require(k >= 1, "number of splits must be at least 1");
  require(static_cast<std::size_t>(k) <= ood_idx.size(),
          "number of splits (" + std::to_string(k) + ") exceeds the OoD count (" + std::to_string(ood_idx.size()) + ")");
  require(!ind_idx.empty(), "open-set metrics need at least one InD record");

  if (k > 1) {
    std::mt19937_64 rng(seed);
    std::shuffle(ood_idx.begin(), ood_idx.end(), rng);
  }

  MetricsReport report;
  report.splits = k;
  report.closed_set_acc = closed_set_accuracy(scores);

  ScoreSet subset;
  const std::size_t n = ood_idx.size();
  for (int s = 0; s < k; ++s) {
    const std::size_t begin = n * s / k;
    const std::size_t end = n * (s + 1) / k;
    subset.clear();
    for (std::size_t i : ind_idx) subset.push_back(scores[i]);
    for (std::size_t j = begin; j < end; ++j) subset.push_back(scores[ood_idx[j]]);
    report.per_split.push_back(open_set_metrics(subset));
  }
  for (const auto& m : report.per_split) {
    report.auroc += m.auroc;
    report.aupr += m.aupr;
    report.fpr95 += m.fpr95;
  }
  report.auroc /= k;
  report.aupr /= k;
  report.fpr95 /= k;
  return report;
}

inline MetricsReport evaluate(std::span<const ScoreRecord> scores) { return split_evaluate(scores, 1, 0); }

}  // namespace psl
