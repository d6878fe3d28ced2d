#pragma once

// Glue between training and evaluation: encode, score, and run the metric
// protocol on a trained model.

#include "psl/metrics.hpp"
#include "psl/synthgen.hpp"
#include "psl/trainer.hpp"
#include "psl/uncertainty.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psl {

enum class UncertaintyMethod { Mahalanobis, Softmax };

inline std::string_view to_string(UncertaintyMethod m) {
  return m == UncertaintyMethod::Mahalanobis ? "mahalanobis" : "softmax";
}

inline UncertaintyMethod parse_method(std::string_view text) {
  if (text == "mahalanobis") return UncertaintyMethod::Mahalanobis;
  if (text == "softmax") return UncertaintyMethod::Softmax;
  throw ValidationError("method must be mahalanobis or softmax (got '" + std::string(text) + "')");
}

struct EvalConfig {
  UncertaintyMethod method = UncertaintyMethod::Mahalanobis;
  Protocol protocol = Protocol::AllThresholds;
  int splits = 1;
  std::uint64_t split_seed = 0;
  std::optional<double> ridge;  // default_ridge() when absent

  void validate() const { require(splits >= 1, "splits must be at least 1"); }
};

struct ScoredModel {
  ScoreSet test;                    // InD test records followed by OoD records
  std::vector<double> train_scores;
  FeatureMatrix test_features;      // rows aligned with `test`
  FeatureMatrix train_features;
};

class Scorer {
 public:
  Scorer(const EncoderParams& params, const PrototypeBank& bank, double tau, UncertaintyMethod method,
         const FeatureMatrix& train_features, std::optional<double> ridge)
      : bank_(bank), tau_(tau), method_(method) {
    require(params.embed_dim() == bank.dim(), "encoder and prototype bank dimensions differ");
    if (method_ == UncertaintyMethod::Mahalanobis) {
      head_ = ridge ? fit_gaussian(train_features, *ridge) : fit_gaussian(train_features);
    }
  }

  double operator()(const Vector& z) const {
    return method_ == UncertaintyMethod::Mahalanobis ? mahalanobis_score(*head_, z)
                                                     : softmax_uncertainty(z, bank_, tau_);
  }

  const std::optional<GaussianHead>& head() const { return head_; }

 private:
  PrototypeBank bank_;
  double tau_;
  UncertaintyMethod method_;
  std::optional<GaussianHead> head_;
};

inline ScoredModel score_model(const EncoderParams& params, const PrototypeBank& bank, double tau,
                               std::span<const SequenceSample> train, std::span<const SequenceSample> test_ind,
                               std::span<const SequenceSample> test_ood, const EvalConfig& eval) {
  eval.validate();
  params.validate();
  ScoredModel out;
  out.train_features = encode_all(params, train);
  const Scorer scorer(params, bank, tau, eval.method, out.train_features, eval.ridge);
  for (Eigen::Index i = 0; i < out.train_features.rows(); ++i)
    out.train_scores.push_back(scorer(out.train_features.row(i).transpose()));

  out.test_features = FeatureMatrix(static_cast<Eigen::Index>(test_ind.size() + test_ood.size()), params.embed_dim());
  Eigen::Index row = 0;
  for (auto group : {test_ind, test_ood}) {
    if (group.empty()) continue;
    const FeatureMatrix z = encode_all(params, group);
    for (std::size_t i = 0; i < group.size(); ++i, ++row) {
      const Vector zi = z.row(static_cast<Eigen::Index>(i)).transpose();
      out.test_features.row(row) = zi.transpose();
      ScoreRecord r;
      r.sample_id = group[i].id;
      r.uncertainty = scorer(zi);
      r.is_ood = group[i].is_ood;
      r.true_label = group[i].label;
      r.predicted_label = predict_class(zi, bank);
      out.test.push_back(r);
    }
  }
  return out;
}

/// Runs the chosen metric protocol. Under one_threshold, uncertainties are
/// binarized at the 95th percentile of the training scores first.
inline MetricsReport evaluate_scores(const ScoreSet& test, std::span<const double> train_scores,
                                     const EvalConfig& eval) {
  eval.validate();
  if (eval.protocol == Protocol::AllThresholds) {
    MetricsReport r = split_evaluate(test, eval.splits, eval.split_seed);
    r.protocol = Protocol::AllThresholds;
    return r;
  }
  const double threshold = percentile_threshold(train_scores, 0.95);
  ScoreSet binarized = test;
  for (auto& r : binarized) r.uncertainty = r.uncertainty > threshold ? 1.0 : 0.0;
  MetricsReport r = split_evaluate(binarized, eval.splits, eval.split_seed);
  r.protocol = Protocol::OneThreshold;
  r.threshold = threshold;
  return r;
}

struct ExperimentResult {
  TrainResult model;
  ScoredModel scored;
  MetricsReport report;
};

inline ExperimentResult run_experiment(const DatasetSplits& data, int num_ind_classes, const TrainConfig& train_cfg,
                                       const EvalConfig& eval) {
  ExperimentResult out;
  out.model = train(data.train, train_cfg, num_ind_classes);
  out.scored = score_model(out.model.params, out.model.bank, train_cfg.loss.tau, data.train, data.test_ind,
                           data.test_ood, eval);
  out.report = evaluate_scores(out.scored.test, out.scored.train_scores, eval);
  return out;
}

}  // namespace psl
