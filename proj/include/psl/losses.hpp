#pragma once

// Prototype-based losses (PL, PSL and PSL with contrastive terms) with
// analytic gradients for the anchor, every prototype and every contrast
// feature. All three share one softmax-over-logits core: the loss is
//
//   -log( exp(a) / (exp(a) + sum_j exp(b_j)) )
//
// where `a` is the positive logit and the b_j are negative-prototype,
// negative-sample and soft-positive logits.

#include "psl/common.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psl {

enum class LossMode { PL, PSL, PSL_CT };

inline std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::PL: return "PL";
    case LossMode::PSL: return "PSL";
    case LossMode::PSL_CT: return "PSL_CT";
  }
  return "?";
}

inline LossMode parse_loss_mode(std::string_view text) {
  if (text == "PL") return LossMode::PL;
  if (text == "PSL") return LossMode::PSL;
  if (text == "PSL_CT") return LossMode::PSL_CT;
  throw ValidationError("mode must be one of PL, PSL, PSL_CT (got '" + std::string(text) + "')");
}

struct LossConfig {
  double tau = 0.1;
  double s = 0.8;
  double s_shuf = 0.8;

  void validate() const {
    require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    require(s > 0.0 && s <= 1.0, "s must lie in (0, 1]");
    require(s_shuf > 0.0 && s_shuf <= 1.0, "s_shuf must lie in (0, 1]");
  }
};

// Unit-norm class prototypes, one per row.
class PrototypeBank {
 public:
  PrototypeBank() = default;

  explicit PrototypeBank(Matrix prototypes) : prototypes_(std::move(prototypes)) {
    require(prototypes_.rows() >= 2, "a prototype bank needs at least 2 classes");
    require(prototypes_.cols() >= 2, "prototype dimension must be at least 2");
    for (Eigen::Index j = 0; j < prototypes_.rows(); ++j) {
      require_unit_norm(prototypes_.row(j).transpose(), "prototype " + std::to_string(j));
    }
  }

  static PrototypeBank random(int num_classes, int dim, std::mt19937_64& rng) {
    require(num_classes >= 2 && dim >= 2, "prototype bank needs N >= 2 and d >= 2");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(num_classes, dim);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
    normalize_rows(m);
    return PrototypeBank(std::move(m));
  }

  int num_classes() const { return static_cast<int>(prototypes_.rows()); }
  int dim() const { return static_cast<int>(prototypes_.cols()); }
  const Matrix& matrix() const { return prototypes_; }
  Vector prototype(int j) const { return prototypes_.row(j).transpose(); }

  // Gradient step followed by projection back onto the unit sphere.
  void apply_update(const Matrix& delta) {
    prototypes_ += delta;
    normalize_rows(prototypes_);
  }

 private:
  Matrix prototypes_;
};

struct ContrastSets {
  std::vector<Vector> negatives;
  std::vector<Vector> same_class;
  std::optional<Vector> shuffled;
};

struct LossOutput {
  double value = 0.0;
  Vector grad_anchor;
  Matrix grad_prototypes;
  std::vector<Vector> grad_negatives;
  std::vector<Vector> grad_same_class;
  std::optional<Vector> grad_shuffled;
};

namespace detail {

struct SoftPositive {
  const Vector* feature;
  double target;
};

// Computes -log(softmax(logits)[0]) and the softmax weights, keeping the
// result strictly positive even when the positive logit dominates.
inline double neg_log_first(const Vector& logits, Vector& weights) {
  const double m = logits.maxCoeff();
  weights = (logits.array() - m).exp();
  const double total = weights.sum();
  double value;
  if (logits(0) >= m) {
    // exp(a - m) == 1, so log(total) == log1p(sum of the rest).
    value = std::log1p(weights.tail(weights.size() - 1).sum());
  } else {
    value = (m - logits(0)) + std::log(total);
  }
  weights /= total;
  return value;
}

inline LossOutput prototype_loss(const Vector& z, int label, const PrototypeBank& bank,
                                 const LossConfig& cfg, bool similarity_target,
                                 std::span<const Vector> negatives,
                                 std::span<const SoftPositive> soft_positives) {
  const int n_classes = bank.num_classes();
  const Eigen::Index d = bank.dim();
  const double inv_tau = 1.0 / cfg.tau;
  const Matrix& K = bank.matrix();

  const Vector proto_sims = K * z;
  const double pos_residual = proto_sims(label) - cfg.s;

  const Eigen::Index n_logits = n_classes + static_cast<Eigen::Index>(negatives.size()) +
                                static_cast<Eigen::Index>(soft_positives.size());
  Vector logits(n_logits);
  logits(0) = similarity_target ? (1.0 - std::abs(pos_residual)) * inv_tau : proto_sims(label) * inv_tau;
  Eigen::Index at = 1;
  for (int j = 0; j < n_classes; ++j) {
    if (j != label) logits(at++) = proto_sims(j) * inv_tau;
  }
  std::vector<double> sp_residual(soft_positives.size());
  for (const Vector& n : negatives) logits(at++) = z.dot(n) * inv_tau;
  for (std::size_t q = 0; q < soft_positives.size(); ++q) {
    sp_residual[q] = z.dot(*soft_positives[q].feature) - soft_positives[q].target;
    logits(at++) = std::abs(sp_residual[q]) * inv_tau;
  }

  LossOutput out;
  Vector w;
  out.value = neg_log_first(logits, w);
  out.grad_anchor = Vector::Zero(d);
  out.grad_prototypes = Matrix::Zero(n_classes, d);

  // dL/da = w0 - 1, dL/db_j = w_j.
  const double g_pos = w(0) - 1.0;
  const double da_dsim = similarity_target ? -sign0(pos_residual) : 1.0;
  out.grad_anchor += (g_pos * da_dsim * inv_tau) * K.row(label).transpose();
  out.grad_prototypes.row(label) += (g_pos * da_dsim * inv_tau) * z.transpose();

  at = 1;
  for (int j = 0; j < n_classes; ++j) {
    if (j == label) continue;
    const double g = w(at++) * inv_tau;
    out.grad_anchor += g * K.row(j).transpose();
    out.grad_prototypes.row(j) += g * z.transpose();
  }
  out.grad_negatives.reserve(negatives.size());
  for (const Vector& n : negatives) {
    const double g = w(at++) * inv_tau;
    out.grad_anchor += g * n;
    out.grad_negatives.push_back(g * z);
  }
  std::vector<Vector> sp_grads;
  sp_grads.reserve(soft_positives.size());
  for (std::size_t q = 0; q < soft_positives.size(); ++q) {
    const double g = w(at++) * sign0(sp_residual[q]) * inv_tau;
    out.grad_anchor += g * *soft_positives[q].feature;
    sp_grads.push_back(g * z);
  }
  // Soft positives are laid out as same_class followed by the optional shuffled copy.
  out.grad_same_class = std::move(sp_grads);
  return out;
}

inline void validate_anchor(const Vector& z, int label, const PrototypeBank& bank, const LossConfig& cfg) {
  cfg.validate();
  require(z.size() == bank.dim(), "feature dimension does not match the prototype bank");
  require_unit_norm(z, "feature");
  require(label >= 0 && label < bank.num_classes(),
          "label " + std::to_string(label) + " out of range [0, " + std::to_string(bank.num_classes()) + ")");
}

}  // namespace detail

/// Prototypical learning loss: a cosine-similarity cross-entropy over the
/// prototype bank with temperature `cfg.tau`.
inline LossOutput pl_loss(const Vector& z, int label, const PrototypeBank& bank, const LossConfig& cfg) {
  detail::validate_anchor(z, label, bank, cfg);
  return detail::prototype_loss(z, label, bank, cfg, false, {}, {});
}

/// Prototypical similarity learning: the positive logit rewards a similarity
/// of exactly `cfg.s` to the class prototype instead of the maximum.
inline LossOutput psl_loss(const Vector& z, int label, const PrototypeBank& bank, const LossConfig& cfg) {
  detail::validate_anchor(z, label, bank, cfg);
  return detail::prototype_loss(z, label, bank, cfg, true, {}, {});
}

/// PSL with contrastive terms. In-batch negatives join the negative
/// prototypes; same-class samples (target `cfg.s`) and the shuffled copy
/// (target `cfg.s_shuf`) enter the denominator as soft positives.
inline LossOutput psl_ct_loss(const Vector& z, int label, const PrototypeBank& bank,
                              const ContrastSets& contrasts, const LossConfig& cfg) {
  detail::validate_anchor(z, label, bank, cfg);
  const auto check = [&](const Vector& v, const char* what) {
    require(v.size() == bank.dim(), std::string(what) + " dimension does not match the prototype bank");
    require_unit_norm(v, what);
  };
  for (const Vector& v : contrasts.negatives) check(v, "negative contrast");
  for (const Vector& v : contrasts.same_class) check(v, "same-class contrast");
  if (contrasts.shuffled) check(*contrasts.shuffled, "shuffled contrast");

  std::vector<detail::SoftPositive> soft;
  soft.reserve(contrasts.same_class.size() + 1);
  for (const Vector& v : contrasts.same_class) soft.push_back({&v, cfg.s});
  if (contrasts.shuffled) soft.push_back({&*contrasts.shuffled, cfg.s_shuf});

  LossOutput out = detail::prototype_loss(z, label, bank, cfg, true, contrasts.negatives, soft);
  if (contrasts.shuffled) {
    out.grad_shuffled = std::move(out.grad_same_class.back());
    out.grad_same_class.pop_back();
  }
  return out;
}

struct BatchLossOutput {
  double value = 0.0;
  Matrix grad_features;
  Matrix grad_shuffled;  // empty unless shuffled features were supplied
  Matrix grad_prototypes;
};

namespace detail {

// batch_loss without the unit-norm checks, so callers may evaluate it at
// arbitrary (e.g. perturbed) features.
inline BatchLossOutput batch_loss_unchecked(const FeatureMatrix& features, std::span<const int> labels,
                                            const FeatureMatrix* shuffled, const PrototypeBank& bank,
                                            const LossConfig& cfg, LossMode mode) {
  const Eigen::Index B = features.rows();
  const Eigen::Index d = bank.dim();
  require(B >= 1, "batch must contain at least one sample");
  require(static_cast<Eigen::Index>(labels.size()) == B, "features row count must equal labels length");
  require(features.cols() == d, "feature dimension does not match the prototype bank");
  const bool use_shuffled = shuffled != nullptr && shuffled->size() > 0;
  if (use_shuffled) {
    require(shuffled->rows() == B && shuffled->cols() == d, "shuffled features must be row-aligned with features");
  }

  std::vector<Vector> rows(B);
  for (Eigen::Index i = 0; i < B; ++i) rows[i] = features.row(i).transpose();
  std::vector<Vector> shuf_rows;
  if (use_shuffled && mode == LossMode::PSL_CT) {
    shuf_rows.resize(B);
    for (Eigen::Index i = 0; i < B; ++i) shuf_rows[i] = shuffled->row(i).transpose();
  }

  BatchLossOutput out;
  out.grad_features = Matrix::Zero(B, d);
  out.grad_prototypes = Matrix::Zero(bank.num_classes(), d);
  if (use_shuffled) out.grad_shuffled = Matrix::Zero(B, d);

  std::vector<Vector> negatives;
  std::vector<Eigen::Index> neg_index, sc_index;
  std::vector<detail::SoftPositive> soft;
  for (Eigen::Index i = 0; i < B; ++i) {
    LossOutput one;
    if (mode == LossMode::PSL_CT) {
      negatives.clear();
      neg_index.clear();
      sc_index.clear();
      soft.clear();
      for (Eigen::Index j = 0; j < B; ++j) {
        if (j == i) continue;
        if (labels[j] != labels[i]) {
          negatives.push_back(rows[j]);
          neg_index.push_back(j);
        } else {
          sc_index.push_back(j);
          soft.push_back({&rows[j], cfg.s});
        }
      }
      if (!shuf_rows.empty()) soft.push_back({&shuf_rows[i], cfg.s_shuf});
      one = prototype_loss(rows[i], labels[i], bank, cfg, true, negatives, soft);
      for (std::size_t q = 0; q < neg_index.size(); ++q)
        out.grad_features.row(neg_index[q]) += one.grad_negatives[q].transpose();
      for (std::size_t q = 0; q < sc_index.size(); ++q)
        out.grad_features.row(sc_index[q]) += one.grad_same_class[q].transpose();
      if (!shuf_rows.empty()) out.grad_shuffled.row(i) += one.grad_same_class.back().transpose();
    } else {
      one = prototype_loss(rows[i], labels[i], bank, cfg, mode == LossMode::PSL, {}, {});
    }
    out.value += one.value;
    out.grad_features.row(i) += one.grad_anchor.transpose();
    out.grad_prototypes += one.grad_prototypes;
  }

  const double inv_b = 1.0 / static_cast<double>(B);
  out.value *= inv_b;
  out.grad_features *= inv_b;
  out.grad_prototypes *= inv_b;
  if (use_shuffled) out.grad_shuffled *= inv_b;
  return out;
}

}  // namespace detail

/// Mean loss over a mini-batch. Under PSL_CT each anchor contrasts against
/// the other batch members (different label: negatives, same label: soft
/// positives) and against its own shuffled copy. Shuffled rows are never
/// anchors and never contrast against other anchors.
inline BatchLossOutput batch_loss(const FeatureMatrix& features, std::span<const int> labels,
                                  const FeatureMatrix* shuffled, const PrototypeBank& bank,
                                  const LossConfig& cfg, LossMode mode) {
  cfg.validate();
  require(static_cast<Eigen::Index>(labels.size()) == features.rows(), "features row count must equal labels length");
  require(features.cols() == bank.dim(), "feature dimension does not match the prototype bank");
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    detail::validate_anchor(features.row(i).transpose(), labels[i], bank, cfg);
  }
  if (shuffled != nullptr && shuffled->size() > 0) {
    require(shuffled->rows() == features.rows() && shuffled->cols() == bank.dim(),
            "shuffled features must be row-aligned with features");
    for (Eigen::Index i = 0; i < shuffled->rows(); ++i) require_unit_norm(shuffled->row(i).transpose(), "shuffled feature");
  }
  return detail::batch_loss_unchecked(features, labels, shuffled, bank, cfg, mode);
}

}  // namespace psl
