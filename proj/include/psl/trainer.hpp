#pragma once

// Two-layer perceptron encoder over the flattened (order-preserving)
// sequence, trained with momentum SGD and manual backpropagation.

#include "psl/analysis.hpp"
#include "psl/common.hpp"
#include "psl/losses.hpp"
#include "psl/synthgen.hpp"

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace psl {

struct EncoderParams {
  Matrix w1;  // h x (T * d_f)
  Vector b1;
  Matrix w2;  // d x h
  Vector b2;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int embed_dim() const { return static_cast<int>(w2.rows()); }

  void validate() const {
    require(w1.rows() == b1.size() && w2.cols() == w1.rows() && w2.rows() == b2.size(),
            "encoder parameter shapes are inconsistent");
    require(w2.rows() >= 2, "embedding dimension must be at least 2");
    require(w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(), "encoder parameters must be finite");
  }

  /// He-normal weights, zero biases.
  static EncoderParams init(int input_dim, int hidden_dim, int embed_dim, std::mt19937_64& rng) {
    require(input_dim >= 1, "input dimension must be positive");
    require(embed_dim >= 2 && hidden_dim >= embed_dim, "need hidden_dim >= embed_dim >= 2");
    std::normal_distribution<double> normal(0.0, 1.0);
    EncoderParams p;
    p.w1.resize(hidden_dim, input_dim);
    p.w2.resize(embed_dim, hidden_dim);
    const double s1 = std::sqrt(2.0 / input_dim);
    const double s2 = std::sqrt(2.0 / hidden_dim);
    for (auto& x : p.w1.reshaped()) x = s1 * normal(rng);
    for (auto& x : p.w2.reshaped()) x = s2 * normal(rng);
    p.b1 = Vector::Zero(hidden_dim);
    p.b2 = Vector::Zero(embed_dim);
    return p;
  }

  /// Frame-tied initialization: one He-normal block of width frame_dim is
  /// repeated for every frame and scaled by 1/T, so the initial encoder
  /// sees only the frame average and is invariant to frame order.
  static EncoderParams init_inflated(int num_frames, int frame_dim, int hidden_dim, int embed_dim,
                                     std::mt19937_64& rng) {
    require(num_frames >= 1 && frame_dim >= 1, "frame shape must be positive");
    EncoderParams p = init(frame_dim, hidden_dim, embed_dim, rng);
    const Matrix block = p.w1 / static_cast<double>(num_frames);
    p.w1.resize(hidden_dim, static_cast<Eigen::Index>(num_frames) * frame_dim);
    for (int t = 0; t < num_frames; ++t) p.w1.middleCols(static_cast<Eigen::Index>(t) * frame_dim, frame_dim) = block;
    return p;
  }

  bool operator==(const EncoderParams& o) const {
    return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

// Intermediate activations of a batched forward pass; rows are samples.
struct EncoderCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix output;  // before normalization
  Vector output_norm;
  FeatureMatrix embedding;
};

inline EncoderCache encoder_forward(const EncoderParams& p, const Matrix& input) {
  require(input.cols() == p.input_dim(), "input dimension does not match the encoder");
  EncoderCache c;
  c.input = input;
  c.hidden_pre = (input * p.w1.transpose()).rowwise() + p.b1.transpose();
  c.hidden = c.hidden_pre.cwiseMax(0.0);
  c.output = (c.hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
  c.output_norm = c.output.rowwise().norm();
  require((c.output_norm.array() > 0.0).all() && c.output.allFinite(), "encoder produced a zero or non-finite output");
  c.embedding = c.output.array().colwise() / c.output_norm.array();
  return c;
}

struct EncoderGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

/// Backpropagates dL/dz through normalization, the output layer, ReLU and
/// the input layer, adding into `grads`. The normalization Jacobian is
/// (I - z z^T) / ||y||.
inline void encoder_backward(const EncoderParams& p, const EncoderCache& c, const Matrix& grad_embedding,
                             EncoderGrads& grads) {
  const Vector radial = (grad_embedding.cwiseProduct(c.embedding)).rowwise().sum();
  Matrix grad_out = grad_embedding - c.embedding.cwiseProduct(radial.replicate(1, c.embedding.cols()));
  grad_out.array().colwise() /= c.output_norm.array();

  grads.w2 += grad_out.transpose() * c.hidden;
  grads.b2 += grad_out.colwise().sum().transpose();
  Matrix grad_hidden = grad_out * p.w2;
  grad_hidden = grad_hidden.cwiseProduct((c.hidden_pre.array() > 0.0).cast<double>().matrix());
  grads.w1 += grad_hidden.transpose() * c.input;
  grads.b1 += grad_hidden.colwise().sum().transpose();
}

inline Matrix stack_inputs(std::span<const SequenceSample> samples) {
  require(!samples.empty(), "no samples to stack");
  const Eigen::Index in = samples.front().frames.size();
  Matrix x(static_cast<Eigen::Index>(samples.size()), in);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(samples[i].frames.size() == in, "samples have inconsistent shapes");
    x.row(static_cast<Eigen::Index>(i)) = samples[i].flatten().transpose();
  }
  return x;
}

/// z = normalize(W2 relu(W1 x + b1) + b2).
inline Vector encode(const EncoderParams& p, const SequenceSample& sample) {
  require(sample.frames.size() == p.input_dim(), "sample dimensions do not match the encoder");
  Matrix x = sample.flatten().transpose();
  return encoder_forward(p, x).embedding.row(0).transpose();
}

inline FeatureMatrix encode_all(const EncoderParams& p, std::span<const SequenceSample> samples) {
  if (samples.empty()) return FeatureMatrix(0, p.embed_dim());
  return encoder_forward(p, stack_inputs(samples)).embedding;
}

/// argmax_j z . k_j with ties resolved to the lowest index.
inline int predict_class(const Vector& z, const PrototypeBank& bank) {
  const Vector sims = bank.matrix() * z;
  int best = 0;
  for (int j = 1; j < sims.size(); ++j) {
    if (sims(j) > sims(best)) best = j;
  }
  return best;
}

struct TrainConfig {
  LossMode mode = LossMode::PSL_CT;
  bool use_shuffled = true;
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int hidden_dim = 64;
  int embed_dim = 16;
  LossConfig loss;
  bool inflated_init = true;
  std::uint64_t seed = 0;

  void validate() const {
    require(epochs >= 0, "epochs must be nonnegative");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
    require(embed_dim >= 2 && hidden_dim >= embed_dim, "need hidden_dim >= embed_dim >= 2");
    loss.validate();
  }
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double sim_prototype = 0.0;  // mean sim(z, k_i)
  double sim_center = 0.0;     // mean sim(z, zbar_i)
  double variance = 0.0;       // mean per-dimension intra-class variance
};

struct TrainResult {
  EncoderParams params;
  PrototypeBank bank;
  std::vector<EpochLog> log;
};

inline EpochLog summarize_epoch(const EncoderParams& params, const PrototypeBank& bank,
                                std::span<const SequenceSample> data) {
  const FeatureMatrix z = encode_all(params, data);
  std::vector<int> labels, predicted;
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels.push_back(data[i].label);
    predicted.push_back(predict_class(z.row(static_cast<Eigen::Index>(i)).transpose(), bank));
    correct += predicted.back() == labels.back();
  }
  const ClassStats stats = class_similarity_stats(z, labels, predicted, bank, std::vector<bool>(data.size(), false));
  EpochLog e;
  e.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  e.sim_prototype = stats.ind.mean_sim_prototype;
  e.sim_center = stats.ind.mean_sim_center;
  e.variance = stats.ind.variance;
  return e;
}

/// Mini-batch momentum SGD over encoder and prototypes with one optimizer
/// state. Prototypes are projected back to the unit sphere after each step.
/// With use_shuffled under PSL_CT, every batch element gets a freshly
/// shuffled copy that passes through the encoder as its soft positive.
inline TrainResult train(std::span<const SequenceSample> dataset, const TrainConfig& cfg, int num_classes = -1) {
  cfg.validate();
  require(!dataset.empty(), "training set is empty");
  int max_label = 0;
  for (const auto& s : dataset) {
    require(!s.is_ood, "training set must contain only InD samples");
    require(s.label >= 0, "training labels must be nonnegative");
    max_label = std::max(max_label, s.label);
  }
  if (num_classes < 0) num_classes = max_label + 1;
  require(max_label < num_classes, "training label exceeds num_classes");

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  const SequenceSample& first = dataset.front();
  result.params = cfg.inflated_init
                      ? EncoderParams::init_inflated(first.num_frames(), first.frame_dim(), cfg.hidden_dim,
                                                     cfg.embed_dim, rng)
                      : EncoderParams::init(static_cast<int>(first.frames.size()), cfg.hidden_dim, cfg.embed_dim, rng);
  result.bank = PrototypeBank::random(num_classes, cfg.embed_dim, rng);
  if (cfg.epochs == 0) return result;

  EncoderParams& p = result.params;
  EncoderParams vel{Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
                    Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
  Matrix proto_vel = Matrix::Zero(num_classes, cfg.embed_dim);
  const bool shuffle_on = cfg.use_shuffled && cfg.mode == LossMode::PSL_CT;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<SequenceSample> batch, shuffled;
  std::vector<int> labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      labels.clear();
      shuffled.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(dataset[order[i]]);
        labels.push_back(batch.back().label);
        if (shuffle_on) shuffled.push_back(shuffle_frames(batch.back(), rng));
      }
      const EncoderCache cache = encoder_forward(p, stack_inputs(batch));
      EncoderCache shuf_cache;
      if (shuffle_on) shuf_cache = encoder_forward(p, stack_inputs(shuffled));

      const BatchLossOutput out = batch_loss(cache.embedding, labels, shuffle_on ? &shuf_cache.embedding : nullptr,
                                             result.bank, cfg.loss, cfg.mode);
      require(std::isfinite(out.value), "training loss became non-finite");
      loss_sum += out.value;
      ++batches;

      EncoderGrads g{Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
                     Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
      encoder_backward(p, cache, out.grad_features, g);
      if (shuffle_on) encoder_backward(p, shuf_cache, out.grad_shuffled, g);

      const double mu = cfg.momentum, lr = cfg.learning_rate;
      vel.w1 = mu * vel.w1 + g.w1;
      vel.b1 = mu * vel.b1 + g.b1;
      vel.w2 = mu * vel.w2 + g.w2;
      vel.b2 = mu * vel.b2 + g.b2;
      proto_vel = mu * proto_vel + out.grad_prototypes;
      p.w1 -= lr * vel.w1;
      p.b1 -= lr * vel.b1;
      p.w2 -= lr * vel.w2;
      p.b2 -= lr * vel.b2;
      result.bank.apply_update(-lr * proto_vel);
    }
    EpochLog e = summarize_epoch(p, result.bank, dataset);
    e.epoch = epoch + 1;
    e.loss = loss_sum / batches;
    result.log.push_back(e);
  }
  return result;
}

}  // namespace psl
