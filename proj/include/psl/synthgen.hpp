#pragma once

// Synthetic sequence benchmark. Each class owns an appearance vector a_c
// and a zero-mean sinusoidal temporal pattern p_c(t); a frame is
// a_c + p_c(t) + noise. Some OoD classes are appearance twins of an InD
// class: same a_c, different p_c, so only frame order tells them apart.

#include "psl/common.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace psl {

struct SequenceSample {
  std::int64_t id = 0;
  Matrix frames;  // T x d_f
  int label = 0;
  bool is_ood = false;
  std::optional<std::int64_t> shuffled_from;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int frame_dim() const { return static_cast<int>(frames.cols()); }

  // Row-major flattening; frame order is preserved.
  Vector flatten() const {
    Vector out(frames.size());
    for (Eigen::Index t = 0; t < frames.rows(); ++t) out.segment(t * frames.cols(), frames.cols()) = frames.row(t).transpose();
    return out;
  }
};

struct GeneratorConfig {
  int num_ind_classes = 8;
  int num_ood_classes = 4;
  int frames_per_seq = 8;
  int frame_dim = 16;
  double noise_sigma = 0.5;
  double appearance_twin_fraction = 0.5;
  std::uint64_t seed = 0;

  // Norms of the appearance vector and of the temporal pattern direction.
  double appearance_scale = 1.0;
  double pattern_scale = 1.0;

  // Number of InD class pairs (2j, 2j+1) that are order-only twins.
  int ind_twin_pairs = 0;

  int train_per_class = 250;
  int test_per_class = 100;
  int ood_per_class = 100;

  void validate() const {
    require(num_ind_classes >= 2, "num_ind_classes must be at least 2");
    require(num_ood_classes >= 0, "num_ood_classes must be nonnegative");
    require(frames_per_seq >= 2, "frames_per_seq must be at least 2");
    require(frame_dim >= 1, "frame_dim must be at least 1");
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be nonnegative");
    require(appearance_twin_fraction >= 0.0 && appearance_twin_fraction <= 1.0,
            "appearance_twin_fraction must lie in [0, 1]");
    require(appearance_scale >= 0.0 && pattern_scale >= 0.0, "appearance_scale and pattern_scale must be nonnegative");
    require(train_per_class >= 0 && test_per_class >= 0 && ood_per_class >= 0, "per-class counts must be nonnegative");
  }

  int num_twins() const {
    return static_cast<int>(std::lround(appearance_twin_fraction * num_ood_classes));
  }
  int num_classes() const { return num_ind_classes + num_ood_classes; }
};

struct ClassSpec {
  int label = 0;
  bool is_ood = false;
  std::optional<int> twin_of;  // InD class whose appearance this class reuses
  Vector appearance;
  Vector motion;  // direction and magnitude of the temporal pattern
  int frequency = 1;
  double phase = 0.0;

  // p_c(t); sums to zero over t = 0..T-1.
  Vector pattern(int t, int T) const {
    const double angle = 2.0 * std::numbers::pi * frequency * t / T + phase;
    return motion * std::sin(angle);
  }
};

/// Draws the per-class appearance and temporal parameters from cfg.seed.
/// InD classes come first (labels 0..N-1), then OoD classes; the first
/// num_twins() OoD classes reuse an InD appearance.
inline std::vector<ClassSpec> make_class_specs(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int T = cfg.frames_per_seq;
  const int max_freq = std::max(1, (T - 1) / 2);
  std::uniform_int_distribution<int> freq(1, max_freq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const auto random_direction = [&](double scale) {
    Vector v(cfg.frame_dim);
    for (auto& x : v) x = normal(rng);
    return Vector(v.normalized() * scale);
  };

  std::vector<ClassSpec> specs;
  specs.reserve(cfg.num_classes());
  const int twins = cfg.num_twins();
  for (int c = 0; c < cfg.num_classes(); ++c) {
    ClassSpec spec;
    spec.label = c;
    spec.is_ood = c >= cfg.num_ind_classes;
    const int ood_index = c - cfg.num_ind_classes;
    spec.appearance = random_direction(cfg.appearance_scale);
    spec.motion = random_direction(cfg.pattern_scale);
    spec.frequency = freq(rng);
    spec.phase = phase(rng);
    std::optional<int> twin;
    if (spec.is_ood && ood_index < twins) twin = (2 * ood_index) % cfg.num_ind_classes;
    if (!spec.is_ood && c % 2 == 1 && c / 2 < cfg.ind_twin_pairs) twin = c - 1;
    if (twin) {
      // Same appearance and motion; the pattern is shifted by a quarter
      // period (OoD) or half a period (InD pairs).
      const ClassSpec& base = specs[*twin];
      spec.twin_of = twin;
      spec.appearance = base.appearance;
      spec.motion = base.motion;
      spec.frequency = base.frequency;
      spec.phase = base.phase + (spec.is_ood ? 0.5 : 1.0) * std::numbers::pi;
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

inline SequenceSample draw_sample(const ClassSpec& spec, const GeneratorConfig& cfg, std::int64_t id,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  SequenceSample s;
  s.id = id;
  s.label = spec.label;
  s.is_ood = spec.is_ood;
  s.frames.resize(cfg.frames_per_seq, cfg.frame_dim);
  for (int t = 0; t < cfg.frames_per_seq; ++t) {
    const Vector base = spec.appearance + spec.pattern(t, cfg.frames_per_seq);
    for (int k = 0; k < cfg.frame_dim; ++k) {
      // Always consume the draw so sigma = 0 and sigma > 0 share one stream.
      const double eps = noise(rng);
      s.frames(t, k) = base(k) + cfg.noise_sigma * eps;
    }
  }
  return s;
}

/// count_per_class samples for every class (InD then OoD), ids 0, 1, 2, ...
inline std::vector<SequenceSample> generate(const GeneratorConfig& cfg, int count_per_class) {
  require(count_per_class >= 0, "count_per_class must be nonnegative");
  const auto specs = make_class_specs(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<SequenceSample> out;
  out.reserve(static_cast<std::size_t>(count_per_class) * specs.size());
  std::int64_t id = 0;
  for (const auto& spec : specs)
    for (int i = 0; i < count_per_class; ++i) out.push_back(draw_sample(spec, cfg, id++, rng));
  return out;
}

struct DatasetSplits {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> test_ind;
  std::vector<SequenceSample> test_ood;
};

/// Train and test InD sets plus the OoD test set; sample ids are unique
/// across all three. OoD classes never appear in train.
inline DatasetSplits generate_splits(const GeneratorConfig& cfg) {
  const auto specs = make_class_specs(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  DatasetSplits out;
  std::int64_t id = 0;
  for (const auto& spec : specs) {
    if (spec.is_ood) continue;
    for (int i = 0; i < cfg.train_per_class; ++i) out.train.push_back(draw_sample(spec, cfg, id++, rng));
  }
  for (const auto& spec : specs) {
    if (spec.is_ood) continue;
    for (int i = 0; i < cfg.test_per_class; ++i) out.test_ind.push_back(draw_sample(spec, cfg, id++, rng));
  }
  for (const auto& spec : specs) {
    if (!spec.is_ood) continue;
    for (int i = 0; i < cfg.ood_per_class; ++i) out.test_ood.push_back(draw_sample(spec, cfg, id++, rng));
  }
  return out;
}

/// Applies a uniformly random non-identity permutation to the frames.
inline SequenceSample shuffle_frames(const SequenceSample& sample, std::mt19937_64& rng) {
  const int T = sample.num_frames();
  require(T >= 2, "shuffle_frames needs at least 2 frames");
  std::vector<int> perm(T);
  bool identity = true;
  while (identity) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = T - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    identity = std::is_sorted(perm.begin(), perm.end());
  }
  SequenceSample out = sample;
  for (int t = 0; t < T; ++t) out.frames.row(t) = sample.frames.row(perm[t]);
  out.shuffled_from = sample.id;
  return out;
}

inline SequenceSample shuffle_frames(const SequenceSample& sample, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return shuffle_frames(sample, rng);
}

}  // namespace psl
