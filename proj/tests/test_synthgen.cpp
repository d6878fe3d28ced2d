#include "psl/synthgen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

using namespace psl;

namespace {

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST(Generate, ZeroNoiseSamplesOfOneClassAreIdentical) {
  GeneratorConfig cfg;
  cfg.noise_sigma = 0.0;
  const auto data = generate(cfg, 2);
  ASSERT_EQ(data.size(), static_cast<std::size_t>(2 * cfg.num_classes()));
  EXPECT_EQ(data[0].label, data[1].label);
  EXPECT_EQ(data[0].frames, data[1].frames);
  EXPECT_NE(data[0].frames, data[2].frames);
}

TEST(Generate, TwinSharesSequenceMeanWithItsInDClass) {
  GeneratorConfig cfg;
  cfg.num_ind_classes = 2;
  cfg.num_ood_classes = 1;
  cfg.appearance_twin_fraction = 1.0;
  cfg.noise_sigma = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto specs = make_class_specs(cfg);
    ASSERT_TRUE(specs[2].twin_of.has_value());
    const auto data = generate(cfg, 1);
    const SequenceSample& ood = data[2];
    const SequenceSample& ind = data[static_cast<std::size_t>(*specs[2].twin_of)];
    EXPECT_TRUE(ood.is_ood);
    const Vector mo = ood.frames.colwise().mean().transpose();
    const Vector mi = ind.frames.colwise().mean().transpose();
    EXPECT_LE((mo - mi).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mi - specs[0].appearance).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT((ood.frames - ind.frames).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Generate, PatternsHaveZeroTemporalMean) {
  for (int T : {2, 3, 5, 8, 16}) {
    GeneratorConfig cfg;
    cfg.frames_per_seq = T;
    for (const auto& spec : make_class_specs(cfg)) {
      Vector sum = Vector::Zero(cfg.frame_dim);
      for (int t = 0; t < T; ++t) sum += spec.pattern(t, T);
      EXPECT_LE(sum.cwiseAbs().maxCoeff(), 1e-12) << "T=" << T;
    }
  }
}

TEST(Generate, TwinCountFollowsFraction) {
  GeneratorConfig cfg;
  const auto specs = make_class_specs(cfg);
  int twins = 0;
  for (const auto& s : specs) twins += s.is_ood && s.twin_of.has_value();
  EXPECT_EQ(twins, 2);
  cfg.appearance_twin_fraction = 0.0;
  for (const auto& s : make_class_specs(cfg)) EXPECT_FALSE(s.is_ood && s.twin_of.has_value());
}

TEST(Generate, FixedSeedIsBitIdentical) {
  GeneratorConfig cfg;
  cfg.seed = 42;
  const auto a = generate_splits(cfg);
  const auto b = generate_splits(cfg);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].frames, b.train[i].frames);
  for (std::size_t i = 0; i < a.test_ood.size(); ++i) EXPECT_EQ(a.test_ood[i].frames, b.test_ood[i].frames);
  cfg.seed = 43;
  EXPECT_NE(generate_splits(cfg).train[0].frames, a.train[0].frames);
}

TEST(Generate, SplitsAreDisjointAndOodNeverTrains) {
  GeneratorConfig cfg;
  cfg.train_per_class = 20;
  cfg.test_per_class = 10;
  cfg.ood_per_class = 7;
  const auto d = generate_splits(cfg);
  EXPECT_EQ(d.train.size(), 160u);
  EXPECT_EQ(d.test_ind.size(), 80u);
  EXPECT_EQ(d.test_ood.size(), 28u);
  std::set<std::int64_t> ids;
  for (const auto* part : {&d.train, &d.test_ind, &d.test_ood})
    for (const auto& s : *part) EXPECT_TRUE(ids.insert(s.id).second);
  for (const auto& s : d.train) {
    EXPECT_FALSE(s.is_ood);
    EXPECT_LT(s.label, cfg.num_ind_classes);
  }
  for (const auto& s : d.test_ood) {
    EXPECT_TRUE(s.is_ood);
    EXPECT_GE(s.label, cfg.num_ind_classes);
  }
}

TEST(Generate, AllEntriesFiniteAndShaped) {
  GeneratorConfig cfg;
  cfg.noise_sigma = 2.0;
  for (const auto& s : generate(cfg, 5)) {
    EXPECT_EQ(s.frames.rows(), cfg.frames_per_seq);
    EXPECT_EQ(s.frames.cols(), cfg.frame_dim);
    EXPECT_TRUE(s.frames.allFinite());
  }
}

TEST(Generate, RejectsInvalidConfig) {
  GeneratorConfig cfg;
  cfg.num_ind_classes = 1;
  EXPECT_THROW(generate(cfg, 1), ValidationError);
  cfg = {};
  cfg.appearance_twin_fraction = 1.5;
  EXPECT_THROW(generate(cfg, 1), ValidationError);
  cfg = {};
  cfg.frames_per_seq = 1;
  EXPECT_THROW(generate(cfg, 1), ValidationError);
  cfg = {};
  cfg.noise_sigma = -0.1;
  EXPECT_THROW(generate(cfg, 1), ValidationError);
}

TEST(Generate, FlattenIsRowMajor) {
  SequenceSample s;
  s.frames.resize(2, 3);
  s.frames << 1, 2, 3, 4, 5, 6;
  const Vector f = s.flatten();
  for (int k = 0; k < 6; ++k) EXPECT_EQ(f(k), k + 1);
}

TEST(ShuffleFrames, TwoFramesAreSwapped) {
  SequenceSample s;
  s.id = 9;
  s.label = 3;
  s.frames.resize(2, 2);
  s.frames << 1, 2, 3, 4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SequenceSample out = shuffle_frames(s, seed);
    EXPECT_EQ(out.frames.row(0), s.frames.row(1));
    EXPECT_EQ(out.frames.row(1), s.frames.row(0));
    EXPECT_EQ(out.label, 3);
    EXPECT_EQ(out.shuffled_from, std::optional<std::int64_t>(9));
  }
}

TEST(ShuffleFrames, PreservesMultisetAndNeverReturnsIdentity) {
  GeneratorConfig cfg;
  const auto data = generate(cfg, 3);
  std::mt19937_64 rng(5);
  for (const auto& s : data) {
    for (int rep = 0; rep < 20; ++rep) {
      const SequenceSample out = shuffle_frames(s, rng);
      EXPECT_EQ(sorted_rows(out.frames), sorted_rows(s.frames));
      EXPECT_NE(out.frames, s.frames);
      EXPECT_EQ(out.is_ood, s.is_ood);
    }
  }
}

TEST(ShuffleFrames, FixedSeedGivesSamePermutation) {
  GeneratorConfig cfg;
  const auto s = generate(cfg, 1).front();
  EXPECT_EQ(shuffle_frames(s, 77).frames, shuffle_frames(s, 77).frames);
}

TEST(ShuffleFrames, PermutationsAreRoughlyUniformOverNonIdentity) {
  SequenceSample s;
  s.frames.resize(3, 1);
  s.frames << 0, 1, 2;
  std::mt19937_64 rng(1);
  std::map<std::vector<double>, int> counts;
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    const auto out = shuffle_frames(s, rng);
    counts[{out.frames(0, 0), out.frames(1, 0), out.frames(2, 0)}]++;
  }
  EXPECT_EQ(counts.size(), 5u);
  for (const auto& [perm, n] : counts) EXPECT_NEAR(n / static_cast<double>(draws), 0.2, 0.01);
}

TEST(ShuffleFrames, RejectsSingleFrame) {
  SequenceSample s;
  s.frames = Matrix::Ones(1, 4);
  EXPECT_THROW(shuffle_frames(s, 1), ValidationError);
}
