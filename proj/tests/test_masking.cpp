#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mofill/error.hpp"
#include "mofill/masking.hpp"
#include "test_util.hpp"

using namespace mofill;

TEST(Curriculum, StepsOfTenEveryFiveEpochs) {
  EXPECT_EQ(curriculum_mu(0), 10);
  EXPECT_EQ(curriculum_mu(4), 10);
  EXPECT_EQ(curriculum_mu(5), 20);
  EXPECT_EQ(curriculum_mu(54), 110);
  EXPECT_EQ(curriculum_mu(55), 120);
  EXPECT_EQ(curriculum_mu(199), 120);
  EXPECT_THROW(curriculum_mu(-1), UsageError);
}

TEST(Curriculum, ShortRunsReachTheFullRamp) {
  // 30 epochs: e * 2 / 5
  EXPECT_EQ(curriculum_mu(0, 30), 10);
  EXPECT_EQ(curriculum_mu(2, 30), 10);
  EXPECT_EQ(curriculum_mu(3, 30), 20);
  EXPECT_EQ(curriculum_mu(28, 30), 120);
  EXPECT_EQ(curriculum_mu(29, 30), 120);
  // long runs use the plain schedule
  EXPECT_EQ(curriculum_mu(5, 200), 20);
  EXPECT_EQ(curriculum_mu(5, 60), 20);
}

TEST(Curriculum, StateAtEpoch) {
  const auto s = CurriculumState::at_epoch(10);
  EXPECT_EQ(s.mu, 30);
  EXPECT_EQ(s.sigma, kGapSigma);
  EXPECT_EQ(s.mu_max, 120);
}

TEST(GapMask, ZeroesWholeColumns) {
  const FeatureMask m = gap_mask(10, 3, 4);
  for (int r = 0; r < kFeatures; ++r)
    for (int t = 0; t < 10; ++t) EXPECT_EQ(m.at(r, t), (t >= 3 && t < 7) ? 0 : 1);
  EXPECT_EQ(m.zero_count(), 4u * kFeatures);
  EXPECT_THROW(gap_mask(10, 8, 3), ShapeError);
}

TEST(GapSampler, MeanLengthAndBounds) {
  CurriculumState st;
  st.mu = 60;
  double sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const GapSample g = sample_gap_mask(kWindow, st, derive_seed(3, i));
    ASSERT_GE(g.length, 1);
    ASSERT_LE(g.length, 120);
    ASSERT_GE(g.start, 0);
    ASSERT_LE(g.start + g.length, kWindow);
    sum += g.length;
  }
  EXPECT_NEAR(sum / draws, 60.0, 3.0);
}

TEST(GapSampler, ClampsToShortClipsAndMuZero) {
  CurriculumState st;
  st.mu = 120;
  for (int i = 0; i < 200; ++i) {
    const GapSample g = sample_gap_mask(20, st, i);
    EXPECT_EQ(g.length, 19);
    EXPECT_LE(g.start, 1);
  }
  st.mu = 0;
  EXPECT_EQ(sample_gap_mask(20, st, 1).mask.zero_count(), 0u);
  EXPECT_THROW(sample_gap_mask(1, st, 1), ShapeError);
}

TEST(GapSampler, Deterministic) {
  CurriculumState st;
  st.mu = 40;
  EXPECT_EQ(sample_gap_mask(240, st, 77).mask, sample_gap_mask(240, st, 77).mask);
}

TEST(JointDrop, OneToThreeDistinctJointsWholeSequence) {
  std::set<std::size_t> counts;
  for (int i = 0; i < 300; ++i) {
    const JointDropSample s = sample_joint_drop_mask(30, i);
    counts.insert(s.joints.size());
    std::set<int> uniq(s.joints.begin(), s.joints.end());
    ASSERT_EQ(uniq.size(), s.joints.size());
    EXPECT_EQ(s.mask.zero_count(), s.joints.size() * 3 * 30);
    for (int r = kRowForward; r <= kRowTurn; ++r) EXPECT_EQ(s.mask.at(r, 0), 1);
  }
  EXPECT_EQ(counts, (std::set<std::size_t>{1, 2, 3}));
}

TEST(FrameDrop, EmpiricalRate) {
  const FeatureMask m = sample_frame_drop_mask(500, 0.3, 5);
  const double rate = static_cast<double>(m.zero_count()) / (3.0 * kJoints * 500);
  EXPECT_NEAR(rate, 0.3, 0.02);
  for (int t = 0; t < 500; ++t) EXPECT_EQ(m.at(kRowTurn, t), 1);
  EXPECT_EQ(sample_frame_drop_mask(10, 0.0, 1).zero_count(), 0u);
  EXPECT_THROW(sample_frame_drop_mask(10, 1.5, 1), UsageError);
}

TEST(Noise, JointRowsOnlyWithUnitVariance) {
  const PoseClip zero(400);
  const PoseClip n = add_gaussian_noise(zero, 1.0, 3);
  double ss = 0.0;
  for (int r = 0; r < 3 * kJoints; ++r)
    for (int t = 0; t < 400; ++t) ss += n.at(r, t) * n.at(r, t);
  EXPECT_NEAR(ss / (3.0 * kJoints * 400), 1.0, 0.03);
  for (int t = 0; t < 400; ++t) EXPECT_EQ(n.at(kRowForward, t), 0.0);
}

TEST(ApplyMask, ZeroesMaskedEntries) {
  PoseClip c(5);
  for (double& v : c.values()) v = 2.0;
  const PoseClip m = apply_mask(c, gap_mask(5, 1, 2));
  EXPECT_EQ(m.at(10, 0), 2.0);
  EXPECT_EQ(m.at(10, 1), 0.0);
  EXPECT_EQ(m.at(68, 2), 0.0);
  EXPECT_THROW(apply_mask(c, FeatureMask(6)), ShapeError);
}

TEST(MaskAlgebra, AndCombines) {
  FeatureMask a = gap_mask(10, 0, 2);
  a &= gap_mask(10, 5, 2);
  EXPECT_EQ(a.zero_count(), 4u * kFeatures);
}

TEST(Perturb, Kinds) {
  PoseClip c(40);
  for (double& v : c.values()) v = 1.0;
  PerturbationSpec spec;
  EXPECT_EQ(perturb(c, spec, 1), c);
  spec.kind = PerturbationKind::gap;
  spec.gap_start = 10;
  spec.gap_length = 5;
  EXPECT_EQ(perturb(c, spec, 1).at(0, 12), 0.0);
  spec = {};
  spec.kind = PerturbationKind::joint_drop;
  spec.joints = {4};
  const PoseClip j = perturb(c, spec, 1);
  EXPECT_EQ(j.at(joint_row(4, 2), 7), 0.0);
  EXPECT_EQ(j.at(joint_row(5, 2), 7), 1.0);
  EXPECT_EQ(parse_perturbation("frame_drop"), PerturbationKind::frame_drop);
  EXPECT_THROW(parse_perturbation("blur"), UsageError);
}

TEST(MaskFile, RoundTripAndValidation) {
  const FeatureMask m = sample_frame_drop_mask(12, 0.4, 9);
  EXPECT_EQ(parse_mask(format_mask(m)), m);
  std::string bad = format_mask(m);
  bad[bad.find('\n') + 1] = '2';
  EXPECT_THROW(parse_mask(bad), DataError);
}
