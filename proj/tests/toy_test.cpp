#include "macpruning/toy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "macpruning/experiments.hpp"

namespace macp {
namespace {

TEST(ToyDatasetGen, DeterministicPerSeed) {
  const auto a = make_toy_dataset(40, 0.9, 123);
  const auto b = make_toy_dataset(40, 0.9, 123);
  const auto c = make_toy_dataset(40, 0.9, 124);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.x, c.x);
}

TEST(ToyDatasetGen, ShapeLabelsAndClipping) {
  const auto ds = make_toy_dataset(50, 0.9, 7);
  EXPECT_EQ(ds.n, 50);
  EXPECT_EQ(ds.x.size(), static_cast<std::size_t>(50) * kToyPixels);
  for (int i = 0; i < ds.n; ++i) EXPECT_EQ(ds.y[i], i % kToyClasses);
  for (double v : ds.x) {
    EXPECT_LE(v, 3.0);
    EXPECT_GE(v, -3.0);
  }
}

TEST(ToyGlyphs, DistinctShapesCoverMostPixels) {
  for (int a = 0; a < kToyClasses; ++a) {
    const auto g = glyph_image(a);
    EXPECT_GT(std::count_if(g.begin(), g.end(), [](double v) { return v != 0.0; }), 0);
    for (int b = a + 1; b < kToyClasses; ++b) EXPECT_NE(g, glyph_image(b));
  }
  const auto info = informative_pixels();
  int covered = 0;
  for (auto v : info) covered += v;
  EXPECT_EQ(covered, 130);
}

TEST(ToyGlyphs, TexturesAreSignsAndClassStable) {
  for (int cls = 0; cls < kToyClasses; ++cls) {
    const auto t = class_texture(cls);
    ASSERT_EQ(t.size(), static_cast<std::size_t>(kToyPixels));
    for (double v : t) EXPECT_TRUE(v == 1.0 || v == -1.0);
    EXPECT_EQ(t, class_texture(cls));
  }
  EXPECT_NE(class_texture(0), class_texture(1));
}

TEST(ToyWorldA, TestAccuracyIsHigh) {
  const ToyWorld w = make_world_a();
  const EvalResult r = evaluate(w.model, w.test);
  EXPECT_GE(r.accuracy, 0.95);
  EXPECT_LT(r.loss, 0.5);
}

TEST(ToyWorldA, UtilityGrowsWithKeepProbability) {
  const ToyWorld w = make_world_a();
  const auto mean_acc = [&w](double p) {
    double s = 0.0;
    for (int r = 0; r < 10; ++r)
      s += accuracy_under_rpam(w.model, w.test, p, derive_seed(7, 6000 + r));
    return s / 10;
  };
  const double a3 = mean_acc(0.3), a5 = mean_acc(0.5), a7 = mean_acc(0.7), a9 = mean_acc(0.9);
  EXPECT_GT(a5, a3);
  EXPECT_GT(a7, a5);
  EXPECT_GT(a9, a7);
  EXPECT_GE(a9, 0.98);
}

TEST(ToyWorldA, MaskingRatioEndpointsAreExact) {
  const ToyWorld w = make_world_a();
  const EvalResult clean = evaluate(w.model, w.test);
  EXPECT_DOUBLE_EQ(accuracy_under_masking_ratio(w.model, w.test, 0.0, 1), clean.accuracy);
  // Fully blanked input collapses to the constant prediction; labels are
  // balanced over 5 classes, so the accuracy is exactly one fifth.
  EXPECT_DOUBLE_EQ(accuracy_under_masking_ratio(w.model, w.test, 1.0, 1), 0.2);
}

TEST(ToyWorldA, AccuracyFallsAsMaskingGrows) {
  const ToyWorld w = make_world_a();
  const auto mean_acc = [&w](double ratio) {
    double s = 0.0;
    for (int r = 0; r < 5; ++r)
      s += accuracy_under_masking_ratio(w.model, w.test, ratio, derive_seed(7, 7000 + r));
    return s / 5;
  };
  const double m2 = mean_acc(0.2), m4 = mean_acc(0.4), m6 = mean_acc(0.6), m8 = mean_acc(0.8);
  EXPECT_GT(m2, m4);
  EXPECT_GT(m4, m6);
  EXPECT_GT(m6, m8);
}

TEST(ToyDefenseEval, FullKeepMatchesCleanExactly) {
  const ToyWorld w = make_world_a();
  const EvalResult clean = evaluate(w.model, w.test);
  EXPECT_DOUBLE_EQ(accuracy_under_rpam(w.model, w.test, 1.0, 9), clean.accuracy);
  const std::vector<int> critical{0, 5, 17};
  EXPECT_DOUBLE_EQ(accuracy_under_iapam(w.model, w.test, critical, 1.0, 0.4, 9), clean.accuracy);
}

TEST(ToyDefenseEval, SeededRunsRepeat) {
  const ToyWorld w = make_world_a();
  EXPECT_DOUBLE_EQ(accuracy_under_rpam(w.model, w.test, 0.5, 77),
                   accuracy_under_rpam(w.model, w.test, 0.5, 77));
  EXPECT_NE(accuracy_under_rpam(w.model, w.test, 0.5, 77),
            accuracy_under_rpam(w.model, w.test, 0.5, 78));
}

}  // namespace
}  // namespace macp
