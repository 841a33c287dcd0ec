#include "macpruning/pam.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"

namespace macp {
namespace {

TEST(EffectiveRate, ClosedForm) {
  EXPECT_DOUBLE_EQ(effective_rate(0.7, 0.4), 0.5);
  EXPECT_DOUBLE_EQ(effective_rate(0.5, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(effective_rate(0.4, 0.4), 0.0);
  EXPECT_DOUBLE_EQ(effective_rate(1.0, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(effective_rate(1.5, 0.4), 1.0);
  EXPECT_THROW((void)effective_rate(0.3, 0.4), std::invalid_argument);
}

TEST(Rpam, EdgeProbabilities) {
  const Dims dims{1, 64, 1};
  const auto all_on = sample_rpam(dims, {1.0}, 7);
  EXPECT_EQ(all_on.active_count(), 64);
  const auto all_off = sample_rpam(dims, {0.0}, 7);
  EXPECT_EQ(all_off.active_count(), 0);
}

TEST(Rpam, DeterministicPerSeed) {
  const Dims dims{4, 4, 2};
  const auto a = sample_rpam(dims, {0.5}, 123);
  const auto b = sample_rpam(dims, {0.5}, 123);
  const auto c = sample_rpam(dims, {0.5}, 124);
  EXPECT_EQ(a.active, b.active);
  EXPECT_NE(a.active, c.active);
}

TEST(Rpam, ActiveFractionMatchesProbability) {
  const Dims dims{1, 1000, 1};
  const double p = 0.7;
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) total += sample_rpam(dims, {p}, 1000 + r).active_count();
  const double n = 1000.0 * reps;
  const double mean = total / n;
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(mean, p, 5 * se);
}

TEST(Iapam, CriticalPixelsAlwaysActive) {
  const Dims dims{1, 100, 1};
  std::vector<std::uint8_t> critical(100, 0);
  for (int i = 0; i < 40; ++i) critical[i] = 1;
  const IapamConfig cfg{0.7, 0.4, critical, dims};
  for (int seed = 0; seed < 50; ++seed) {
    const auto mask = sample_iapam(cfg, seed);
    for (int i = 0; i < 40; ++i) EXPECT_TRUE(mask.is_active(i));
  }
}

TEST(Iapam, NonCriticalRateMatchesEffectiveRate) {
  const Dims dims{1, 1000, 1};
  std::vector<std::uint8_t> critical(1000, 0);
  for (int i = 0; i < 400; ++i) critical[i] = 1;
  const IapamConfig cfg{0.7, 0.4, critical, dims};
  double on = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto mask = sample_iapam(cfg, 500 + r);
    for (int i = 400; i < 1000; ++i) on += mask.is_active(i) ? 1 : 0;
  }
  const double n = 600.0 * reps;
  const double rate = effective_rate(cfg);
  const double se = std::sqrt(rate * (1 - rate) / n);
  EXPECT_DOUBLE_EQ(rate, 0.5);
  EXPECT_NEAR(on / n, rate, 5 * se);
}

TEST(Iapam, ValidateRejectsBadConfigs) {
  const Dims dims{1, 4, 1};
  EXPECT_THROW((IapamConfig{0.3, 0.4, {1, 1, 0, 0}, dims}).validate(), std::invalid_argument);
  EXPECT_THROW((IapamConfig{0.7, 0.4, {1, 1}, dims}).validate(), std::invalid_argument);
}

TEST(RunMacs, MaskCompressesTimeline) {
  const auto layer = make_chain_layer({1, 2, 3});
  InputVector input{{1, 1, 1}};
  ActivationMask mask{{1, 0, 1}, layer.dims};
  const auto exec = run_macs(layer, input, mask);
  ASSERT_EQ(exec.accumulators.size(), 2u);
  EXPECT_EQ(exec.executed, std::vector<int>({0, 2}));
  EXPECT_EQ(exec.accumulators[0], 1);
  EXPECT_EQ(exec.accumulators[1], 4);
}

TEST(RunMacs, RejectsMismatchedMask) {
  const auto layer = make_chain_layer({1, 2, 3});
  InputVector input{{1, 1, 1}};
  ActivationMask mask{{1, 0}, Dims{1, 2, 1}};
  EXPECT_THROW((void)run_macs(layer, input, mask), std::invalid_argument);
}

TEST(AllActiveMask, CoversEveryPixel) {
  const auto mask = all_active_mask({2, 3, 1});
  EXPECT_EQ(mask.active_count(), 6);
}

}  // namespace
}  // namespace macp
