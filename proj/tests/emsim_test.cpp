#include "macpruning/emsim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "macpruning/pam.hpp"
#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"

namespace macp {
namespace {

TEST(LeakageParams, SigmaMustBePositive) {
  EXPECT_THROW((LeakageParams{1.0, 0.0, 0.0}).validate(), std::invalid_argument);
  EXPECT_THROW((LeakageParams{1.0, 0.0, -1.0}).validate(), std::invalid_argument);
  EXPECT_NO_THROW((LeakageParams{1.0, 0.0, 4.0}).validate());
}

TEST(SynthesizeTrace, SamplesTrackAccumulatorHammingWeights) {
  MacExecution exec;
  exec.executed = {0, 1};
  exec.accumulators = {3, 7};  // HW 2 and 3
  const LeakageParams params{1.0, 0.0, 1e-9};
  const EmTrace trace = synthesize_trace(exec, params, 2, 99);
  ASSERT_EQ(trace.samples.size(), 2u);
  EXPECT_NEAR(trace.samples[0], 2.0, 1e-3);
  EXPECT_NEAR(trace.samples[1], 3.0, 1e-3);
  EXPECT_EQ(trace.executed_count, 2);
}

TEST(SynthesizeTrace, SlotsPastExecutedAreNoiseAroundBaseline) {
  MacExecution exec;
  exec.executed = {0};
  exec.accumulators = {1};
  const LeakageParams params{1.0, 100.0, 1e-9};
  const EmTrace trace = synthesize_trace(exec, params, 3, 5);
  EXPECT_NEAR(trace.samples[0], 101.0, 1e-3);
  EXPECT_NEAR(trace.samples[1], 100.0, 1e-3);
  EXPECT_NEAR(trace.samples[2], 100.0, 1e-3);
}

TEST(SynthesizeTrace, RejectsTooShortTraceLen) {
  MacExecution exec;
  exec.executed = {0, 1};
  exec.accumulators = {1, 2};
  EXPECT_THROW((void)synthesize_trace(exec, {1.0, 0.0, 1.0}, 1, 0), std::invalid_argument);
}

TEST(SimulateSet, DeterministicAndPerTraceSeeded) {
  const auto layer = make_chain_layer({3, -5, 7, 11});
  const LeakageParams params{1.0, 0.0, 4.0};
  const auto a = simulate_set(layer, DefenseSpec::rpam(0.5), params, 5, 4, 77);
  const auto b = simulate_set(layer, DefenseSpec::rpam(0.5), params, 5, 4, 77);
  EXPECT_EQ(a.traces.samples, b.traces.samples);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.executed_counts, b.executed_counts);
  // Trace i depends only on derive_seed(base, i): prefixes of a longer set
  // match a shorter set exactly.
  const auto c = simulate_set(layer, DefenseSpec::rpam(0.5), params, 2, 4, 77);
  EXPECT_TRUE(std::equal(c.traces.samples.begin(), c.traces.samples.end(),
                         a.traces.samples.begin()));
  EXPECT_TRUE(std::equal(c.inputs.begin(), c.inputs.end(), a.inputs.begin()));
}

TEST(SimulateSet, UnprotectedExecutesEveryMac) {
  const auto layer = make_chain_layer({1, 2, 3});
  const auto set = simulate_set(layer, DefenseSpec::unprotected(), {1.0, 0.0, 1.0}, 10, 3, 1);
  for (int count : set.executed_counts) EXPECT_EQ(count, 3);
}

TEST(SimulateSet, ExecutedCountIsBinomial) {
  const auto layer = make_chain_layer({1, 2, 3, 4});
  const double p = 0.6;
  const int n = 20000;
  const auto set = simulate_set(layer, DefenseSpec::rpam(p), {1.0, 0.0, 1.0}, n, 4, 2024);
  std::vector<int> hist(5, 0);
  for (int count : set.executed_counts) ++hist[count];
  const auto choose = [](int nn, int kk) {
    double c = 1.0;
    for (int i = 1; i <= kk; ++i) c = c * (nn - kk + i) / i;
    return c;
  };
  for (int k = 0; k <= 4; ++k) {
    const double prob = choose(4, k) * std::pow(p, k) * std::pow(1 - p, 4 - k);
    const double se = std::sqrt(prob * (1 - prob) / n);
    EXPECT_NEAR(hist[k] / static_cast<double>(n), prob, 5 * se) << "count " << k;
  }
}

// The all-on and all-off execution sequences are identified uniquely by the
// executed count, so their trace fractions check the per-sequence mass
// p^k (1-p)^(j-k) directly.
TEST(SimulateSet, SequenceMassMatchesBernoulliProduct) {
  const auto layer = make_chain_layer({1, 2, 3, 4});
  const double p = 0.7;
  const int n = 40000;
  const auto set = simulate_set(layer, DefenseSpec::rpam(p), {1.0, 0.0, 1.0}, n, 4, 31);
  int all_on = 0, all_off = 0;
  for (int count : set.executed_counts) {
    all_on += count == 4 ? 1 : 0;
    all_off += count == 0 ? 1 : 0;
  }
  const double p_on = std::pow(p, 4), p_off = std::pow(1 - p, 4);
  EXPECT_NEAR(all_on / static_cast<double>(n), p_on, 5 * std::sqrt(p_on * (1 - p_on) / n));
  EXPECT_NEAR(all_off / static_cast<double>(n), p_off, 5 * std::sqrt(p_off * (1 - p_off) / n));
}

// First-slot distribution under half-rate pruning, checked against the
// explicit enumeration of all 8 masks of a 3-MAC chain.
TEST(Mixture, FirstSlotMatchesMaskEnumeration) {
  const auto layer = make_chain_layer({1, 2, 3});
  InputVector input{{1, 1, 1}};
  const LeakageParams params{1.0, -5.0, 0.01};
  const int n = 8000;
  // Enumerated slot-0 means: first active MAC k gives HW(i_k * w_k) - 5.
  // P(slot0 = 1-5) = 3/4 (first or second MAC leads), P(2-5) = 1/8 (only
  // third), P(-5) = 1/8 (empty mask).
  int count_hw1 = 0, count_hw2 = 0, count_empty = 0;
  for (int r = 0; r < n; ++r) {
    const auto mask = sample_rpam(layer.dims, {0.5}, 9000 + r);
    const auto exec = run_macs(layer, input, mask);
    const auto trace = synthesize_trace(exec, params, 3, 50000 + r);
    const double v = trace.samples[0];
    if (std::abs(v - (1.0 - 5.0)) < 0.4) ++count_hw1;
    else if (std::abs(v - (2.0 - 5.0)) < 0.4) ++count_hw2;
    else if (std::abs(v - (-5.0)) < 0.4) ++count_empty;
    else FAIL() << "unexpected slot-0 value " << v;
  }
  const auto check = [n](int count, double prob, const char* label) {
    const double se = std::sqrt(prob * (1 - prob) / n);
    EXPECT_NEAR(count / static_cast<double>(n), prob, 5 * se) << label;
  };
  check(count_hw1, 0.75, "hw1");
  check(count_hw2, 0.125, "hw2");
  check(count_empty, 0.125, "empty");
}

TEST(FitSlot, RecoversLeakageCoefficient) {
  const auto layer = make_chain_layer({13, -7, 29, 53});
  const LeakageParams params{1.0, 0.0, 4.0};
  const int n = 100000;
  const auto set = simulate_set(layer, DefenseSpec::unprotected(), params, n, 4, 404);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* in = set.input(i);
    std::int32_t acc = 0;
    for (int k = 0; k < 4; ++k) acc = mac_step(acc, in[k], layer.weights[k]);
    v[i] = hamming_weight(acc);
  }
  const SlotFit fit = fit_slot(set.traces, 3, v);
  ASSERT_TRUE(fit.defined);
  EXPECT_NEAR(fit.eps_hat, 1.0, 0.05);
  EXPECT_NEAR(fit.sigma2_hat, 16.0, 1.6);
}

TEST(FitSlot, UndefinedOnConstantHypothesis) {
  TraceSet traces;
  traces.trace_len = 1;
  traces.samples = {1.0f, 2.0f, 3.0f};
  const SlotFit fit = fit_slot(traces, 0, {5.0, 5.0, 5.0});
  EXPECT_FALSE(fit.defined);
}

TEST(SnrProfile, StrongestPointFindsTheLeakySlot) {
  const auto layer = make_chain_layer({21, 42, -33});
  const LeakageParams params{1.0, 0.0, 2.0};
  const int n = 5000;
  const auto set = simulate_set(layer, DefenseSpec::unprotected(), params, n, 3, 11);
  std::vector<std::vector<double>> per_slot(3);
  std::vector<double> v2(n);
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* in = set.input(i);
    std::int32_t acc = 0;
    for (int k = 0; k < 3; ++k) acc = mac_step(acc, in[k], layer.weights[k]);
    v2[i] = hamming_weight(acc);
  }
  per_slot[2] = v2;
  per_slot[1] = v2;  // wrong slot for these values: weaker correlation
  const SnrProfile profile = snr_profile(set.traces, per_slot);
  EXPECT_FALSE(profile.defined[0]);
  EXPECT_TRUE(profile.defined[2]);
  EXPECT_EQ(strongest_point(profile, {0, 1, 2}), 2);
  EXPECT_THROW((void)strongest_point(profile, {0}), std::invalid_argument);
  EXPECT_THROW((void)strongest_point(profile, {}), std::invalid_argument);
}

TEST(SnrProfile, RequiresEnoughTraces) {
  TraceSet traces;
  traces.trace_len = 1;
  traces.samples.assign(50, 0.0f);
  EXPECT_THROW((void)snr_profile(traces, {{}}), std::invalid_argument);
}

}  // namespace
}  // namespace macp
