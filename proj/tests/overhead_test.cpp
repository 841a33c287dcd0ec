#include "macpruning/overhead.hpp"

#include <gtest/gtest.h>

#include <stdexcept>

namespace macp {
namespace {

TEST(Baseline, SixCyclesPerMac) {
  EXPECT_EQ(baseline_cycles(1), 6);
  EXPECT_EQ(baseline_cycles(864), 5184);  // 3x3x3 kernel over 32 output channels
  EXPECT_THROW((void)baseline_cycles(0), std::invalid_argument);
}

TEST(Rpam, PerMacCost) {
  // ((8+D)p + 1) per MAC: D=3, p=0.5 -> 6.5 cycles, so 100 MACs cost 650.
  EXPECT_DOUBLE_EQ(rpam_cycles(100, 0.5, 3), 650.0);
  EXPECT_DOUBLE_EQ(rpam_cycles(1, 1.0, 1), 10.0);
  EXPECT_DOUBLE_EQ(rpam_cycles(1, 0.0, 2), 1.0);
}

TEST(Rpam, BreakevenAgainstBaseline) {
  for (int d = 1; d <= 3; ++d) {
    const double pb = breakeven_p(d);
    const long long m = 1000;
    EXPECT_DOUBLE_EQ(rpam_cycles(m, pb, d), 6.0 * m);
    EXPECT_LT(rpam_cycles(m, pb - 0.01, d), baseline_cycles(m));
    EXPECT_GT(rpam_cycles(m, pb + 0.01, d), baseline_cycles(m));
  }
}

TEST(Breakeven, FiveOverEightPlusD) {
  EXPECT_DOUBLE_EQ(breakeven_p(3), 5.0 / 11.0);
  EXPECT_DOUBLE_EQ(breakeven_p(2), 0.5);
  EXPECT_DOUBLE_EQ(breakeven_p(1), 5.0 / 9.0);
  EXPECT_THROW((void)breakeven_p(0), std::invalid_argument);
  EXPECT_THROW((void)breakeven_p(4), std::invalid_argument);
}

TEST(Iapam, PerMacCost) {
  // ((8+D)p + 13 - 8q) per MAC: D=3, p=0.7, q=0.4 -> 17.5 cycles exactly.
  EXPECT_DOUBLE_EQ(iapam_cycles(1000000, 0.7, 0.4, 3), 17500000.0);
  EXPECT_THROW((void)iapam_cycles(10, 0.3, 0.4, 3), std::invalid_argument);  // q > p
}

TEST(Iapam, ZeroCriticalFractionCostsTwelveMoreThanRpam) {
  // With q = 0 the importance lookup is pure overhead: +12 cycles per MAC.
  for (const double p : {0.25, 0.5, 0.75}) {
    const long long m = 500;
    EXPECT_DOUBLE_EQ(iapam_cycles(m, p, 0.0, 3) - rpam_cycles(m, p, 3), 12.0 * m);
  }
}

TEST(Validation, SkipPenaltyRange) {
  EXPECT_THROW((void)rpam_cycles(10, 0.5, 0), std::invalid_argument);
  EXPECT_THROW((void)rpam_cycles(10, 0.5, 4), std::invalid_argument);
  EXPECT_THROW((void)iapam_cycles(10, 0.5, 0.2, 5), std::invalid_argument);
}

}  // namespace
}  // namespace macp
