#pragma once

#include <stdexcept>

namespace macp {

// Cycle-count model for the first-layer MAC loop: expected (average) counts
// over the Bernoulli masks, so RPAM/IaPAM results are real-valued.

[[nodiscard]] inline long long baseline_cycles(long long m) {
  if (m < 1) throw std::invalid_argument("M must be at least 1");
  return 6 * m;
}

[[nodiscard]] inline double rpam_cycles(long long m, double p, int d) {
  if (m < 1) throw std::invalid_argument("M must be at least 1");
  if (d < 1 || d > 3) throw std::invalid_argument("pipeline depth D must be 1..3");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p outside [0,1]");
  return ((8.0 + d) * p + 1.0) * static_cast<double>(m);
}

[[nodiscard]] inline double iapam_cycles(long long m, double p, double q, int d) {
  if (m < 1) throw std::invalid_argument("M must be at least 1");
  if (d < 1 || d > 3) throw std::invalid_argument("pipeline depth D must be 1..3");
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("p or q outside [0,1]");
  if (q > p) throw std::invalid_argument("q exceeds p");
  return ((8.0 + d) * p + 13.0 - 8.0 * q) * static_cast<double>(m);
}

// RPAM beats the 6M baseline exactly when p < 5/(8+D).
[[nodiscard]] inline double breakeven_p(int d) {
  if (d < 1 || d > 3) throw std::invalid_argument("pipeline depth D must be 1..3");
  return 5.0 / (8.0 + d);
}

}  // namespace macp
