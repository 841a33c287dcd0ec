#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"

namespace macp {

namespace detail {

// floor(p*j) with a tolerance so grid probabilities such as 0.3*10 land on
// the mathematical value despite binary rounding.
[[nodiscard]] inline int floor_pj(double p, int j) {
  return static_cast<int>(std::floor(p * j + 1e-9));
}

[[nodiscard]] inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// p * max(p, 1-p)^(j-1): the largest single-sequence trace mass.
[[nodiscard]] inline double max_leak_proportion(double p, int j) {
  if (!(p > 0.0 && p <= 1.0) || j < 1) throw std::invalid_argument("invalid (p, j)");
  if (p >= 1.0) return 1.0;
  return p * std::pow(std::max(p, 1.0 - p), j - 1);
}

// p^-2 * max(p, 1-p)^(-2(j-1)).
[[nodiscard]] inline double theoretical_R(double p, int j) {
  if (!(p > 0.0 && p <= 1.0) || j < 1) throw std::invalid_argument("invalid (p, j)");
  const double leak = max_leak_proportion(p, j);
  return 1.0 / (leak * leak);
}

[[nodiscard]] inline double log_adaptive_leak(double p, int j) {
  const int k = detail::floor_pj(p, j);
  return detail::log_choose(j - 1, k) + (k + 1) * std::log(p) + (j - k - 1) * std::log1p(-p);
}

// C(j-1, floor(pj)) * p^(floor(pj)+1) * (1-p)^(j-floor(pj)-1): the aggregated
// mass an adaptive attacker can combine at the best slot.
[[nodiscard]] inline double adaptive_leak_proportion(double p, int j) {
  if (!(p > 0.0 && p <= 1.0) || j < 1) throw std::invalid_argument("invalid (p, j)");
  if (p >= 1.0) return 1.0;
  return std::exp(log_adaptive_leak(p, j));
}

[[nodiscard]] inline double adaptive_R(double p, int j) {
  if (!(p > 0.0 && p <= 1.0) || j < 1) throw std::invalid_argument("invalid (p, j)");
  if (p >= 1.0) return 1.0;  // no defense
  return std::exp(-2.0 * log_adaptive_leak(p, j));
}

enum class StrengthMode { basic, adaptive };

// Smallest j with R(p, j) >= threshold; exact integer scan in log space.
[[nodiscard]] inline int j_star(double p, double threshold, StrengthMode mode) {
  if (!(threshold > 1.0)) throw std::invalid_argument("threshold must exceed 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  const double log_thresh = std::log(threshold);
  for (int j = 1; j <= 1'000'000; ++j) {
    double log_R;
    if (mode == StrengthMode::basic)
      log_R = -2.0 * (std::log(p) + (j - 1) * std::log(std::max(p, 1.0 - p)));
    else
      log_R = -2.0 * log_adaptive_leak(p, j);
    if (log_R >= log_thresh) return j;
  }
  throw std::runtime_error("j_star scan did not converge");
}

// Per-position masses from exhaustive enumeration of all 2^(j-1) prefix masks.
struct LeakProfile {
  std::vector<double> per_sequence_max;  // index k-1 for position k in [1..j]
  std::vector<double> aggregated;
  double max_per_sequence = 0.0;
  double max_aggregated = 0.0;
  std::vector<int> argmax_positions;  // aggregated argmax; two entries on exact ties
};

[[nodiscard]] inline LeakProfile bruteforce_leak_oracle(double p, int j) {
  if (j < 1 || j > 20) throw std::invalid_argument("oracle limited to 1 <= j <= 20");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("invalid p");
  LeakProfile profile;
  profile.per_sequence_max.assign(j, 0.0);
  profile.aggregated.assign(j, 0.0);
  const std::uint32_t prefix_masks = 1u << (j - 1);
  for (std::uint32_t mask = 0; mask < prefix_masks; ++mask) {
    const int active_prefix = std::popcount(mask);
    const int k = active_prefix + 1;  // slot position of MAC j for this mask
    const double mass =
        std::pow(p, active_prefix + 1) * std::pow(1.0 - p, j - 1 - active_prefix);
    profile.per_sequence_max[k - 1] = std::max(profile.per_sequence_max[k - 1], mass);
    profile.aggregated[k - 1] += mass;
  }
  for (int k = 1; k <= j; ++k) {
    profile.max_per_sequence = std::max(profile.max_per_sequence, profile.per_sequence_max[k - 1]);
    profile.max_aggregated = std::max(profile.max_aggregated, profile.aggregated[k - 1]);
  }
  constexpr double kTieRel = 1e-12;
  for (int k = 1; k <= j; ++k)
    if (profile.aggregated[k - 1] >= profile.max_aggregated * (1.0 - kTieRel))
      profile.argmax_positions.push_back(k);
  return profile;
}

// Cosine similarity between the true layer's per-sample outputs and a
// surrogate that knows only the first known_fraction of the weights.
[[nodiscard]] inline double partial_recovery_similarity(const QuantizedFirstLayer& layer,
                                                        double known_fraction,
                                                        const std::vector<InputVector>& samples,
                                                        std::uint64_t rng_seed) {
  layer.validate();
  if (!(known_fraction >= 0.0 && known_fraction <= 1.0))
    throw std::invalid_argument("known_fraction outside [0,1]");
  if (samples.empty()) throw std::invalid_argument("empty sample set");
  const int m = layer.mac_count();
  const int known = static_cast<int>(std::floor(known_fraction * m + 1e-9));
  Rng rng(rng_seed);
  std::vector<std::int8_t> surrogate(layer.weights);
  for (int kk = known; kk < m; ++kk)
    surrogate[kk] = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
  // Exact integer accumulation so perfectly colinear outputs (e.g. the fully
  // known layer) report 1.0 exactly instead of 1.0 +- an ulp.
  __int128 dot = 0, norm_true = 0, norm_sur = 0;
  for (const InputVector& input : samples) {
    if (static_cast<int>(input.pixels.size()) != layer.dims.pixel_count())
      throw std::invalid_argument("sample does not match layer dims");
    std::int64_t y_true = 0, y_sur = 0;
    for (int k = 0; k < m; ++k) {
      const int px = layer.pixel_binding[k];
      y_true += static_cast<std::int64_t>(input.pixels[px]) * layer.weights[k];
      y_sur += static_cast<std::int64_t>(input.pixels[px]) * surrogate[k];
    }
    dot += static_cast<__int128>(y_true) * y_sur;
    norm_true += static_cast<__int128>(y_true) * y_true;
    norm_sur += static_cast<__int128>(y_sur) * y_sur;
  }
  if (norm_true == 0 || norm_sur == 0) return 0.0;
  if (dot * dot == norm_true * norm_sur) return dot > 0 ? 1.0 : -1.0;
  return static_cast<double>(dot) /
         std::sqrt(static_cast<double>(norm_true) * static_cast<double>(norm_sur));
}

}  // namespace macp
