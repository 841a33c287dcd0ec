#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"

namespace macp {

struct ActivationMask {
  std::vector<std::uint8_t> active;  // 1 = keep
  Dims dims;

  [[nodiscard]] bool is_active(int pixel) const { return active[pixel] != 0; }
  [[nodiscard]] int active_count() const {
    int n = 0;
    for (std::uint8_t a : active) n += a;
    return n;
  }
};

[[nodiscard]] inline ActivationMask all_active_mask(Dims dims) {
  return {std::vector<std::uint8_t>(dims.pixel_count(), 1), dims};
}

struct RpamConfig {
  double p = 1.0;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p outside [0,1]");
  }
};

struct IapamConfig {
  double p = 1.0;
  double q = 0.0;
  std::vector<std::uint8_t> critical;  // 1 = always active
  Dims dims;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p outside [0,1]");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q outside [0,1]");
    if (q > p) throw std::invalid_argument("q exceeds p");
    if (static_cast<int>(critical.size()) != dims.pixel_count())
      throw std::invalid_argument("critical map does not match dims");
  }
};

// (p - q) / (1 - q); the activation rate of non-critical pixels.
[[nodiscard]] inline double effective_rate(double p, double q) {
  if (q > p) throw std::invalid_argument("q exceeds p");
  if (p >= 1.0) return 1.0;
  return (p - q) / (1.0 - q);
}

[[nodiscard]] inline double effective_rate(const IapamConfig& cfg) {
  return effective_rate(cfg.p, cfg.q);
}

[[nodiscard]] inline ActivationMask sample_rpam(Dims dims, const RpamConfig& cfg,
                                                std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  ActivationMask mask{std::vector<std::uint8_t>(dims.pixel_count()), dims};
  for (auto& a : mask.active) {
    if (cfg.p >= 1.0) a = 1;
    else if (cfg.p <= 0.0) a = 0;
    else a = rng.bernoulli(cfg.p) ? 1 : 0;
  }
  return mask;
}

[[nodiscard]] inline ActivationMask sample_iapam(const IapamConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  const double rate = effective_rate(cfg);
  ActivationMask mask{std::vector<std::uint8_t>(cfg.dims.pixel_count()), cfg.dims};
  for (int i = 0; i < cfg.dims.pixel_count(); ++i) {
    if (cfg.critical[i]) mask.active[i] = 1;
    else if (rate >= 1.0) mask.active[i] = 1;
    else if (rate <= 0.0) mask.active[i] = 0;
    else mask.active[i] = rng.bernoulli(rate) ? 1 : 0;
  }
  return mask;
}

[[nodiscard]] inline MacExecution run_macs(const QuantizedFirstLayer& layer,
                                           const InputVector& input,
                                           const ActivationMask& mask) {
  if (!(mask.dims == layer.dims)) throw std::invalid_argument("mask dims mismatch layer dims");
  return detail::run_macs_impl(layer, input, [&](int px) { return mask.is_active(px); });
}

}  // namespace macp
