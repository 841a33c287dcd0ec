#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace macp {

struct Dims {
  int height = 1;
  int width = 1;
  int channels = 1;

  [[nodiscard]] int pixel_count() const { return height * width * channels; }
  [[nodiscard]] bool operator==(const Dims&) const = default;
};

// Ordered first-layer weights defining the MAC execution sequence.
struct QuantizedFirstLayer {
  std::vector<std::int8_t> weights;      // MAC execution order, length M
  std::vector<int> pixel_binding;        // MAC index -> flattened pixel index
  Dims dims;

  [[nodiscard]] int mac_count() const { return static_cast<int>(weights.size()); }

  void validate() const {
    if (weights.empty()) throw std::invalid_argument("layer needs at least one MAC");
    if (weights.size() != pixel_binding.size())
      throw std::invalid_argument("weights and pixel_binding lengths differ");
    for (int px : pixel_binding)
      if (px < 0 || px >= dims.pixel_count())
        throw std::invalid_argument("pixel binding out of range");
  }
};

// Identity binding: MAC j reads pixel j of a 1 x M x 1 input.
[[nodiscard]] inline QuantizedFirstLayer make_chain_layer(std::vector<std::int8_t> weights) {
  QuantizedFirstLayer layer;
  const int m = static_cast<int>(weights.size());
  layer.weights = std::move(weights);
  layer.pixel_binding.resize(m);
  for (int j = 0; j < m; ++j) layer.pixel_binding[j] = j;
  layer.dims = {1, m, 1};
  layer.validate();
  return layer;
}

struct InputVector {
  std::vector<std::uint8_t> pixels;  // flattened, same order as pixel_binding
};

struct MacExecution {
  std::vector<int> executed;              // original MAC indices that ran, increasing
  std::vector<std::int32_t> accumulators; // running sum after each executed MAC
};

struct ActivationMask;  // defined in pam.hpp

[[nodiscard]] inline int hamming_weight(std::int32_t v) {
  return std::popcount(static_cast<std::uint32_t>(v));
}

// Wrapping 32-bit accumulate of the sign-extended u8 x s8 product.
[[nodiscard]] inline std::int32_t mac_step(std::int32_t acc, std::uint8_t input, std::int8_t weight) {
  const std::int64_t product = static_cast<std::int64_t>(input) * static_cast<std::int64_t>(weight);
  const std::uint32_t wrapped = static_cast<std::uint32_t>(acc) + static_cast<std::uint32_t>(product);
  return static_cast<std::int32_t>(wrapped);
}

namespace detail {

template <typename IsActive>
[[nodiscard]] MacExecution run_macs_impl(const QuantizedFirstLayer& layer,
                                         const InputVector& input, IsActive&& active) {
  layer.validate();
  if (static_cast<int>(input.pixels.size()) != layer.dims.pixel_count())
    throw std::invalid_argument("input length does not match layer dims");
  MacExecution exec;
  std::int32_t acc = 0;
  for (int j = 0; j < layer.mac_count(); ++j) {
    const int px = layer.pixel_binding[j];
    if (!active(px)) continue;
    acc = mac_step(acc, input.pixels[px], layer.weights[j]);
    exec.executed.push_back(j);
    exec.accumulators.push_back(acc);
  }
  return exec;
}

}  // namespace detail

// Partition of signed 8-bit weights by the map i -> HW(sign-extended i*w).
struct AliasingCensus {
  int aliased_count = 0;                       // weights whose class size > 1
  std::vector<std::vector<int>> classes;       // weight values, each class sorted
};

[[nodiscard]] inline AliasingCensus aliasing_census() {
  std::map<std::vector<int>, std::vector<int>> groups;
  for (int w = -128; w <= 127; ++w) {
    std::vector<int> profile(256);
    for (int i = 0; i < 256; ++i)
      profile[i] = hamming_weight(static_cast<std::int32_t>(i * w));
    groups[std::move(profile)].push_back(w);
  }
  AliasingCensus census;
  for (auto& [profile, members] : groups) {
    if (members.size() > 1) census.aliased_count += static_cast<int>(members.size());
    census.classes.push_back(std::move(members));
  }
  std::sort(census.classes.begin(), census.classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return census;
}

}  // namespace macp
