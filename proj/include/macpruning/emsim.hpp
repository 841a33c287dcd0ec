#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "macpruning/pam.hpp"
#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"

namespace macp {

// Linear leakage model l = eps * HW(accumulator) + Normal(c, sigma^2).
struct LeakageParams {
  double epsilon = 1.0;
  double c = 0.0;
  double sigma = 4.0;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  }
};

struct EmTrace {
  std::vector<float> samples;
  std::uint64_t seed = 0;
  int executed_count = 0;
};

// One sample per MAC time slot; pruned MACs compress the timeline so later
// leakage shifts earlier; slots past the executed count are pure noise.
[[nodiscard]] inline EmTrace synthesize_trace(const MacExecution& exec,
                                              const LeakageParams& params, int trace_len,
                                              std::uint64_t rng_seed) {
  params.validate();
  const int executed = static_cast<int>(exec.accumulators.size());
  if (trace_len < executed) throw std::invalid_argument("trace_len shorter than executed MACs");
  Rng rng(rng_seed);
  EmTrace trace;
  trace.seed = rng_seed;
  trace.executed_count = executed;
  trace.samples.resize(trace_len);
  for (int t = 0; t < trace_len; ++t) {
    double value = rng.normal(params.c, params.sigma);
    if (t < executed) value += params.epsilon * hamming_weight(exec.accumulators[t]);
    trace.samples[t] = static_cast<float>(value);
  }
  return trace;
}

struct TraceSet {
  int trace_len = 0;
  std::vector<float> samples;  // row-major, n x trace_len

  [[nodiscard]] int size() const {
    return trace_len == 0 ? 0 : static_cast<int>(samples.size()) / trace_len;
  }
  [[nodiscard]] const float* trace(int i) const { return samples.data() + static_cast<std::size_t>(i) * trace_len; }
  [[nodiscard]] float at(int i, int t) const { return trace(i)[t]; }
};

struct DefenseSpec {
  enum class Kind { none, rpam, iapam };
  Kind kind = Kind::none;
  double p = 1.0;
  double q = 0.0;
  std::vector<std::uint8_t> critical;  // iapam only

  [[nodiscard]] static DefenseSpec unprotected() { return {}; }
  [[nodiscard]] static DefenseSpec rpam(double p) { return {Kind::rpam, p, 0.0, {}}; }
  [[nodiscard]] static DefenseSpec iapam(double p, double q, std::vector<std::uint8_t> critical) {
    return {Kind::iapam, p, q, std::move(critical)};
  }
};

struct SimulatedSet {
  TraceSet traces;
  std::vector<std::uint8_t> inputs;  // row-major, n x pixel_count
  std::vector<int> executed_counts;
  int pixel_count = 0;

  [[nodiscard]] const std::uint8_t* input(int i) const {
    return inputs.data() + static_cast<std::size_t>(i) * pixel_count;
  }
};

// Per-trace draw order (documented for reproducibility): inputs, then mask,
// then noise column by column. Trace i uses derive_seed(base_seed, i), so the
// set is identical no matter how synthesis is scheduled.
[[nodiscard]] inline SimulatedSet simulate_set(const QuantizedFirstLayer& layer,
                                               const DefenseSpec& defense,
                                               const LeakageParams& params, int n_traces,
                                               int trace_len, std::uint64_t base_seed) {
  layer.validate();
  params.validate();
  if (trace_len < layer.mac_count())
    throw std::invalid_argument("trace_len shorter than MAC count");
  const int pixels = layer.dims.pixel_count();
  SimulatedSet set;
  set.pixel_count = pixels;
  set.traces.trace_len = trace_len;
  set.traces.samples.resize(static_cast<std::size_t>(n_traces) * trace_len);
  set.inputs.resize(static_cast<std::size_t>(n_traces) * pixels);
  set.executed_counts.resize(n_traces);

  IapamConfig iapam_cfg;
  if (defense.kind == DefenseSpec::Kind::iapam) {
    iapam_cfg = {defense.p, defense.q, defense.critical, layer.dims};
    iapam_cfg.validate();
  }

  InputVector input;
  input.pixels.resize(pixels);
  ActivationMask mask{std::vector<std::uint8_t>(pixels, 1), layer.dims};
  for (int i = 0; i < n_traces; ++i) {
    Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    for (int px = 0; px < pixels; ++px) {
      input.pixels[px] = rng.uniform_u8();
      set.inputs[static_cast<std::size_t>(i) * pixels + px] = input.pixels[px];
    }
    switch (defense.kind) {
      case DefenseSpec::Kind::none:
        break;  // mask stays all-active
      case DefenseSpec::Kind::rpam:
        for (int px = 0; px < pixels; ++px)
          mask.active[px] = defense.p >= 1.0 ? 1 : (rng.bernoulli(defense.p) ? 1 : 0);
        break;
      case DefenseSpec::Kind::iapam: {
        const double rate = effective_rate(iapam_cfg);
        for (int px = 0; px < pixels; ++px) {
          if (iapam_cfg.critical[px]) mask.active[px] = 1;
          else if (rate >= 1.0) mask.active[px] = 1;
          else if (rate <= 0.0) mask.active[px] = 0;
          else mask.active[px] = rng.bernoulli(rate) ? 1 : 0;
        }
        break;
      }
    }
    const MacExecution exec = run_macs(layer, input, mask);
    const int executed = static_cast<int>(exec.accumulators.size());
    set.executed_counts[i] = executed;
    float* out = set.traces.samples.data() + static_cast<std::size_t>(i) * trace_len;
    for (int t = 0; t < trace_len; ++t) {
      double value = rng.normal(params.c, params.sigma);
      if (t < executed) value += params.epsilon * hamming_weight(exec.accumulators[t]);
      out[t] = static_cast<float>(value);
    }
  }
  return set;
}

struct SlotFit {
  double eps_hat = 0.0;
  double sigma2_hat = 0.0;
  double var_v = 0.0;
  bool defined = false;
};

// Least-squares fit l = eps * v + r at one slot.
[[nodiscard]] inline SlotFit fit_slot(const TraceSet& traces, int slot,
                                      const std::vector<double>& v) {
  const int n = traces.size();
  if (static_cast<int>(v.size()) != n) throw std::invalid_argument("value vector length mismatch");
  double sv = 0.0, svv = 0.0, sl = 0.0, sll = 0.0, svl = 0.0;
  for (int i = 0; i < n; ++i) {
    const double vi = v[i];
    const double li = traces.at(i, slot);
    sv += vi;
    svv += vi * vi;
    sl += li;
    sll += li * li;
    svl += vi * li;
  }
  SlotFit fit;
  fit.var_v = (svv - sv * sv / n) / n;
  if (fit.var_v <= 0.0) return fit;  // constant hypothesis: undefined
  const double cov = (svl - sv * sl / n) / n;
  const double var_l = (sll - sl * sl / n) / n;
  fit.eps_hat = cov / fit.var_v;
  fit.sigma2_hat = var_l - fit.eps_hat * fit.eps_hat * fit.var_v;
  if (fit.sigma2_hat < 0.0) fit.sigma2_hat = 0.0;
  fit.defined = true;
  return fit;
}

struct SnrProfile {
  std::vector<double> signal_var;
  std::vector<double> noise_var;
  std::vector<double> snr;
  std::vector<std::uint8_t> defined;
};

// per_slot_values[t] holds the per-trace hypothetical values for slot t; an
// empty vector marks the slot as not examined (reported undefined).
[[nodiscard]] inline SnrProfile snr_profile(const TraceSet& traces,
                                            const std::vector<std::vector<double>>& per_slot_values) {
  if (traces.size() < 100) throw std::invalid_argument("snr_profile needs at least 100 traces");
  if (static_cast<int>(per_slot_values.size()) != traces.trace_len)
    throw std::invalid_argument("per-slot values length mismatch");
  SnrProfile profile;
  const int len = traces.trace_len;
  profile.signal_var.assign(len, 0.0);
  profile.noise_var.assign(len, 0.0);
  profile.snr.assign(len, 0.0);
  profile.defined.assign(len, 0);
  for (int t = 0; t < len; ++t) {
    if (per_slot_values[t].empty()) continue;
    const SlotFit fit = fit_slot(traces, t, per_slot_values[t]);
    if (!fit.defined || fit.sigma2_hat <= 0.0) continue;
    profile.signal_var[t] = fit.eps_hat * fit.eps_hat * fit.var_v;
    profile.noise_var[t] = fit.sigma2_hat;
    profile.snr[t] = profile.signal_var[t] / profile.noise_var[t];
    profile.defined[t] = 1;
  }
  return profile;
}

// argmax of |snr| over the window; ties resolve to the lowest index.
[[nodiscard]] inline int strongest_point(const SnrProfile& profile,
                                         const std::vector<int>& window) {
  if (window.empty()) throw std::invalid_argument("empty window");
  int best = -1;
  double best_snr = -1.0;
  for (int t : window) {
    if (t < 0 || t >= static_cast<int>(profile.snr.size()) || !profile.defined[t]) continue;
    const double s = std::abs(profile.snr[t]);
    if (s > best_snr) {
      best_snr = s;
      best = t;
    }
  }
  if (best < 0) throw std::invalid_argument("window has no defined slots");
  return best;
}

}  // namespace macp
