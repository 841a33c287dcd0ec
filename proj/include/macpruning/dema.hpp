#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "macpruning/emsim.hpp"
#include "macpruning/qinference.hpp"

namespace macp {

[[nodiscard]] inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson needs equal lengths >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  if (vx <= 0.0 || vy <= 0.0) throw std::domain_error("pearson undefined: zero variance");
  return (sxy - sx * sy / n) / std::sqrt(vx * vy);
}

// Success rule: the leader's |corr| must clear a multiple-testing noise
// ceiling (1+margin) * z / sqrt(n), hold for `stability` consecutive
// trace-count steps when scanning, and be confirmed on both trace halves.
struct DecisionRule {
  int step = 100;
  int stability = 3;
  double margin = 0.05;
  double z = 4.0;

  [[nodiscard]] double ceiling(int n) const {
    return (1.0 + margin) * z / std::sqrt(static_cast<double>(n));
  }
};

struct CandidateSet {
  std::vector<int> candidates;  // signed weight values
};

struct PositionOutcome {
  int position = 0;     // 1-based MAC index j
  int weight = 0;       // recovered value (valid when success)
  int slot = 0;         // best slot
  double corr = 0.0;    // |corr| at the best slot
  bool success = false;
};

struct AttackResult {
  CandidateSet position1;  // aliasing class found at j=1
  std::vector<PositionOutcome> recovered;
  int traces_used = 0;

  [[nodiscard]] int successful_positions() const {
    int n = 0;
    for (const auto& r : recovered) n += r.success ? 1 : 0;
    return n;
  }
};

namespace detail {

// Wrapped 32-bit sums over the resolved prefix weights w_1..w_{j-1}.
[[nodiscard]] inline std::vector<std::int32_t> prefix_sums(const SimulatedSet& set,
                                                           const std::vector<int>& prior) {
  const int n = set.traces.size();
  std::vector<std::int32_t> pre(n, 0);
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* in = set.input(i);
    std::int32_t acc = 0;
    for (std::size_t k = 0; k < prior.size(); ++k)
      acc = mac_step(acc, in[k], static_cast<std::int8_t>(prior[k]));
    pre[i] = acc;
  }
  return pre;
}

struct CorrAccum {
  std::array<double, 256> sh{}, shh{}, sht{};
  double st = 0.0, stt = 0.0;
  int n = 0;

  void add(const CorrAccum& o) {
    for (int w = 0; w < 256; ++w) {
      sh[w] += o.sh[w];
      shh[w] += o.shh[w];
      sht[w] += o.sht[w];
    }
    st += o.st;
    stt += o.stt;
    n += o.n;
  }
};

// Accumulate candidate-hypothesis statistics at one slot over traces [a, b).
inline void accumulate_slot(const SimulatedSet& set, const std::vector<std::int32_t>& pre,
                            int position, int slot, int a, int b, CorrAccum& acc) {
  for (int i = a; i < b; ++i) {
    const double t = set.traces.at(i, slot);
    const std::uint8_t x = set.input(i)[position - 1];
    const std::int32_t base = pre[i];
    acc.st += t;
    acc.stt += t * t;
    for (int w = -128; w <= 127; ++w) {
      const double h = hamming_weight(mac_step(base, x, static_cast<std::int8_t>(w)));
      const int idx = w + 128;
      acc.sh[idx] += h;
      acc.shh[idx] += h * h;
      acc.sht[idx] += h * t;
    }
  }
  acc.n += b - a;
}

// Signed correlations per candidate; NaN marks undefined (constant hypothesis).
[[nodiscard]] inline std::array<double, 256> corrs_from(const CorrAccum& acc) {
  std::array<double, 256> corr;
  const double n = acc.n;
  const double vt = acc.stt - acc.st * acc.st / n;
  for (int idx = 0; idx < 256; ++idx) {
    const double vh = acc.shh[idx] - acc.sh[idx] * acc.sh[idx] / n;
    if (vh <= 0.0 || vt <= 0.0) {
      corr[idx] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double cov = acc.sht[idx] - acc.sh[idx] * acc.st / n;
    corr[idx] = cov / std::sqrt(vh * vt);
  }
  return corr;
}

[[nodiscard]] inline int argmax_abs(const std::array<double, 256>& corr) {
  int best = -1;
  double best_abs = -1.0;
  for (int idx = 0; idx < 256; ++idx) {
    if (std::isnan(corr[idx])) continue;
    const double a = std::abs(corr[idx]);
    if (a > best_abs) {
      best_abs = a;
      best = idx;
    }
  }
  return best;
}

}  // namespace detail

struct RankedCandidate {
  int weight = 0;
  int slot = 0;
  double abs_corr = 0.0;
};

// Rank all 256 candidates for position j by max |pearson| over the window,
// with hypotheses HW(prefix + w * x_j). Undefined slots are skipped; a
// candidate undefined everywhere is left out of the ranking.
[[nodiscard]] inline std::vector<RankedCandidate> cpa_rank(const SimulatedSet& set,
                                                           const std::vector<int>& prior,
                                                           int position,
                                                           const std::vector<int>& window) {
  if (static_cast<int>(prior.size()) != position - 1)
    throw std::invalid_argument("prior length must be position-1");
  const int n = set.traces.size();
  if (n < 2) throw std::invalid_argument("need at least 2 traces");
  for (int slot : window)
    if (slot < 0 || slot >= set.traces.trace_len) throw std::invalid_argument("window outside trace");
  const auto pre = detail::prefix_sums(set, prior);
  std::array<double, 256> best_abs;
  std::array<int, 256> best_slot;
  best_abs.fill(-1.0);
  best_slot.fill(-1);
  for (int slot : window) {
    detail::CorrAccum acc;
    detail::accumulate_slot(set, pre, position, slot, 0, n, acc);
    const auto corr = detail::corrs_from(acc);
    for (int idx = 0; idx < 256; ++idx) {
      if (std::isnan(corr[idx])) continue;
      const double a = std::abs(corr[idx]);
      if (a > best_abs[idx]) {
        best_abs[idx] = a;
        best_slot[idx] = slot;
      }
    }
  }
  std::vector<RankedCandidate> ranked;
  for (int idx = 0; idx < 256; ++idx)
    if (best_slot[idx] >= 0) ranked.push_back({idx - 128, best_slot[idx], best_abs[idx]});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     return a.abs_corr > b.abs_corr;
                   });
  return ranked;
}

// Position-1 aliasing class: every candidate within `tolerance` (relative) of
// the top correlation. Doubling chains make near-perfect CPA twins, so j=1
// yields a set that step 2 resolves jointly.
[[nodiscard]] inline CandidateSet candidate_set_position1(const SimulatedSet& set,
                                                          const std::vector<int>& window,
                                                          double tolerance) {
  const auto ranked = cpa_rank(set, {}, 1, window);
  CandidateSet out;
  if (ranked.empty()) return out;
  const double floor_corr = ranked.front().abs_corr * (1.0 - tolerance);
  for (const auto& r : ranked)
    if (r.abs_corr >= floor_corr) out.candidates.push_back(r.weight);
  std::sort(out.candidates.begin(), out.candidates.end());
  return out;
}

struct PairOutcome {
  int w1 = 0;
  int w2 = 0;
  int slot = 0;
  double abs_corr = 0.0;
  bool success = false;
};

// Step 2 of the attack: rank (w1 in candidate set, w2 in all 256) pairs by
// |corr| of HW(w1*x_1 + w2*x_2); confirms w1 and resolves w2 together.
[[nodiscard]] inline PairOutcome joint_rank_step2(const SimulatedSet& set,
                                                  const CandidateSet& w1_candidates,
                                                  const std::vector<int>& window,
                                                  const DecisionRule& rule) {
  const int n = set.traces.size();
  PairOutcome best;
  PairOutcome best_lo, best_hi;  // split halves, for the confirmation gate
  const int half = n / 2;
  for (int w1 : w1_candidates.candidates) {
    const std::vector<int> prior{w1};
    const auto pre = detail::prefix_sums(set, prior);
    for (int slot : window) {
      detail::CorrAccum lo, hi;
      detail::accumulate_slot(set, pre, 2, slot, 0, half, lo);
      detail::accumulate_slot(set, pre, 2, slot, half, n, hi);
      detail::CorrAccum full = lo;
      full.add(hi);
      const auto corr = detail::corrs_from(full);
      const auto corr_lo = detail::corrs_from(lo);
      const auto corr_hi = detail::corrs_from(hi);
      for (int idx = 0; idx < 256; ++idx) {
        if (!std::isnan(corr[idx]) && std::abs(corr[idx]) > best.abs_corr)
          best = {w1, idx - 128, slot, std::abs(corr[idx]), false};
        if (!std::isnan(corr_lo[idx]) && std::abs(corr_lo[idx]) > best_lo.abs_corr)
          best_lo = {w1, idx - 128, slot, std::abs(corr_lo[idx]), false};
        if (!std::isnan(corr_hi[idx]) && std::abs(corr_hi[idx]) > best_hi.abs_corr)
          best_hi = {w1, idx - 128, slot, std::abs(corr_hi[idx]), false};
      }
    }
  }
  best.success = best.abs_corr >= rule.ceiling(n) && best_lo.w1 == best.w1 &&
                 best_lo.w2 == best.w2 && best_hi.w1 == best.w1 && best_hi.w2 == best.w2;
  return best;
}

// Single-position attack given a resolved prefix: leader must clear the noise
// ceiling and both trace halves must agree on the same leader.
[[nodiscard]] inline PositionOutcome attack_position(const SimulatedSet& set,
                                                     const std::vector<int>& prior, int position,
                                                     const std::vector<int>& window,
                                                     const DecisionRule& rule) {
  const int n = set.traces.size();
  const auto pre = detail::prefix_sums(set, prior);
  PositionOutcome out;
  out.position = position;
  double best_abs = -1.0;
  int best_idx = -1, best_slot_v = -1;
  int lo_idx = -1, hi_idx = -1;
  double lo_abs = -1.0, hi_abs = -1.0;
  const int half = n / 2;
  for (int slot : window) {
    detail::CorrAccum lo, hi;
    detail::accumulate_slot(set, pre, position, slot, 0, half, lo);
    detail::accumulate_slot(set, pre, position, slot, half, n, hi);
    detail::CorrAccum full = lo;
    full.add(hi);
    const auto corr = detail::corrs_from(full);
    const auto corr_lo = detail::corrs_from(lo);
    const auto corr_hi = detail::corrs_from(hi);
    for (int idx = 0; idx < 256; ++idx) {
      if (!std::isnan(corr[idx]) && std::abs(corr[idx]) > best_abs) {
        best_abs = std::abs(corr[idx]);
        best_idx = idx;
        best_slot_v = slot;
      }
      if (!std::isnan(corr_lo[idx]) && std::abs(corr_lo[idx]) > lo_abs) {
        lo_abs = std::abs(corr_lo[idx]);
        lo_idx = idx;
      }
      if (!std::isnan(corr_hi[idx]) && std::abs(corr_hi[idx]) > hi_abs) {
        hi_abs = std::abs(corr_hi[idx]);
        hi_idx = idx;
      }
    }
  }
  if (best_idx < 0) return out;
  out.weight = best_idx - 128;
  out.slot = best_slot_v;
  out.corr = best_abs;
  out.success = best_abs >= rule.ceiling(n) && lo_idx == best_idx && hi_idx == best_idx;
  return out;
}

// Windows: a fully populated timeline (no pruning) localizes MAC j at slot
// j-1 and scanning other slots only invites prefix ghosts; pruned sets are
// scanned across all slots (the attacker cannot know the schedule).
[[nodiscard]] inline std::vector<int> attack_window(const SimulatedSet& set, int position) {
  bool full = true;
  for (int c : set.executed_counts)
    if (c != set.pixel_count) {
      full = false;
      break;
    }
  if (full) return {position - 1};
  std::vector<int> all(set.traces.trace_len);
  for (int t = 0; t < set.traces.trace_len; ++t) all[t] = t;
  return all;
}

// Sequential attack: position 1 yields an aliasing candidate set, position 2
// resolves (w1, w2) jointly, later positions proceed singly; stops at the
// first position whose confidence check fails.
[[nodiscard]] inline AttackResult recover_sequential(const SimulatedSet& set, int j_max,
                                                     const DecisionRule& rule) {
  AttackResult result;
  result.traces_used = set.traces.size();
  if (j_max < 1 || j_max > set.pixel_count) throw std::invalid_argument("j_max outside layer");
  if (result.traces_used == 0) {
    PositionOutcome fail;
    fail.position = 1;
    result.recovered.push_back(fail);
    return result;
  }
  result.position1 = candidate_set_position1(set, attack_window(set, 1), rule.margin);
  if (result.position1.candidates.empty()) {
    PositionOutcome fail;
    fail.position = 1;
    result.recovered.push_back(fail);
    return result;
  }
  std::vector<int> resolved;
  if (j_max >= 2) {
    const PairOutcome pair = joint_rank_step2(set, result.position1, attack_window(set, 2), rule);
    PositionOutcome p1{1, pair.w1, 0, pair.abs_corr, pair.success};
    PositionOutcome p2{2, pair.w2, pair.slot, pair.abs_corr, pair.success};
    result.recovered.push_back(p1);
    result.recovered.push_back(p2);
    if (!pair.success) return result;
    resolved = {pair.w1, pair.w2};
  } else {
    // j_max == 1: report the aliasing set's top candidate without confirmation.
    PositionOutcome p1{1, result.position1.candidates.front(), 0, 0.0,
                       result.position1.candidates.size() == 1};
    result.recovered.push_back(p1);
    return result;
  }
  for (int j = 3; j <= j_max; ++j) {
    const PositionOutcome outcome =
        attack_position(set, resolved, j, attack_window(set, j), rule);
    result.recovered.push_back(outcome);
    if (!outcome.success) break;
    resolved.push_back(outcome.weight);
  }
  return result;
}

// Truth-aware trace-count-to-success: smallest n (multiple of step) at which
// the correct weight is top-ranked and stays top-ranked for `stability`
// consecutive steps, evaluated with the true prefix at slot j-1. Returns
// -cap if the streak never completes within cap traces.
[[nodiscard]] inline long long min_traces_to_success(const SimulatedSet& set,
                                                     const std::vector<int>& true_weights,
                                                     int position, const DecisionRule& rule,
                                                     int step, long long cap) {
  if (step < 1) throw std::invalid_argument("step must be >= 1");
  const int n_avail = set.traces.size();
  const long long limit = std::min<long long>(cap, n_avail);
  const std::vector<int> prior(true_weights.begin(), true_weights.begin() + position - 1);
  const int true_idx = true_weights[position - 1] + 128;
  const int slot = position - 1;
  const auto pre = detail::prefix_sums(set, prior);
  detail::CorrAccum acc;
  int streak = 0;
  for (long long n = step; n <= limit; n += step) {
    detail::accumulate_slot(set, pre, position, slot, acc.n, static_cast<int>(n), acc);
    const auto corr = detail::corrs_from(acc);
    const int lead = detail::argmax_abs(corr);
    streak = (lead == true_idx) ? streak + 1 : 0;
    if (streak >= rule.stability) return n - static_cast<long long>(rule.stability - 1) * step;
  }
  return -cap;
}

// R_hat = eps^2 * sigma'^2 / (eps'^2 * sigma^2), each condition fitted at its
// strongest point within the window against the true hypothesis values.
[[nodiscard]] inline double estimate_R_hat(const TraceSet& baseline,
                                           const std::vector<double>& baseline_values,
                                           const TraceSet& defended,
                                           const std::vector<double>& defended_values,
                                           const std::vector<int>& window) {
  const auto fit_strongest = [&window](const TraceSet& traces,
                                       const std::vector<double>& values) -> SlotFit {
    SlotFit best;
    double best_snr = -1.0;
    for (int slot : window) {
      const SlotFit fit = fit_slot(traces, slot, values);
      if (!fit.defined || fit.sigma2_hat <= 0.0) continue;
      const double snr = fit.eps_hat * fit.eps_hat * fit.var_v / fit.sigma2_hat;
      if (snr > best_snr) {
        best_snr = snr;
        best = fit;
      }
    }
    return best;
  };
  const SlotFit base = fit_strongest(baseline, baseline_values);
  const SlotFit prot = fit_strongest(defended, defended_values);
  if (!base.defined) throw std::invalid_argument("baseline fit undefined over window");
  if (!prot.defined || prot.eps_hat == 0.0) return std::numeric_limits<double>::infinity();
  return (base.eps_hat * base.eps_hat * prot.sigma2_hat) /
         (prot.eps_hat * prot.eps_hat * base.sigma2_hat);
}

}  // namespace macp
