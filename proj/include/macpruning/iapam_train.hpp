#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "macpruning/toy.hpp"

namespace macp {

[[nodiscard]] inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Forward pass through a frozen model with a learnable per-pixel mask logit
// vector m. Hard mode gates each pixel by sigmoid(m) > 0.5 (so m = 0 means
// off); soft mode scales each pixel by sigmoid(m) and is exactly
// differentiable, which is what the gradient check exercises.
inline void masked_forward(const Mlp& model, const double* x, const std::vector<double>& m,
                           bool hard, std::vector<double>& xm, std::vector<double>& a1,
                           std::vector<double>& probs) {
  if (static_cast<int>(m.size()) != model.in) throw std::invalid_argument("mask size mismatch");
  xm.resize(model.in);
  for (int i = 0; i < model.in; ++i) {
    const double s = sigmoid(m[i]);
    xm[i] = hard ? (s > 0.5 ? x[i] : 0.0) : x[i] * s;
  }
  model.forward(xm.data(), a1, probs);
}

[[nodiscard]] inline double soft_active_ratio(const std::vector<double>& m) {
  double s = 0.0;
  for (double v : m) s += sigmoid(v);
  return s / static_cast<double>(m.size());
}

struct MaskGradient {
  double loss = 0.0;  // ce + alpha * |ratio - q|
  double ce = 0.0;
  double ratio = 0.0;
  std::vector<double> grad;  // d loss / d m
};

// Batch loss and mask-logit gradient. The cross-entropy part backpropagates
// to the masked input and is routed to m through the sigmoid in both modes:
// exact in soft mode, straight-through in hard mode (the step function is
// replaced by its sigmoid surrogate on the backward path only).
[[nodiscard]] inline MaskGradient mask_gradient(const Mlp& model, const ToyDataset& ds,
                                                const std::vector<double>& m, double alpha,
                                                double q, bool hard) {
  if (ds.n < 1) throw std::invalid_argument("empty batch");
  require_matching_width(model, ds);
  if (static_cast<int>(m.size()) != model.in) throw std::invalid_argument("mask size mismatch");
  const int n_pix = model.in;
  MaskGradient out;
  out.grad.assign(n_pix, 0.0);
  std::vector<double> xm, a1, probs, dx;
  std::vector<double> acc(n_pix, 0.0);  // sum over batch of dCE/dxm * x
  for (int b = 0; b < ds.n; ++b) {
    const double* x = ds.sample(b);
    xm.resize(n_pix);
    for (int i = 0; i < n_pix; ++i) {
      const double s = sigmoid(m[i]);
      xm[i] = hard ? (s > 0.5 ? x[i] : 0.0) : x[i] * s;
    }
    out.ce += model.input_gradient(xm.data(), ds.y[b], dx);
    for (int i = 0; i < n_pix; ++i) acc[i] += dx[i] * x[i];
  }
  out.ce /= ds.n;
  out.ratio = soft_active_ratio(m);
  const double diff = out.ratio - q;
  const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  out.loss = out.ce + alpha * std::abs(diff);
  for (int i = 0; i < n_pix; ++i) {
    const double s = sigmoid(m[i]);
    const double sprime = s * (1.0 - s);
    out.grad[i] = (acc[i] / ds.n) * sprime + alpha * sgn * sprime / n_pix;
  }
  return out;
}

struct MapTrainConfig {
  double q = 0.4;        // target critical fraction
  double alpha = 1.0;    // ratio-regularizer weight
  int iterations = 1;    // outer restarts accumulated into the score
  int epochs = 100;      // full-batch gradient steps per restart
  double lr = 0.1;       // plain gradient-descent step on the mask logits
  bool hard_forward = true;

  void validate() const {
    if (!(q > 0.0) || !(q < 1.0)) throw std::invalid_argument("q must be in (0,1)");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    if (iterations < 1 || epochs < 0) throw std::invalid_argument("iterations >= 1, epochs >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  }
};

struct TrainedMap {
  std::vector<int> critical;        // floor(q * pixels) indices, sorted
  std::vector<double> scores;       // accumulated sigmoid(m) across restarts
  std::vector<double> ratio_curve;  // soft active ratio after each step
  double final_ratio = 0.0;
};

// Learns which pixels matter: mask logits start at zero (everything gated
// off in hard mode), full-batch descent on CE + alpha*|ratio-q| for each
// restart, scores accumulate sigmoid(m), and the map is the top floor(q*N)
// pixels by score with ties broken toward the lowest index. The model is
// never modified.
[[nodiscard]] inline TrainedMap train_map(const Mlp& model, const ToyDataset& ds,
                                          const MapTrainConfig& cfg) {
  cfg.validate();
  const int n_pix = model.in;
  TrainedMap out;
  out.scores.assign(n_pix, 0.0);
  std::vector<double> m(n_pix);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::fill(m.begin(), m.end(), 0.0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const MaskGradient g = mask_gradient(model, ds, m, cfg.alpha, cfg.q, cfg.hard_forward);
      for (int i = 0; i < n_pix; ++i) m[i] -= cfg.lr * g.grad[i];
      out.ratio_curve.push_back(soft_active_ratio(m));
    }
    for (int i = 0; i < n_pix; ++i) out.scores[i] += sigmoid(m[i]);
  }
  out.final_ratio = cfg.epochs > 0 ? out.ratio_curve.back() : soft_active_ratio(m);
  const int k = static_cast<int>(std::floor(cfg.q * n_pix + 1e-9));
  std::vector<int> idx(n_pix);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&out](int a, int b) {
    if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
    return a < b;
  });
  out.critical.assign(idx.begin(), idx.begin() + k);
  std::sort(out.critical.begin(), out.critical.end());
  return out;
}

}  // namespace macp
