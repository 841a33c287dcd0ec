#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "macpruning/pam.hpp"
#include "macpruning/rng.hpp"

namespace macp {

// 12x12 five-class glyph benchmark: horizontal stripes, vertical stripes,
// diagonal cross, center blob, ring. Each class carries a fixed dense +-1
// texture so that masking any informative pixel costs measurable accuracy.
inline constexpr int kToySide = 12;
inline constexpr int kToyPixels = kToySide * kToySide;
inline constexpr int kToyClasses = 5;

[[nodiscard]] inline std::vector<double> glyph_image(int cls) {
  std::vector<double> g(kToyPixels, 0.0);
  const auto at = [&g](int r, int c) -> double& { return g[r * kToySide + c]; };
  const double cx = (kToySide - 1) / 2.0;
  for (int r = 0; r < kToySide; ++r) {
    for (int c = 0; c < kToySide; ++c) {
      const double d2 = (r - cx) * (r - cx) + (c - cx) * (c - cx);
      bool on = false;
      switch (cls) {
        case 0: on = r == 2 || r == 3 || r == 6 || r == 7 || r == 9 || r == 10; break;
        case 1: on = c == 2 || c == 3 || c == 6 || c == 7 || c == 9 || c == 10; break;
        case 2: on = std::abs(r - c) <= 1 || std::abs(r + c - (kToySide - 1)) <= 1; break;
        case 3: on = d2 <= 3.2 * 3.2; break;
        case 4: on = d2 >= 3.0 * 3.0 && d2 <= 5.0 * 5.0; break;
        default: throw std::invalid_argument("class out of range");
      }
      if (on) at(r, c) = 1.0;
    }
  }
  return g;
}

[[nodiscard]] inline std::vector<double> class_texture(int cls) {
  Rng rng(derive_seed(1000, static_cast<std::uint64_t>(cls)));
  std::vector<double> t(kToyPixels);
  for (auto& v : t) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return t;
}

// Pixels that belong to at least one glyph; a well-trained importance map
// should select only these.
[[nodiscard]] inline std::vector<std::uint8_t> informative_pixels() {
  std::vector<std::uint8_t> info(kToyPixels, 0);
  for (int cls = 0; cls < kToyClasses; ++cls) {
    const auto g = glyph_image(cls);
    for (int i = 0; i < kToyPixels; ++i)
      if (g[i] != 0.0) info[i] = 1;
  }
  return info;
}

struct ToyDataset {
  int n = 0;
  int pixels = kToyPixels;  // row width of x
  std::vector<double> x;    // row-major n x pixels
  std::vector<int> y;

  [[nodiscard]] const double* sample(int i) const { return x.data() + static_cast<std::size_t>(i) * pixels; }
};

// Balanced labels (i mod 5); per sample: glyph scaled by a random gain in
// [0.65, 0.90], plus the class texture at amplitude 0.18, plus N(0, sigma),
// clipped to [-3, 3].
[[nodiscard]] inline ToyDataset make_toy_dataset(int n, double sigma, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  std::vector<std::vector<double>> glyphs, textures;
  for (int c = 0; c < kToyClasses; ++c) {
    glyphs.push_back(glyph_image(c));
    textures.push_back(class_texture(c));
  }
  ToyDataset ds;
  ds.n = n;
  ds.pixels = kToyPixels;
  ds.x.resize(static_cast<std::size_t>(n) * kToyPixels);
  ds.y.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int c = i % kToyClasses;
    ds.y[i] = c;
    const double gain = 0.65 + 0.25 * rng.uniform();
    double* row = ds.x.data() + static_cast<std::size_t>(i) * kToyPixels;
    for (int p = 0; p < kToyPixels; ++p) {
      const double v = glyphs[c][p] * gain + 0.18 * textures[c][p] + rng.normal(0.0, sigma);
      row[p] = std::clamp(v, -3.0, 3.0);
    }
  }
  return ds;
}

// Plain tanh-hidden softmax MLP, sized at runtime so the same code serves the
// 144-32-5 benchmark model and small gradient-check instances.
struct Mlp {
  int in = 0, hidden = 0, out = 0;
  std::vector<double> w1, b1, w2, b2;  // w1[i*hidden+h], w2[h*out+o]

  [[nodiscard]] static Mlp random_init(int in, int hidden, int out, std::uint64_t seed) {
    Mlp m;
    m.in = in;
    m.hidden = hidden;
    m.out = out;
    m.w1.resize(static_cast<std::size_t>(in) * hidden);
    m.b1.assign(hidden, 0.0);
    m.w2.resize(static_cast<std::size_t>(hidden) * out);
    m.b2.assign(out, 0.0);
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : m.w1) w = rng.normal(0.0, s1);
    for (auto& w : m.w2) w = rng.normal(0.0, s2);
    return m;
  }

  void forward(const double* x, std::vector<double>& a1, std::vector<double>& probs) const {
    a1.assign(hidden, 0.0);
    for (int i = 0; i < in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* row = w1.data() + static_cast<std::size_t>(i) * hidden;
      for (int h = 0; h < hidden; ++h) a1[h] += xi * row[h];
    }
    for (int h = 0; h < hidden; ++h) a1[h] = std::tanh(a1[h] + b1[h]);
    probs.assign(out, 0.0);
    for (int h = 0; h < hidden; ++h) {
      const double ah = a1[h];
      const double* row = w2.data() + static_cast<std::size_t>(h) * out;
      for (int o = 0; o < out; ++o) probs[o] += ah * row[o];
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (int o = 0; o < out; ++o) {
      probs[o] += b2[o];
      mx = std::max(mx, probs[o]);
    }
    double z = 0.0;
    for (int o = 0; o < out; ++o) {
      probs[o] = std::exp(probs[o] - mx);
      z += probs[o];
    }
    for (int o = 0; o < out; ++o) probs[o] /= z;
  }

  [[nodiscard]] int predict(const double* x) const {
    std::vector<double> a1, probs;
    forward(x, a1, probs);
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }

  // Cross-entropy and its gradient with respect to the (possibly masked)
  // input vector; the network weights stay untouched.
  [[nodiscard]] double input_gradient(const double* x, int label, std::vector<double>& dx) const {
    std::vector<double> a1, probs;
    forward(x, a1, probs);
    std::vector<double> dz2(out);
    for (int o = 0; o < out; ++o) dz2[o] = probs[o] - (o == label ? 1.0 : 0.0);
    std::vector<double> dz1(hidden, 0.0);
    for (int h = 0; h < hidden; ++h) {
      const double* row = w2.data() + static_cast<std::size_t>(h) * out;
      double da = 0.0;
      for (int o = 0; o < out; ++o) da += row[o] * dz2[o];
      dz1[h] = da * (1.0 - a1[h] * a1[h]);
    }
    dx.assign(in, 0.0);
    for (int i = 0; i < in; ++i) {
      const double* row = w1.data() + static_cast<std::size_t>(i) * hidden;
      double d = 0.0;
      for (int h = 0; h < hidden; ++h) d += row[h] * dz1[h];
      dx[i] = d;
    }
    return -std::log(std::max(probs[label], 1e-300));
  }
};

inline void require_matching_width(const Mlp& m, const ToyDataset& ds) {
  if (ds.pixels != m.in) throw std::invalid_argument("dataset row width does not match model input");
  if (ds.x.size() != static_cast<std::size_t>(ds.n) * ds.pixels || ds.y.size() != static_cast<std::size_t>(ds.n))
    throw std::invalid_argument("dataset buffers do not match its declared shape");
}

struct TrainConfig {
  int epochs = 20;
  double lr = 0.3;
  int batch = 32;
  double keep_p = 1.0;  // < 1 trains under per-sample random input masking
};

inline void train_mlp(Mlp& m, const ToyDataset& ds, const TrainConfig& cfg, std::uint64_t seed) {
  if (cfg.keep_p <= 0.0 || cfg.keep_p > 1.0) throw std::invalid_argument("keep_p in (0,1]");
  require_matching_width(m, ds);
  Rng rng(seed);
  std::vector<int> order(ds.n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> gw1(m.w1.size()), gb1(m.b1.size()), gw2(m.w2.size()), gb2(m.b2.size());
  std::vector<double> xm(m.in), a1, probs, dz1(m.hidden), dz2(m.out);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < ds.n; start += cfg.batch) {
      const int bsz = std::min(cfg.batch, ds.n - start);
      std::fill(gw1.begin(), gw1.end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.begin(), gw2.end(), 0.0);
      std::fill(gb2.begin(), gb2.end(), 0.0);
      for (int b = 0; b < bsz; ++b) {
        const int i = order[start + b];
        const double* x = ds.sample(i);
        for (int p = 0; p < m.in; ++p)
          xm[p] = (cfg.keep_p >= 1.0 || rng.bernoulli(cfg.keep_p)) ? x[p] : 0.0;
        m.forward(xm.data(), a1, probs);
        for (int o = 0; o < m.out; ++o) dz2[o] = probs[o] - (o == ds.y[i] ? 1.0 : 0.0);
        for (int h = 0; h < m.hidden; ++h) {
          const double* row = m.w2.data() + static_cast<std::size_t>(h) * m.out;
          double da = 0.0;
          for (int o = 0; o < m.out; ++o) {
            gw2[static_cast<std::size_t>(h) * m.out + o] += a1[h] * dz2[o];
            da += row[o] * dz2[o];
          }
          dz1[h] = da * (1.0 - a1[h] * a1[h]);
          gb1[h] += dz1[h];
        }
        for (int o = 0; o < m.out; ++o) gb2[o] += dz2[o];
        for (int p = 0; p < m.in; ++p) {
          const double xp = xm[p];
          if (xp == 0.0) continue;
          double* grow = gw1.data() + static_cast<std::size_t>(p) * m.hidden;
          for (int h = 0; h < m.hidden; ++h) grow[h] += xp * dz1[h];
        }
      }
      const double scale = cfg.lr / bsz;
      for (std::size_t k = 0; k < m.w1.size(); ++k) m.w1[k] -= scale * gw1[k];
      for (std::size_t k = 0; k < m.b1.size(); ++k) m.b1[k] -= scale * gb1[k];
      for (std::size_t k = 0; k < m.w2.size(); ++k) m.w2[k] -= scale * gw2[k];
      for (std::size_t k = 0; k < m.b2.size(); ++k) m.b2[k] -= scale * gb2[k];
    }
  }
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

[[nodiscard]] inline EvalResult evaluate(const Mlp& m, const ToyDataset& ds) {
  require_matching_width(m, ds);
  std::vector<double> a1, probs;
  EvalResult r;
  for (int i = 0; i < ds.n; ++i) {
    m.forward(ds.sample(i), a1, probs);
    r.loss += -std::log(std::max(probs[ds.y[i]], 1e-300));
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    r.accuracy += pred == ds.y[i] ? 1.0 : 0.0;
  }
  r.loss /= ds.n;
  r.accuracy /= ds.n;
  return r;
}

// Accuracy with a fresh random-keep mask per sample (the inference-time view
// of random activation pruning on this model's input layer).
[[nodiscard]] inline double accuracy_under_rpam(const Mlp& m, const ToyDataset& ds, double p,
                                                std::uint64_t seed) {
  require_matching_width(m, ds);
  Rng rng(seed);
  std::vector<double> xm(m.in), a1, probs;
  double acc = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    const double* x = ds.sample(i);
    for (int q = 0; q < m.in; ++q) xm[q] = rng.bernoulli(p) ? x[q] : 0.0;
    m.forward(xm.data(), a1, probs);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    acc += pred == ds.y[i] ? 1.0 : 0.0;
  }
  return acc / ds.n;
}

// Importance-aware variant: critical pixels always on, the rest kept at the
// effective rate that preserves the overall expected keep probability p.
[[nodiscard]] inline double accuracy_under_iapam(const Mlp& m, const ToyDataset& ds,
                                                 const std::vector<int>& critical, double p,
                                                 double q, std::uint64_t seed) {
  require_matching_width(m, ds);
  const double rate = effective_rate(p, q);
  std::vector<std::uint8_t> is_critical(m.in, 0);
  for (int c : critical) {
    if (c < 0 || c >= m.in) throw std::invalid_argument("critical index out of range");
    is_critical[c] = 1;
  }
  Rng rng(seed);
  std::vector<double> xm(m.in), a1, probs;
  double acc = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    const double* x = ds.sample(i);
    for (int k = 0; k < m.in; ++k)
      xm[k] = (is_critical[k] || rng.bernoulli(rate)) ? x[k] : 0.0;
    m.forward(xm.data(), a1, probs);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    acc += pred == ds.y[i] ? 1.0 : 0.0;
  }
  return acc / ds.n;
}

// Accuracy when an exact fraction of pixels is blanked per sample: ratio 0 is
// the clean baseline, ratio 1 collapses every input to the constant image.
[[nodiscard]] inline double accuracy_under_masking_ratio(const Mlp& m, const ToyDataset& ds,
                                                         double ratio, std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("ratio in [0,1]");
  require_matching_width(m, ds);
  const int k_off = static_cast<int>(std::floor(ratio * m.in + 1e-9));
  Rng rng(seed);
  std::vector<int> idx(m.in);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> xm(m.in), a1, probs;
  double acc = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    const double* x = ds.sample(i);
    std::copy(x, x + m.in, xm.begin());
    rng.shuffle(idx);
    for (int k = 0; k < k_off; ++k) xm[idx[k]] = 0.0;
    m.forward(xm.data(), a1, probs);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    acc += pred == ds.y[i] ? 1.0 : 0.0;
  }
  return acc / ds.n;
}

}  // namespace macp
