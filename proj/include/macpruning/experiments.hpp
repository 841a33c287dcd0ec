#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "macpruning/csv.hpp"
#include "macpruning/dema.hpp"
#include "macpruning/emsim.hpp"
#include "macpruning/iapam_train.hpp"
#include "macpruning/overhead.hpp"
#include "macpruning/pam.hpp"
#include "macpruning/qinference.hpp"
#include "macpruning/rng.hpp"
#include "macpruning/strength.hpp"
#include "macpruning/toy.hpp"
#include "macpruning/trace_io.hpp"

namespace macp {

// ---------------------------------------------------------------------------
// Flat key=value run configuration shared by every experiment driver.
// Unknown keys are an error so that typos cannot silently fall back to
// defaults.
// ---------------------------------------------------------------------------

namespace detail {

[[nodiscard]] inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + value + "'");
  }
  if (pos != value.size())
    throw std::invalid_argument("config key '" + key + "': trailing junk in '" + value + "'");
  return v;
}

[[nodiscard]] inline long long parse_ll(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + value + "'");
  }
  if (pos != value.size())
    throw std::invalid_argument("config key '" + key + "': trailing junk in '" + value + "'");
  return v;
}

[[nodiscard]] inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  std::size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

struct RunConfig {
  std::string mode = "none";  // none | rpam | iapam
  double p = 0.5;
  double q = 0.4;
  double alpha = 1.0;
  double sigma = 4.0;
  double epsilon = 1.0;
  double c = 0.0;
  int M = 16;
  int D = 3;
  int j_max = 8;
  long long n_traces = 2000;
  std::uint64_t seed = 1;
  double threshold = 1000.0;
  int epochs = 120;
  int iterations = 1;
  double lr = 0.1;
  double toy_sigma = 0.9;
  std::string ratios = "0,0.25,0.5,0.75,1";
  int eval_seeds = 5;
  std::string out;
  std::string curves_out;
  std::string traces_in;

  void set(const std::string& key, const std::string& value) {
    if (key == "mode") {
      if (value != "none" && value != "rpam" && value != "iapam")
        throw std::invalid_argument("config key 'mode': must be none|rpam|iapam, got '" + value + "'");
      mode = value;
    } else if (key == "p") {
      p = detail::parse_double(key, value);
    } else if (key == "q") {
      q = detail::parse_double(key, value);
    } else if (key == "alpha") {
      alpha = detail::parse_double(key, value);
    } else if (key == "sigma") {
      sigma = detail::parse_double(key, value);
    } else if (key == "epsilon") {
      epsilon = detail::parse_double(key, value);
    } else if (key == "c") {
      c = detail::parse_double(key, value);
    } else if (key == "M") {
      M = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "D") {
      D = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "j_max") {
      j_max = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "n_traces") {
      n_traces = detail::parse_ll(key, value);
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(detail::parse_ll(key, value));
    } else if (key == "threshold") {
      threshold = detail::parse_double(key, value);
    } else if (key == "epochs") {
      epochs = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "iterations") {
      iterations = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "lr") {
      lr = detail::parse_double(key, value);
    } else if (key == "toy_sigma") {
      toy_sigma = detail::parse_double(key, value);
    } else if (key == "ratios") {
      ratios = value;
    } else if (key == "eval_seeds") {
      eval_seeds = static_cast<int>(detail::parse_ll(key, value));
    } else if (key == "out") {
      out = value;
    } else if (key == "curves_out") {
      curves_out = value;
    } else if (key == "traces_in") {
      traces_in = value;
    } else {
      throw std::invalid_argument("unknown config key: '" + key + "'");
    }
  }

  // Canonical text in fixed field order; its hash stamps every output so a
  // result file can be traced back to the exact configuration.
  [[nodiscard]] std::string canonical() const {
    std::ostringstream os;
    os << "mode=" << mode << "\np=" << fmt_double(p) << "\nq=" << fmt_double(q)
       << "\nalpha=" << fmt_double(alpha) << "\nsigma=" << fmt_double(sigma)
       << "\nepsilon=" << fmt_double(epsilon) << "\nc=" << fmt_double(c) << "\nM=" << M
       << "\nD=" << D << "\nj_max=" << j_max << "\nn_traces=" << n_traces << "\nseed=" << seed
       << "\nthreshold=" << fmt_double(threshold) << "\nepochs=" << epochs
       << "\niterations=" << iterations << "\nlr=" << fmt_double(lr)
       << "\ntoy_sigma=" << fmt_double(toy_sigma) << "\nratios=" << ratios
       << "\neval_seeds=" << eval_seeds << "\nout=" << out << "\ncurves_out=" << curves_out
       << "\ntraces_in=" << traces_in << "\n";
    return os.str();
  }

  [[nodiscard]] std::string config_hash() const { return hex64(fnv1a64(canonical())); }

  [[nodiscard]] std::string metadata_line() const {
    return "config_hash=" + config_hash() + " rng=" + std::string(kRngAlgorithm);
  }
};

inline void apply_config_line(RunConfig& cfg, const std::string& raw) {
  const std::string line = detail::trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("malformed config line: '" + line + "'");
  cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
}

[[nodiscard]] inline RunConfig load_config(const std::string& path,
                                           const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) apply_config_line(cfg, line);
  }
  for (const std::string& o : overrides) apply_config_line(cfg, o);
  return cfg;
}

[[nodiscard]] inline std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, ',')) {
    const std::string t = detail::trim(cur);
    if (t.empty()) continue;
    out.push_back(detail::parse_double("ratios", t));
  }
  if (out.empty()) throw std::invalid_argument("ratios list is empty");
  return out;
}

// ---------------------------------------------------------------------------
// Layers, defenses, and trace-set construction from a configuration.
// ---------------------------------------------------------------------------

[[nodiscard]] inline QuantizedFirstLayer random_chain_layer(int m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int8_t> w(m);
  for (auto& v : w) v = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
  return make_chain_layer(std::move(w));
}

[[nodiscard]] inline std::string layer_hash(const QuantizedFirstLayer& layer) {
  std::string bytes(layer.weights.size(), '\0');
  for (std::size_t i = 0; i < layer.weights.size(); ++i)
    bytes[i] = static_cast<char>(layer.weights[i]);
  return hex64(fnv1a64(bytes));
}

// The simulator's importance map for mode=iapam: the lowest floor(q*M) MAC
// indices. Which pixels are critical does not change the leakage statistics
// of the defended timeline, only which positions are always executed.
[[nodiscard]] inline DefenseSpec defense_from(const RunConfig& cfg, int pixel_count) {
  if (cfg.mode == "none") return DefenseSpec::unprotected();
  if (cfg.mode == "rpam") return DefenseSpec::rpam(cfg.p);
  std::vector<std::uint8_t> critical(pixel_count, 0);
  const int k = static_cast<int>(std::floor(cfg.q * pixel_count + 1e-9));
  for (int i = 0; i < k; ++i) critical[i] = 1;
  return DefenseSpec::iapam(cfg.p, cfg.q, std::move(critical));
}

struct BuiltSimulation {
  QuantizedFirstLayer layer;
  SimulatedSet set;
};

[[nodiscard]] inline BuiltSimulation build_simulation(const RunConfig& cfg) {
  if (cfg.M < 1) throw std::invalid_argument("M must be >= 1");
  if (cfg.n_traces < 0) throw std::invalid_argument("n_traces must be >= 0");
  BuiltSimulation b{random_chain_layer(cfg.M, derive_seed(cfg.seed, 0xA11CE)), {}};
  const DefenseSpec defense = defense_from(cfg, cfg.M);
  const LeakageParams params{cfg.epsilon, cfg.c, cfg.sigma};
  b.set = simulate_set(b.layer, defense, params, static_cast<int>(cfg.n_traces), cfg.M, cfg.seed);
  return b;
}

inline void write_simulation(const RunConfig& cfg, const BuiltSimulation& b) {
  if (cfg.out.empty()) throw std::invalid_argument("simulate requires out=<path>");
  write_macp(cfg.out, b.set.traces);
  write_sidecar(cfg.out + ".meta",
                {{"epsilon", fmt_double(cfg.epsilon)},
                 {"c", fmt_double(cfg.c)},
                 {"sigma", fmt_double(cfg.sigma)},
                 {"mode", cfg.mode},
                 {"p", fmt_double(cfg.p)},
                 {"q", fmt_double(cfg.q)},
                 {"seed", std::to_string(cfg.seed)},
                 {"n_traces", std::to_string(b.set.traces.size())},
                 {"trace_len", std::to_string(b.set.traces.trace_len)},
                 {"pixel_count", std::to_string(b.set.pixel_count)},
                 {"layer_hash", layer_hash(b.layer)},
                 {"config_hash", cfg.config_hash()},
                 {"rng", std::string(kRngAlgorithm)}});
}

// Rebuild a simulated set from a trace file plus its sidecar. Inputs are
// replayed from the recorded seed (they are drawn first in each per-trace
// stream, so no knowledge of the weights or masks is needed). Executed
// counts are unknown to an attacker for defended sets; they are marked 0,
// which routes the all-slot attack window.
[[nodiscard]] inline SimulatedSet load_simulation(const std::string& macp_path) {
  SimulatedSet set;
  set.traces = read_macp(macp_path);
  const auto sidecar = read_sidecar(macp_path + ".meta");
  std::string mode;
  std::uint64_t seed = 0;
  int pixel_count = -1;
  bool have_seed = false;
  for (const auto& [k, v] : sidecar) {
    if (k == "mode") mode = v;
    if (k == "seed") {
      seed = static_cast<std::uint64_t>(detail::parse_ll(k, v));
      have_seed = true;
    }
    if (k == "pixel_count") pixel_count = static_cast<int>(detail::parse_ll(k, v));
  }
  if (mode.empty() || !have_seed || pixel_count < 1)
    throw std::runtime_error("sidecar missing mode/seed/pixel_count: " + macp_path + ".meta");
  const int n = set.traces.size();
  set.pixel_count = pixel_count;
  set.inputs.resize(static_cast<std::size_t>(n) * pixel_count);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (int px = 0; px < pixel_count; ++px)
      set.inputs[static_cast<std::size_t>(i) * pixel_count + px] = rng.uniform_u8();
  }
  set.executed_counts.assign(n, mode == "none" ? pixel_count : 0);
  return set;
}

// ---------------------------------------------------------------------------
// Toy classifier worlds. World A (sigma 0.9) feeds the utility comparisons;
// world B (sigma 1.5) keeps cross-entropy gradients alive on held-out data
// for the map-training dynamics. Both models are trained under per-sample
// random input masking at keep rate 0.7.
// ---------------------------------------------------------------------------

struct ToyWorld {
  double sigma = 0.0;
  ToyDataset train, test, fresh;
  Mlp model;
};

[[nodiscard]] inline ToyWorld make_world(double sigma, std::uint64_t base_seed) {
  ToyWorld w;
  w.sigma = sigma;
  w.train = make_toy_dataset(600, sigma, derive_seed(base_seed, 0));
  w.test = make_toy_dataset(500, sigma, derive_seed(base_seed, 1));
  w.fresh = make_toy_dataset(400, sigma, derive_seed(base_seed, 2));
  w.model = Mlp::random_init(kToyPixels, 32, kToyClasses, derive_seed(base_seed, 3));
  TrainConfig tc;
  tc.keep_p = 0.7;
  train_mlp(w.model, w.train, tc, derive_seed(base_seed, 4));
  return w;
}

[[nodiscard]] inline ToyWorld make_world_a() { return make_world(0.9, 7); }
[[nodiscard]] inline ToyWorld make_world_b() { return make_world(1.5, 8); }

// ---------------------------------------------------------------------------
// Experiment drivers. Each writes one CSV (or trace file) stamped with the
// configuration hash and returns what the CLI prints as its summary.
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string run_simulate(const RunConfig& cfg) {
  const BuiltSimulation b = build_simulation(cfg);
  write_simulation(cfg, b);
  std::ostringstream os;
  os << "simulated " << b.set.traces.size() << " traces of length " << b.set.traces.trace_len
     << " -> " << cfg.out;
  return os.str();
}

struct AttackRun {
  AttackResult result;
  std::vector<int> true_weights;  // empty when attacking a loaded trace file
};

[[nodiscard]] inline AttackRun run_attack_core(const RunConfig& cfg) {
  AttackRun run;
  SimulatedSet set;
  if (cfg.traces_in.empty()) {
    BuiltSimulation b = build_simulation(cfg);
    set = std::move(b.set);
    run.true_weights.reserve(b.layer.weights.size());
    for (std::int8_t w : b.layer.weights) run.true_weights.push_back(w);
  } else {
    set = load_simulation(cfg.traces_in);
  }
  if (cfg.j_max < 1 || cfg.j_max > set.pixel_count)
    throw std::invalid_argument("j_max must be in [1, pixel_count]");
  DecisionRule rule;
  run.result = recover_sequential(set, cfg.j_max, rule);
  return run;
}

[[nodiscard]] inline std::string run_attack(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("attack requires out=<path>");
  const AttackRun run = run_attack_core(cfg);
  CsvWriter csv(cfg.out, cfg.metadata_line(),
                {"position_mac_index", "weight_signed_value", "slot_sample_index",
                 "abs_corr_pearson", "success_boolean01"});
  for (const auto& r : run.result.recovered)
    csv.row({fmt_int(r.position), fmt_int(r.weight), fmt_int(r.slot), fmt_double(r.corr),
             fmt_int(r.success ? 1 : 0)});
  csv.close();
  std::ostringstream os;
  os << "attack recovered " << run.result.successful_positions() << "/"
     << (run.result.recovered.empty() ? 0 : run.result.recovered.back().position)
     << " positions from " << run.result.traces_used << " traces -> " << cfg.out;
  return os.str();
}

[[nodiscard]] inline std::string run_strength(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("strength requires out=<path>");
  CsvWriter csv(cfg.out, cfg.metadata_line(),
                {"p_keep_probability", "threshold_trace_ratio", "j_star_basic_mac_index",
                 "j_star_adaptive_mac_index"});
  for (int i = 1; i <= 9; ++i) {
    const double p = i / 10.0;
    csv.row({fmt_double(p), fmt_double(cfg.threshold),
             fmt_int(j_star(p, cfg.threshold, StrengthMode::basic)),
             fmt_int(j_star(p, cfg.threshold, StrengthMode::adaptive))});
  }
  csv.close();
  std::string note = "strength table (p=0.1..0.9, threshold=" + fmt_double(cfg.threshold) + ") -> " +
                     cfg.out;
  if (!cfg.curves_out.empty()) {
    // R-vs-j curve data over the same p grid: dense for small j, widening
    // steps out to j=2000 so both attack models reach ratio 1000 in-range.
    std::vector<int> js;
    for (int j = 1; j <= 40; ++j) js.push_back(j);
    for (int j : {45, 50, 60, 70, 80, 100, 120, 160, 200, 250, 320, 400, 500, 640, 800, 1000,
                  1300, 1600, 2000})
      js.push_back(j);
    CsvWriter curves(cfg.curves_out, cfg.metadata_line(),
                     {"p_keep_probability", "j_mac_index", "basic_R_trace_ratio",
                      "adaptive_R_trace_ratio", "log10_basic_R", "log10_adaptive_R"});
    for (int i = 1; i <= 9; ++i) {
      const double p = i / 10.0;
      for (int j : js) {
        const double rb = theoretical_R(p, j);
        const double ra = adaptive_R(p, j);
        curves.row({fmt_double(p), fmt_int(j), fmt_double(rb), fmt_double(ra),
                    fmt_double(std::log10(rb)), fmt_double(std::log10(ra))});
      }
    }
    curves.close();
    note += "; curves -> " + cfg.curves_out;
  }
  return note;
}

[[nodiscard]] inline std::string run_overhead(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("overhead requires out=<path>");
  CsvWriter csv(cfg.out, cfg.metadata_line(),
                {"p_keep_probability", "baseline_cycles", "rpam_cycles", "iapam_cycles",
                 "breakeven_p_probability"});
  const double breakeven = breakeven_p(cfg.D);
  for (int i = 1; i <= 19; ++i) {
    const double p = i * 0.05;
    csv.row({fmt_double(p), fmt_int(baseline_cycles(cfg.M)), fmt_double(rpam_cycles(cfg.M, p, cfg.D)),
             fmt_double(iapam_cycles(cfg.M, p, std::min(cfg.q, p), cfg.D)),
             fmt_double(breakeven)});
  }
  csv.close();
  return "overhead table (M=" + std::to_string(cfg.M) + ", D=" + std::to_string(cfg.D) + ") -> " +
         cfg.out;
}

struct TrainIapamRun {
  TrainedMap map;
  double base_accuracy = 0.0;
  double iapam_accuracy = 0.0;
  double rpam_accuracy = 0.0;
};

[[nodiscard]] inline TrainIapamRun run_train_iapam_core(const RunConfig& cfg) {
  const ToyWorld world = make_world(cfg.toy_sigma, cfg.seed);
  MapTrainConfig mc;
  mc.q = cfg.q;
  mc.alpha = cfg.alpha;
  mc.iterations = cfg.iterations;
  mc.epochs = cfg.epochs;
  mc.lr = cfg.lr;
  TrainIapamRun run;
  run.map = train_map(world.model, world.fresh, mc);
  run.base_accuracy = evaluate(world.model, world.test).accuracy;
  double iapam_acc = 0.0, rpam_acc = 0.0;
  for (int s = 0; s < cfg.eval_seeds; ++s) {
    iapam_acc += accuracy_under_iapam(world.model, world.test, run.map.critical, cfg.p, cfg.q,
                                      derive_seed(cfg.seed, 5000 + s));
    rpam_acc += accuracy_under_rpam(world.model, world.test, cfg.p, derive_seed(cfg.seed, 6000 + s));
  }
  run.iapam_accuracy = iapam_acc / cfg.eval_seeds;
  run.rpam_accuracy = rpam_acc / cfg.eval_seeds;
  return run;
}

[[nodiscard]] inline std::string run_train_iapam(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("train-iapam requires out=<path>");
  const TrainIapamRun run = run_train_iapam_core(cfg);
  CsvWriter csv(cfg.out, cfg.metadata_line(), {"epoch_index", "soft_active_ratio_fraction"});
  for (std::size_t e = 0; e < run.map.ratio_curve.size(); ++e)
    csv.row({fmt_int(static_cast<long long>(e)), fmt_double(run.map.ratio_curve[e])});
  csv.close();
  std::ostringstream os;
  os << "trained map: " << run.map.critical.size() << " critical pixels, final ratio "
     << fmt_double(run.map.final_ratio) << "; accuracy clean " << fmt_double(run.base_accuracy)
     << " iapam " << fmt_double(run.iapam_accuracy) << " rpam " << fmt_double(run.rpam_accuracy)
     << " -> " << cfg.out;
  return os.str();
}

[[nodiscard]] inline std::string run_robustness(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("robustness requires out=<path>");
  const ToyWorld world = make_world(cfg.toy_sigma, cfg.seed);
  const std::vector<double> ratio_list = parse_ratio_list(cfg.ratios);
  CsvWriter csv(cfg.out, cfg.metadata_line(), {"masking_ratio_fraction", "accuracy_fraction"});
  std::ostringstream os;
  os << "robustness";
  for (double ratio : ratio_list) {
    double acc = 0.0;
    for (int s = 0; s < cfg.eval_seeds; ++s)
      acc += accuracy_under_masking_ratio(world.model, world.test, ratio,
                                          derive_seed(cfg.seed, 7000 + s));
    acc /= cfg.eval_seeds;
    csv.row({fmt_double(ratio), fmt_double(acc)});
    os << " " << fmt_double(ratio) << ":" << fmt_double(acc);
  }
  csv.close();
  os << " -> " << cfg.out;
  return os.str();
}

// ---------------------------------------------------------------------------
// Measurement protocols used by the verification suite.
// ---------------------------------------------------------------------------

// True leakage-model values HW(accumulator at MAC `position`) per trace,
// computed from the genuine weights on the set's own inputs.
[[nodiscard]] inline std::vector<double> hw_values_at(const SimulatedSet& set,
                                                      const QuantizedFirstLayer& layer,
                                                      int position) {
  const int n = set.traces.size();
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* in = set.input(i);
    std::int32_t acc = 0;
    for (int k = 0; k < position; ++k) acc = mac_step(acc, in[k], layer.weights[k]);
    v[i] = hamming_weight(acc);
  }
  return v;
}

// Mean log10 mitigation-strength estimate over fresh repetitions, compared
// with the closed form: both conditions are fitted against the true
// hypothesis at the aligned slot j-1.
struct RhatPoint {
  double mean_log10_rhat = 0.0;
  double log10_theory = 0.0;
  double abs_error = 0.0;
  int usable_reps = 0;
};

[[nodiscard]] inline RhatPoint rhat_point(double p, int j, int n_traces, int reps, double sigma,
                                          std::uint64_t base_seed) {
  const LeakageParams params{1.0, 0.0, sigma};
  double sum_log = 0.0;
  int usable = 0;
  for (int r = 0; r < reps; ++r) {
    const QuantizedFirstLayer layer =
        random_chain_layer(j, derive_seed(base_seed, 3 * static_cast<std::uint64_t>(r)));
    const SimulatedSet base = simulate_set(layer, DefenseSpec::unprotected(), params, n_traces, j,
                                           derive_seed(base_seed, 3 * r + 1));
    const SimulatedSet prot = simulate_set(layer, DefenseSpec::rpam(p), params, n_traces, j,
                                           derive_seed(base_seed, 3 * r + 2));
    const std::vector<double> v_base = hw_values_at(base, layer, j);
    const std::vector<double> v_prot = hw_values_at(prot, layer, j);
    const double rhat = estimate_R_hat(base.traces, v_base, prot.traces, v_prot, {j - 1});
    if (!std::isfinite(rhat) || rhat <= 0.0) continue;
    sum_log += std::log10(rhat);
    ++usable;
  }
  RhatPoint out;
  if (usable == 0) throw std::runtime_error("no usable repetitions for R-hat point");
  out.usable_reps = usable;
  out.mean_log10_rhat = sum_log / usable;
  out.log10_theory = std::log10(theoretical_R(p, j));
  out.abs_error = std::abs(out.mean_log10_rhat - out.log10_theory);
  return out;
}

// Crowning trace count for one condition: simulate up to `cap` traces and ask
// when the true weight at `position` becomes and stays top-ranked.
[[nodiscard]] inline long long crowning_traces(const QuantizedFirstLayer& layer,
                                               const DefenseSpec& defense, double sigma,
                                               int position, int step, long long cap,
                                               std::uint64_t seed) {
  const LeakageParams params{1.0, 0.0, sigma};
  const SimulatedSet set = simulate_set(layer, defense, params, static_cast<int>(cap),
                                        layer.mac_count(), seed);
  std::vector<int> truth;
  truth.reserve(layer.weights.size());
  for (std::int8_t w : layer.weights) truth.push_back(w);
  DecisionRule rule;
  rule.step = step;
  return min_traces_to_success(set, truth, position, rule, step, cap);
}

struct CrowningRatioResult {
  double geomean = 0.0;
  int capped_runs = 0;  // runs where either condition never crowned
};

// Geometric mean over seeded runs of (defended condition crowning count) /
// (baseline condition crowning count), fresh weights per run. Capped runs
// substitute the cap itself, which can only bias the ratio toward 1.
template <typename MakeDefenseA, typename MakeDefenseB>
[[nodiscard]] CrowningRatioResult crowning_ratio(int runs, int position, double sigma_a,
                                                 double sigma_b, MakeDefenseA&& defense_a,
                                                 MakeDefenseB&& defense_b, int step_a, int step_b,
                                                 long long cap_a, long long cap_b,
                                                 std::uint64_t base_seed) {
  double sum_log = 0.0;
  int capped = 0;
  for (int r = 0; r < runs; ++r) {
    const QuantizedFirstLayer layer =
        random_chain_layer(position, derive_seed(base_seed, 100 + static_cast<std::uint64_t>(r)));
    long long a = crowning_traces(layer, defense_a(), sigma_a, position, step_a, cap_a,
                                  derive_seed(base_seed, 200 + r));
    long long b = crowning_traces(layer, defense_b(), sigma_b, position, step_b, cap_b,
                                  derive_seed(base_seed, 300 + r));
    if (a < 0 || b < 0) ++capped;
    if (a < 0) a = cap_a;
    if (b < 0) b = cap_b;
    sum_log += std::log(static_cast<double>(b)) - std::log(static_cast<double>(a));
  }
  return {std::exp(sum_log / runs), capped};
}

// Share of seeded runs where a defended attack at `position`, given the true
// prefix and the all-slot window, fails to confirm the correct weight.
[[nodiscard]] inline int count_position_failures(int runs, int position, int m, int n_traces,
                                                 double p, double sigma, std::uint64_t base_seed) {
  const LeakageParams params{1.0, 0.0, sigma};
  int failures = 0;
  for (int r = 0; r < runs; ++r) {
    const QuantizedFirstLayer layer =
        random_chain_layer(m, derive_seed(base_seed, 2 * static_cast<std::uint64_t>(r)));
    const SimulatedSet set = simulate_set(layer, DefenseSpec::rpam(p), params, n_traces, m,
                                          derive_seed(base_seed, 2 * r + 1));
    std::vector<int> prior;
    for (int k = 0; k < position - 1; ++k) prior.push_back(layer.weights[k]);
    DecisionRule rule;
    const PositionOutcome outcome =
        attack_position(set, prior, position, attack_window(set, position), rule);
    if (!outcome.success || outcome.weight != layer.weights[position - 1]) ++failures;
  }
  return failures;
}

}  // namespace macp
