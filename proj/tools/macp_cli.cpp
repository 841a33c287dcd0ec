// Command-line runner for the MAC-pruning side-channel laboratory: simulate
// leakage traces, run the correlation attack, tabulate mitigation strength
// and cycle overhead, train importance maps, and sweep masking robustness.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "macpruning/experiments.hpp"

namespace {

struct SubcommandState {
  std::string config_path;
  std::vector<std::string> overrides;
};

void attach_common(CLI::App* sub, SubcommandState& state) {
  sub->add_option("-c,--config", state.config_path, "flat key=value configuration file");
  sub->add_option("overrides", state.overrides, "key=value overrides applied after the file");
}

void remove_outputs(const macp::RunConfig& cfg) {
  std::error_code ec;
  if (!cfg.out.empty()) {
    std::filesystem::remove(cfg.out, ec);
    std::filesystem::remove(cfg.out + ".meta", ec);
  }
  if (!cfg.curves_out.empty()) std::filesystem::remove(cfg.curves_out, ec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale EM side-channel laboratory for masked MAC inference"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    std::function<std::string(const macp::RunConfig&)> driver;
  };
  const std::vector<Entry> entries = {
      {"simulate", "synthesize a leakage trace set (MACP file + sidecar)", macp::run_simulate},
      {"attack", "correlation attack on simulated or stored traces", macp::run_attack},
      {"strength", "mitigation-strength table over keep probabilities", macp::run_strength},
      {"train-iapam", "learn an importance map on the bundled classifier", macp::run_train_iapam},
      {"overhead", "cycle-count overhead table over keep probabilities", macp::run_overhead},
      {"robustness", "accuracy sweep under random input masking", macp::run_robustness},
  };

  std::vector<SubcommandState> states(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    attach_common(app.add_subcommand(entries[i].name, entries[i].help), states[i]);

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!app.get_subcommand(entries[i].name)->parsed()) continue;
    macp::RunConfig cfg;
    try {
      cfg = macp::load_config(states[i].config_path, states[i].overrides);
      std::cout << entries[i].driver(cfg) << "\n";
      std::cout << "config_hash=" << cfg.config_hash() << "\n";
      return 0;
    } catch (const std::exception& e) {
      remove_outputs(cfg);
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  std::cerr << "error: no subcommand selected\n";
  return 1;
}
