// Command-line driver: one subcommand per experiment kind.

#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "splap/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::map<std::string, std::string> set;  // key -> value, applied after the config file
  std::vector<std::string> extra;
  double dt = 0.0;
};

void add_flags(CLI::App* sub, Flags& f) {
  auto opt = [&](const char* name, const char* key, const char* help) {
    sub->add_option_function<std::string>(
        name, [&f, key](const std::string& v) { f.set[key] = v; }, help);
  };
  sub->add_option("--config", f.config, "key=value config file");
  opt("--p", "p", "exponent p > 1");
  opt("--delta", "delta", "singular exponent delta > 0");
  opt("--grid", "n", "nodes per axis");
  opt("--dim", "dim", "1 or 2");
  opt("--extent", "extent", "side length of the box");
  opt("--reaction", "reaction.kind", "none | constant:c | power:a,q | saturating:a | table:...");
  opt("--T", "T", "final time");
  opt("--N", "N", "number of time steps");
  opt("--eps0", "eps0", "initial regularization (0 selects the default)");
  opt("--tol", "tol", "solver tolerance");
  opt("--out", "out", "output directory");
  sub->add_option("--dt", f.dt, "time step; sets N = T/dt");
  sub->add_option("--set", f.extra, "additional key=value settings");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-Laplacian singular diffusion experiments"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name :
       {"eigen", "stationary", "evolve", "stabilize", "contraction", "sharpness", "convergence"}) {
    add_flags(app.add_subcommand(name, std::string("run the ") + name + " experiment"), flags);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const std::string kind = app.get_subcommands().front()->get_name();
    splap::ExperimentConfig cfg;
    if (!flags.config.empty()) cfg = splap::ExperimentConfig::load(flags.config);
    cfg.set("experiment", kind);
    for (const auto& kv : flags.extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw splap::InvalidArgument("--set expects key=value");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : flags.set) {
      if (k == "reaction.kind") {
        const auto colon = v.find(':');
        cfg.set("reaction.kind", v.substr(0, colon));
        cfg.set("reaction.params", colon == std::string::npos ? "" : v.substr(colon + 1));
      } else {
        cfg.set(k, v);
      }
    }
    if (flags.dt > 0.0) cfg.N = static_cast<std::size_t>(std::llround(cfg.T / flags.dt));

    const splap::RunReport r = splap::run_experiment(cfg);
    for (const auto& v : r.verdicts)
      std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << "  value=" << v.value << " " << v.rule
                << " " << v.threshold << '\n';
    std::cout << "report: " << cfg.out << "/report.json  (" << r.wall_seconds << " s)\n";
    return r.pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
