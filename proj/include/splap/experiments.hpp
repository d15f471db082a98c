#pragma once

// Configuration-driven experiment drivers with JSON reports and CSV series.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "splap/grid.hpp"
#include "splap/problem.hpp"

namespace splap {

enum class ExperimentKind { eigen, stationary, evolve, stabilize, contraction, sharpness, convergence };

ExperimentKind parse_experiment_kind(const std::string& s);
const char* experiment_kind_name(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::eigen;
  int dim = 1;
  double extent = 1.0;
  std::size_t n = 101;
  double p = 2.0;
  double delta = 0.5;
  std::string reaction_kind = "none";
  std::string reaction_params;
  double T = 1.0;
  std::size_t N = 100;
  double eps0 = 0.0;
  double tol = 1e-10;
  std::string out = "out";

  // driver-specific settings, all with documented defaults
  double lambda = 1.0;                    // resolvent parameter (sharpness)
  double data = 1.0;                      // constant g (sharpness) or forcing h (evolve)
  std::string initial = "auto";           // profile | under | over | mid | auto
  double verdict_tol = 1e-3;              // stabilize: bound on ||u(T) - u_inf||_inf
  double margin_slope = 0.05;             // contraction: relative margin on -lambda1
  double margin_flat = 0.05;              // sharpness: |slope| bound below the threshold
  double margin_asymptotic = 0.30;        // sharpness: relative margin on the predicted rate
  double eigen_rel_tol = 0.01;            // eigen: relative error against closed forms
  std::vector<double> deltas;             // sharpness; empty selects threshold -/+ 0.5
  std::vector<std::size_t> grids = {101, 201, 401, 801};
  std::vector<std::size_t> steps = {10, 20, 40, 80};

  // flat "key = value" lines, '#' starts a comment; unknown keys are errors
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  // applies one key=value pair
  void set(const std::string& key, const std::string& value);

  ProblemParams params() const;
  GridPtr grid(std::size_t nodes = 0) const;
  // throws InvalidArgument before any solve
  void validate() const;
  nlohmann::json to_json() const;
};

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string rule;  // how value is compared with threshold
};

struct RunReport {
  nlohmann::json config;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<Verdict> verdicts;
  std::vector<std::string> files;  // series written next to the report
  double wall_seconds = 0.0;

  bool pass() const;
  nlohmann::json to_json() const;
  void add(std::string name, bool pass, double value, double threshold, std::string rule);
};

RunReport run_eigen(const ExperimentConfig& cfg);
RunReport run_stationary(const ExperimentConfig& cfg);
RunReport run_evolve(const ExperimentConfig& cfg);
RunReport run_stabilize(const ExperimentConfig& cfg);
RunReport run_contraction(const ExperimentConfig& cfg);
RunReport run_sharpness(const ExperimentConfig& cfg);
RunReport run_convergence(const ExperimentConfig& cfg);

// Dispatches on cfg.kind, creates cfg.out and writes report.json there.
RunReport run_experiment(const ExperimentConfig& cfg);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace splap
