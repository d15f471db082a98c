#include "splap/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "splap/barriers.hpp"
#include "splap/elliptic.hpp"
#include "splap/plap.hpp"
#include "splap/rothe.hpp"

namespace splap {

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw InvalidArgument("config key '" + key + "': bad number '" + v + "'");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0.0 || x != std::floor(x)) throw InvalidArgument("config key '" + key + "': expected a count");
  return static_cast<std::size_t>(x);
}

template <class T, class F>
std::vector<T> to_list(const std::string& v, F&& conv) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(conv(item));
  }
  return out;
}

fs::path prepare_out(const ExperimentConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

SolveOptions solve_options(const ExperimentConfig& cfg) {
  SolveOptions o;
  o.tol = cfg.tol;
  o.eps0 = cfg.eps0;
  return o;
}

double max_decrease(const GridFunction& before, const GridFunction& after) {
  double m = 0.0;
  for (std::size_t k = 0; k < before.size(); ++k) m = std::max(m, before[k] - after[k]);
  return m;
}

// f nonincreasing on a sample of [0, hi]
bool reaction_nonincreasing(const ReactionSpec& r, double hi) {
  double prev = r.value(0.0);
  for (int i = 1; i <= 2000; ++i) {
    const double v = r.value(hi * i / 2000.0);
    if (v > prev + 1e-15 * std::abs(prev)) return false;
    prev = v;
  }
  return true;
}

void write_snapshots(const fs::path& path, const RotheTrajectory& tr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.precision(17);
  const Grid& g = tr.steps.front().grid();
  std::vector<std::size_t> idx;
  for (int q = 0; q <= 4; ++q) idx.push_back(static_cast<std::size_t>(std::lround(tr.N() * q / 4.0)));
  os << "node,x,y";
  for (std::size_t n : idx) os << ",t=" << tr.dt * static_cast<double>(n);
  os << '\n';
  for (std::size_t k = 0; k < g.size(); ++k) {
    os << k << ',' << g.coord(k, 0) << ',' << (g.dim() == 2 ? g.coord(k, 1) : 0.0);
    for (std::size_t n : idx) os << ',' << tr.steps[n][k];
    os << '\n';
  }
}

// max |a - b| over the nodes of the coarse grid, fine grid with twice the spacing count
double nested_diff(const GridFunction& coarse, const GridFunction& fine) {
  const Grid& gc = coarse.grid();
  const Grid& gf = fine.grid();
  double m = 0.0;
  if (gc.dim() == 1) {
    for (std::size_t i = 0; i < gc.n(0); ++i) m = std::max(m, std::abs(coarse[i] - fine[2 * i]));
  } else {
    for (std::size_t j = 0; j < gc.n(1); ++j)
      for (std::size_t i = 0; i < gc.n(0); ++i)
        m = std::max(m, std::abs(coarse[gc.index(i, j)] - fine[gf.index(2 * i, 2 * j)]));
  }
  return m;
}

bool nested(const std::vector<std::size_t>& ns) {
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] - 1 != 2 * (ns[i - 1] - 1)) return false;
  return true;
}

double interior_power_integral(const GridFunction& u, double e) {
  const auto w = u.grid().weights();
  double s = 0.0;
  for (std::size_t k : u.grid().interior()) s += w[k] * std::pow(u[k], e);
  return s;
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& s) {
  static const std::pair<const char*, ExperimentKind> table[] = {
      {"eigen", ExperimentKind::eigen},         {"stationary", ExperimentKind::stationary},
      {"evolve", ExperimentKind::evolve},       {"stabilize", ExperimentKind::stabilize},
      {"contraction", ExperimentKind::contraction}, {"sharpness", ExperimentKind::sharpness},
      {"convergence", ExperimentKind::convergence}};
  for (const auto& [name, k] : table)
    if (s == name) return k;
  throw InvalidArgument("unknown experiment kind: " + s);
}

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::eigen: return "eigen";
    case ExperimentKind::stationary: return "stationary";
    case ExperimentKind::evolve: return "evolve";
    case ExperimentKind::stabilize: return "stabilize";
    case ExperimentKind::contraction: return "contraction";
    case ExperimentKind::sharpness: return "sharpness";
    case ExperimentKind::convergence: return "convergence";
  }
  return "?";
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto num = [&] { return to_double(key, v); };
  auto cnt = [&] { return to_size(key, v); };
  if (key == "experiment") kind = parse_experiment_kind(v);
  else if (key == "dim") dim = static_cast<int>(cnt());
  else if (key == "extent") extent = num();
  else if (key == "n") n = cnt();
  else if (key == "p") p = num();
  else if (key == "delta") delta = num();
  else if (key == "reaction.kind") reaction_kind = v;
  else if (key == "reaction.params") reaction_params = v;
  else if (key == "T") T = num();
  else if (key == "N") N = cnt();
  else if (key == "eps0") eps0 = num();
  else if (key == "tol") tol = num();
  else if (key == "out") out = v;
  else if (key == "lambda") lambda = num();
  else if (key == "data") data = num();
  else if (key == "initial") initial = v;
  else if (key == "verdict.tol") verdict_tol = num();
  else if (key == "margin.slope") margin_slope = num();
  else if (key == "margin.flat") margin_flat = num();
  else if (key == "margin.asymptotic") margin_asymptotic = num();
  else if (key == "eigen.rel_tol") eigen_rel_tol = num();
  else if (key == "deltas") deltas = to_list<double>(v, [&](const std::string& s) { return to_double(key, s); });
  else if (key == "grids") grids = to_list<std::size_t>(v, [&](const std::string& s) { return to_size(key, s); });
  else if (key == "steps") steps = to_list<std::size_t>(v, [&](const std::string& s) { return to_size(key, s); });
  else throw InvalidArgument("unknown config key: " + key);
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

ProblemParams ExperimentConfig::params() const {
  ProblemParams P;
  P.p = p;
  P.delta = delta;
  P.reaction = ReactionSpec::parse(reaction_params.empty() ? reaction_kind
                                                           : reaction_kind + ":" + reaction_params);
  return P;
}

GridPtr ExperimentConfig::grid(std::size_t nodes) const {
  const std::size_t m = nodes ? nodes : n;
  if (dim == 1) return build_grid_1d(extent, m);
  return build_grid_2d(extent, extent, m, m);
}

void ExperimentConfig::validate() const {
  if (dim != 1 && dim != 2) throw InvalidArgument("dim must be 1 or 2");
  if (!(extent > 0.0)) throw InvalidArgument("extent must be positive");
  if (n < 3) throw InvalidArgument("n must be at least 3");
  if (!(T > 0.0) || N == 0) throw InvalidArgument("T and N must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!(eps0 >= 0.0)) throw InvalidArgument("eps0 must be nonnegative");
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (!(verdict_tol > 0.0) || !(margin_slope > 0.0) || !(margin_flat > 0.0) ||
      !(margin_asymptotic > 0.0) || !(eigen_rel_tol > 0.0))
    throw InvalidArgument("margins and tolerances must be positive");
  static const char* inits[] = {"auto", "profile", "under", "over", "mid"};
  if (std::find(std::begin(inits), std::end(inits), initial) == std::end(inits))
    throw InvalidArgument("initial must be one of auto, profile, under, over, mid");
  params().validate();
  for (double d : deltas)
    if (!(d > 0.0)) throw InvalidArgument("deltas must be positive");
  auto increasing = [](const std::vector<std::size_t>& v, std::size_t lo) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] < lo || (i && v[i] <= v[i - 1])) return false;
    return true;
  };
  if (!increasing(grids, 3)) throw InvalidArgument("grids must increase and be at least 3");
  if (!increasing(steps, 1)) throw InvalidArgument("steps must increase");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"experiment", experiment_kind_name(kind)},
          {"dim", dim},
          {"extent", extent},
          {"n", n},
          {"p", p},
          {"delta", delta},
          {"reaction", params().reaction.describe()},
          {"T", T},
          {"N", N},
          {"eps0", eps0},
          {"tol", tol},
          {"out", out},
          {"lambda", lambda},
          {"data", data},
          {"initial", initial},
          {"verdict.tol", verdict_tol},
          {"margin.slope", margin_slope},
          {"margin.flat", margin_flat},
          {"margin.asymptotic", margin_asymptotic},
          {"eigen.rel_tol", eigen_rel_tol},
          {"deltas", deltas},
          {"grids", grids},
          {"steps", steps}};
}

bool RunReport::pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

void RunReport::add(std::string name, bool ok, double value, double threshold, std::string rule) {
  verdicts.push_back({std::move(name), ok, value, threshold, std::move(rule)});
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& d : verdicts)
    v.push_back({{"name", d.name},
                 {"pass", d.pass},
                 {"value", d.value},
                 {"threshold", d.threshold},
                 {"rule", d.rule}});
  return {{"config", config},      {"metrics", metrics}, {"verdicts", v},
          {"pass", pass()},        {"files", files},     {"wall_seconds", wall_seconds}};
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope fit needs two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

RunReport run_eigen(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const GridPtr g = cfg.grid();
  const EigenPair ep = first_eigenpair(g, cfg.p);
  write_csv((dir / "phi1.csv").string(), ep.phi1);
  r.files.push_back("phi1.csv");
  r.metrics["lambda1"] = ep.lambda1;
  r.metrics["residual"] = ep.residual;
  r.metrics["iterations"] = ep.iterations;

  const double pi = std::numbers::pi;
  double ref = 0.0;
  if (cfg.dim == 1) {
    const double pip = 2.0 * pi / (cfg.p * std::sin(pi / cfg.p));
    ref = (cfg.p - 1.0) * std::pow(pip / cfg.extent, cfg.p);
  } else if (cfg.p == 2.0) {
    ref = 2.0 * pi * pi / (cfg.extent * cfg.extent);
  }
  if (ref > 0.0) {
    const double rel = std::abs(ep.lambda1 - ref) / ref;
    r.metrics["reference"] = ref;
    r.metrics["rel_error"] = rel;
    r.add("lambda1_vs_closed_form", rel <= cfg.eigen_rel_tol, rel, cfg.eigen_rel_tol, "<=");
  }
  r.add("positive_eigenfunction", !ep.clamped, ep.clamped ? 1.0 : 0.0, 0.0, "==");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_stationary(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const GridPtr g = cfg.grid();
  const ProblemParams P = cfg.params();
  const BarrierPair bp = stationary_barriers(g, P);
  StationaryOptions so;
  so.tol = cfg.tol;
  so.barriers = &bp;
  auto [u, rep] = solve_stationary_Q(g, P, so);
  write_csv((dir / "solution.csv").string(), u);
  write_certificate_csv((dir / "certificate.csv").string(), bp);
  r.files = {"solution.csv", "certificate.csv"};
  const ConeFit fit = cone_fit(u, cone_profile(g, P.p, P.delta));
  r.metrics["stationary"] = nlohmann::json::parse(rep.to_json());
  r.metrics["eta"] = bp.eta;
  r.metrics["M"] = bp.M;
  r.metrics["cone_c1"] = fit.c1;
  r.metrics["cone_c2"] = fit.c2;
  r.metrics["u_max"] = norm_Linf(u);
  r.add("sandwich", rep.sandwich_ok, rep.sandwich_ok, 1.0, "==");
  r.add("monotone_iterates", rep.min_increment >= -10.0 * cfg.tol, rep.min_increment,
        -10.0 * cfg.tol, ">=");
  r.add("cone_membership", fit.member, fit.c1, 0.0, ">");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_evolve(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const GridPtr g = cfg.grid();
  const ProblemParams P = cfg.params();
  const bool forced = P.reaction.kind == ReactionSpec::Kind::none;

  EvolveOptions eo;
  eo.solve = solve_options(cfg);
  BarrierPair bp;
  GridFunction u0;
  const std::string init = cfg.initial == "auto" ? (forced ? "profile" : "mid") : cfg.initial;
  if (init == "profile") {
    u0 = cone_profile(g, P.p, P.delta).profile;
  } else {
    bp = forced ? build_barriers(g, P, std::max(std::abs(cfg.data), 1e-3)) : stationary_barriers(g, P);
    eo.barriers = &bp;
    u0 = init == "under" ? bp.under : init == "over" ? bp.over : 0.5 * (bp.under + bp.over);
  }
  auto [tr, rep] = forced ? evolve_St(g, P, u0, Forcing::constant(cfg.data), cfg.T, cfg.N, eo)
                          : evolve_Pt(g, P, u0, cfg.T, cfg.N, eo);
  write_energy_csv((dir / "energy.csv").string(), rep.energy);
  write_snapshots(dir / "snapshots.csv", tr);
  r.files = {"energy.csv", "snapshots.csv"};
  r.metrics["evolve"] = nlohmann::json::parse(rep.to_json());
  r.metrics["scheme"] = forced ? "forced" : "reaction";
  r.metrics["initial"] = init;
  r.metrics["interpolant_gap"] = tr.interpolant_gap();
  r.add("convexity", rep.worst_convexity_rel >= -1e-12, rep.worst_convexity_rel, -1e-12, ">=");
  r.add("energy_defect", rep.worst_defect_rel <= 1e-8, rep.worst_defect_rel, 1e-8, "<=");
  r.add("sandwich", rep.sandwich_ok, rep.sandwich_ok, 1.0, "==");
  r.add("no_active_clamp", rep.max_final_active == 0, static_cast<double>(rep.max_final_active),
        0.0, "==");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_stabilize(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const GridPtr g = cfg.grid();
  const ProblemParams P = cfg.params();
  if (!P.reaction.ratio_nonincreasing(P.p))
    throw InvalidArgument("stabilization needs f(t)/t^{p-1} nonincreasing");

  StationaryOptions so;
  so.tol = cfg.tol;
  auto [uinf, srep] = solve_stationary_Q(g, P, so);
  const BarrierPair bp = stationary_barriers(g, P, &uinf);
  const double dt = cfg.T / static_cast<double>(cfg.N);
  double lo = INFINITY;
  for (std::size_t k : g->interior()) lo = std::min(lo, bp.under[k]);
  const double K = P.reaction.lipschitz(lo, norm_Linf(bp.over));
  if (!(dt * K < 1.0)) throw InvalidArgument("monotone trajectories need dt < 1/K");

  EvolveOptions eo;
  eo.solve = solve_options(cfg);
  eo.barriers = &bp;
  const GridFunction mid = 0.5 * (bp.under + bp.over);
  auto [a, ra] = evolve_Pt(g, P, bp.under, cfg.T, cfg.N, eo);
  auto [b, rb] = evolve_Pt(g, P, bp.over, cfg.T, cfg.N, eo);
  auto [c, rc] = evolve_Pt(g, P, mid, cfg.T, cfg.N, eo);

  const bool seminorm = P.p == 2.0 && P.delta < 3.0;
  const double jitter = 10.0 * cfg.tol;
  double mono_under = 0.0, mono_over = 0.0, bracket = 0.0, e_mono = 0.0;
  std::vector<double> eu, eo_, em;
  std::ofstream os(dir / "decay.csv", std::ios::binary);
  os.precision(17);
  os << "t,e_under,e_over,e_mid" << (seminorm ? ",w12_under,w12_over,w12_mid" : "") << '\n';
  for (std::size_t n = 0; n <= cfg.N; ++n) {
    eu.push_back(max_abs_diff(a.steps[n], uinf));
    eo_.push_back(max_abs_diff(b.steps[n], uinf));
    em.push_back(max_abs_diff(c.steps[n], uinf));
    os << dt * static_cast<double>(n) << ',' << eu.back() << ',' << eo_.back() << ',' << em.back();
    if (seminorm)
      os << ',' << seminorm_W1p(a.steps[n] - uinf, 2.0) << ',' << seminorm_W1p(b.steps[n] - uinf, 2.0)
         << ',' << seminorm_W1p(c.steps[n] - uinf, 2.0);
    os << '\n';
    if (n > 0) {
      mono_under = std::max(mono_under, max_decrease(a.steps[n - 1], a.steps[n]));
      mono_over = std::max(mono_over, max_decrease(b.steps[n], b.steps[n - 1]));
      e_mono = std::max({e_mono, eu[n] - eu[n - 1], eo_[n] - eo_[n - 1]});
    }
    bracket = std::max({bracket, max_decrease(a.steps[n], c.steps[n]),
                        max_decrease(c.steps[n], b.steps[n])});
  }
  r.files = {"decay.csv"};
  r.metrics["stationary"] = nlohmann::json::parse(srep.to_json());
  r.metrics["K"] = K;
  r.metrics["e_T"] = {{"under", eu.back()}, {"over", eo_.back()}, {"mid", em.back()}};
  r.metrics["monotone_violation_under"] = mono_under;
  r.metrics["monotone_violation_over"] = mono_over;
  r.metrics["bracket_violation"] = bracket;
  r.metrics["decay_increase"] = e_mono;
  const double worst_e = std::max({eu.back(), eo_.back(), em.back()});
  r.add("e_T", worst_e < cfg.verdict_tol, worst_e, cfg.verdict_tol, "<");
  r.add("monotone_under_start", mono_under <= jitter, mono_under, jitter, "<=");
  r.add("monotone_over_start", mono_over <= jitter, mono_over, jitter, "<=");
  r.add("bracket_mid", bracket <= jitter, bracket, jitter, "<=");
  r.add("energy", ra.energy_ok && rb.energy_ok && rc.energy_ok,
        std::max({ra.worst_defect_rel, rb.worst_defect_rel, rc.worst_defect_rel}), 1e-8, "<=");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_contraction(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const GridPtr g = cfg.grid();
  const ProblemParams P = cfg.params();
  const bool forced = P.reaction.kind == ReactionSpec::Kind::none;
  const double lambda1 = first_eigenpair(g, P.p).lambda1;
  const BarrierPair bp =
      forced ? build_barriers(g, P, std::max(std::abs(cfg.data), 1e-3)) : stationary_barriers(g, P);
  const double top = norm_Linf(bp.over);
  const bool nonincreasing = reaction_nonincreasing(P.reaction, top);
  const double omega = nonincreasing ? 0.0 : P.reaction.lipschitz(0.0, top);

  EvolveOptions eo;
  eo.solve = solve_options(cfg);
  eo.barriers = &bp;
  auto run = [&](const GridFunction& u0) {
    return forced ? evolve_St(g, P, u0, Forcing::constant(cfg.data), cfg.T, cfg.N, eo)
                  : evolve_Pt(g, P, u0, cfg.T, cfg.N, eo);
  };
  auto [a, ra] = run(bp.under);
  auto [b, rb] = run(bp.over);
  auto [a2, ra2] = run(bp.under);

  std::vector<double> ts, logs;
  double self_gap = 0.0;
  const double gap0 = norm_Lq(a.steps[0] - b.steps[0], 2.0);
  std::ofstream os(dir / "contraction.csv", std::ios::binary);
  os.precision(17);
  os << "t,gap_L2,gap_Linf\n";
  for (std::size_t n = 0; n <= cfg.N; ++n) {
    const double t = a.dt * static_cast<double>(n);
    const double gap = norm_Lq(a.steps[n] - b.steps[n], 2.0);
    os << t << ',' << gap << ',' << max_abs_diff(a.steps[n], b.steps[n]) << '\n';
    // stop before the gap reaches the solver noise floor
    if (gap > 1e3 * cfg.tol * std::max(1.0, gap0)) {
      ts.push_back(t);
      logs.push_back(std::log(gap));
    }
    self_gap = std::max(self_gap, max_abs_diff(a.steps[n], a2.steps[n]));
  }
  r.files = {"contraction.csv"};
  r.metrics["lambda1"] = lambda1;
  r.metrics["omega"] = omega;
  r.metrics["reaction_nonincreasing"] = nonincreasing;
  r.metrics["self_gap"] = self_gap;
  r.add("identical_data_zero_gap", self_gap == 0.0, self_gap, 0.0, "==");

  if (P.p == 2.0 && ts.size() >= 2) {
    const double slope = fit_slope(ts, logs);
    const double bound = omega - lambda1 + cfg.margin_slope * lambda1;
    r.metrics["l2_slope"] = slope;
    r.metrics["l2_fit_points"] = ts.size();
    r.add("l2_decay_slope", slope <= bound, slope, bound, "<=");
  }
  const StabilityReport linf = linf_stability_check_reaction(a, b, omega, 10.0 * cfg.tol);
  r.metrics["linf_worst_margin"] = linf.worst_margin;
  r.add("linf_exponential_bound", linf.pass, linf.worst_margin, 0.0, ">=");

  // forced scheme with two different forcings: additive L-inf estimate
  ProblemParams plain = P;
  plain.reaction = ReactionSpec::none();
  auto [s1, rs1] = evolve_St(g, plain, bp.under, Forcing::constant(cfg.data), cfg.T, cfg.N,
                             EvolveOptions{eo.solve});
  auto [s2, rs2] = evolve_St(g, plain, bp.over, Forcing::constant(cfg.data + 0.5), cfg.T, cfg.N,
                             EvolveOptions{eo.solve});
  const StabilityReport add = linf_stability_check(s1, s2, 10.0 * cfg.tol);
  r.metrics["forced_linf_worst_margin"] = add.worst_margin;
  r.add("linf_forced_bound", add.pass, add.worst_margin, 0.0, ">=");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_sharpness(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  ProblemParams P = cfg.params();
  const double thr = P.threshold();
  const std::vector<double> deltas =
      cfg.deltas.empty() ? std::vector<double>{thr - 0.5, thr + 0.5} : cfg.deltas;
  if (cfg.grids.size() < 2) throw InvalidArgument("sharpness needs at least two grids");

  std::ofstream os(dir / "sharpness.csv", std::ios::binary);
  os.precision(17);
  os << "delta,n,h,dirichlet,singular_integral\n";
  r.files = {"sharpness.csv"};
  r.metrics["threshold"] = thr;
  nlohmann::json rows = nlohmann::json::array();
  for (double delta : deltas) {
    P.delta = delta;
    const double beta = P.p / (delta + P.p - 1.0);
    const double rate = (beta - 1.0) * P.p + 1.0;  // exponent of h in both quantities
    std::vector<double> lh, lw, ls, W, S;
    for (std::size_t n : cfg.grids) {
      const GridPtr g = cfg.grid(n);
      SolveOptions so = solve_options(cfg);
      auto [u, rep] = solve_singular(g, P, cfg.lambda, GridFunction(g, cfg.data, false), so);
      const double w = std::pow(seminorm_W1p(u, P.p), P.p);
      const double s = interior_power_integral(u, 1.0 - delta);
      const double h = g->h(0);
      os << delta << ',' << n << ',' << h << ',' << w << ',' << s << '\n';
      lh.push_back(std::log(h));
      lw.push_back(std::log(w));
      ls.push_back(std::log(s));
      W.push_back(w);
      S.push_back(s);
    }
    const double sw = fit_slope(lh, lw), ss = fit_slope(lh, ls);
    nlohmann::json row{{"delta", delta},
                       {"beta", beta},
                       {"predicted_rate", rate},
                       {"slope_dirichlet", sw},
                       {"slope_singular", ss},
                       {"below_threshold", delta < thr}};
    // Richardson view: successive differences on halved grids give the exponent of h
    if (nested(cfg.grids) && W.size() >= 3) {
      auto observed = [](const std::vector<double>& v) {
        const std::size_t k = v.size() - 1;
        return -std::log2((v[k] - v[k - 1]) / (v[k - 1] - v[k - 2]));
      };
      const double qw = observed(W), qs = observed(S);
      row["richardson_rate_dirichlet"] = qw;
      row["richardson_rate_singular"] = qs;
      if (qw > 0.0) row["extrapolated_dirichlet"] = W.back() + (W.back() - W[W.size() - 2]) / (std::pow(2.0, qw) - 1.0);
      if (qs > 0.0) row["extrapolated_singular"] = S.back() + (S.back() - S[S.size() - 2]) / (std::pow(2.0, qs) - 1.0);
    }
    rows.push_back(row);
    std::ostringstream tag;
    tag << "delta=" << delta;
    if (delta < thr) {
      const double worst = std::max(std::abs(sw), std::abs(ss));
      r.add("bounded_" + tag.str(), worst <= cfg.margin_flat, worst, cfg.margin_flat, "|slope| <=");
    } else {
      for (const auto& [name, sl] : {std::pair<const char*, double>{"dirichlet", sw}, {"singular", ss}}) {
        const double dev = rate < 0.0 ? std::abs(sl - rate) / std::abs(rate) : INFINITY;
        const bool ok = rate < 0.0 ? sl < 0.0 && dev <= cfg.margin_asymptotic : sl < 0.0;
        r.add(std::string("divergent_") + name + "_" + tag.str(), ok, sl, rate,
              "negative, within margin.asymptotic of rate");
      }
    }
  }
  r.metrics["rows"] = rows;
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport r;
  r.config = cfg.to_json();
  const fs::path dir = prepare_out(cfg);
  const ProblemParams P = cfg.params();
  if (!nested(cfg.grids) || cfg.grids.size() < 2)
    throw InvalidArgument("convergence grids must halve the spacing, e.g. 51,101,201");

  StationaryOptions so;
  so.tol = cfg.tol;
  std::vector<GridFunction> sols;
  for (std::size_t n : cfg.grids) sols.push_back(solve_stationary_Q(cfg.grid(n), P, so).first);
  const GridFunction again = solve_stationary_Q(cfg.grid(cfg.grids.front()), P, so).first;

  std::ofstream hs(dir / "convergence_h.csv", std::ios::binary);
  hs.precision(17);
  hs << "n,h,diff_inf,slope,integral\n";
  const double same = max_abs_diff(sols.front(), again);
  hs << cfg.grids.front() << ',' << sols.front().grid().h(0) << ',' << same << ",," << integrate(sols.front()) << '\n';
  std::vector<double> dh, hslopes;
  for (std::size_t l = 0; l + 1 < sols.size(); ++l) {
    dh.push_back(nested_diff(sols[l], sols[l + 1]));
    const double sl = l ? std::log2(dh[l - 1] / dh[l]) : NAN;
    if (l) hslopes.push_back(sl);
    hs << cfg.grids[l + 1] << ',' << sols[l + 1].grid().h(0) << ',' << dh[l] << ',';
    if (l) hs << sl;
    hs << ',' << integrate(sols[l + 1]) << '\n';
  }
  r.metrics["identical_grid_diff"] = same;
  r.metrics["h_diffs"] = dh;
  r.metrics["h_slopes"] = hslopes;
  r.add("identical_grid_zero_row", same == 0.0, same, 0.0, "==");
  if (!hslopes.empty()) {
    const double q = hslopes.back();
    const std::size_t k = sols.size() - 1;
    const double Ik = integrate(sols[k]), Ik1 = integrate(sols[k - 1]);
    if (q > 0.0) r.metrics["h_extrapolated_integral"] = Ik + (Ik - Ik1) / (std::pow(2.0, q) - 1.0);
    if (P.p == 2.0 && P.delta < 1.0) r.add("h_slope", q >= 1.0, q, 1.0, ">=");
  }

  // time refinement on the base grid
  const GridPtr g = cfg.grid();
  const bool forced = P.reaction.kind == ReactionSpec::Kind::none;
  // start with a bounded defect: the steady state for the constant source 2 max(|data|, 1)
  ProblemParams shifted = P;
  shifted.reaction = ReactionSpec::constant(2.0 * std::max(std::abs(cfg.data), 1.0));
  const GridFunction u0 = solve_stationary_Q(g, shifted, so).first;
  EvolveOptions eo;
  eo.solve = solve_options(cfg);
  std::vector<GridFunction> finals;
  for (std::size_t N : cfg.steps) {
    auto tr = forced ? evolve_St(g, P, u0, Forcing::constant(cfg.data), cfg.T, N, eo).first
                     : evolve_Pt(g, P, u0, cfg.T, N, eo).first;
    finals.push_back(tr.steps.back());
  }
  std::ofstream ts(dir / "convergence_dt.csv", std::ios::binary);
  ts.precision(17);
  ts << "N,dt,diff_inf,slope\n";
  std::vector<double> dd, tslopes;
  for (std::size_t l = 0; l + 1 < finals.size(); ++l) {
    dd.push_back(max_abs_diff(finals[l], finals[l + 1]));
    const double ratio = static_cast<double>(cfg.steps[l + 1]) / static_cast<double>(cfg.steps[l]);
    ts << cfg.steps[l + 1] << ',' << cfg.T / static_cast<double>(cfg.steps[l + 1]) << ',' << dd[l] << ',';
    if (l) {
      const double sl = std::log(dd[l - 1] / dd[l]) / std::log(ratio);
      tslopes.push_back(sl);
      ts << sl;
    }
    ts << '\n';
  }
  r.files = {"convergence_h.csv", "convergence_dt.csv"};
  r.metrics["dt_diffs"] = dd;
  r.metrics["dt_slopes"] = tslopes;
  if (!tslopes.empty())
    r.add("dt_slope", std::abs(tslopes.back() - 1.0) <= 0.2, tslopes.back(), 1.0, "within 0.2 of");
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport r;
  switch (cfg.kind) {
    case ExperimentKind::eigen: r = run_eigen(cfg); break;
    case ExperimentKind::stationary: r = run_stationary(cfg); break;
    case ExperimentKind::evolve: r = run_evolve(cfg); break;
    case ExperimentKind::stabilize: r = run_stabilize(cfg); break;
    case ExperimentKind::contraction: r = run_contraction(cfg); break;
    case ExperimentKind::sharpness: r = run_sharpness(cfg); break;
    case ExperimentKind::convergence: r = run_convergence(cfg); break;
  }
  const fs::path dir = prepare_out(cfg);
  std::ofstream os(dir / "report.json", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write report in " + cfg.out);
  os << r.to_json().dump(2) << '\n';
  return r;
}

}  // namespace splap
