// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "splap/barriers.hpp"
#include "splap/elliptic.hpp"
#include "splap/experiments.hpp"
#include "splap/plap.hpp"
#include "splap/rothe.hpp"

using namespace splap;
using std::numbers::pi;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// -(|D+u|^{p-2}D+u - |D-u|^{p-2}D-u)/h on a uniform 1D grid
double minus_plap_1d(const GridFunction& u, std::size_t i, double p, double h) {
  auto flux = [&](double d) { return std::copysign(std::pow(std::abs(d), p - 1.0), d); };
  return -(flux((u[i + 1] - u[i]) / h) - flux((u[i] - u[i - 1]) / h)) / h;
}

GridFunction smooth_random(const GridPtr& g, std::mt19937_64& rng, double shift, double amp) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a1 = U(rng), a2 = U(rng), a3 = U(rng), ph = U(rng);
  GridFunction out(g, 0.0, false);
  for (std::size_t k = 0; k < g->size(); ++k) {
    const double x = g->coord(k, 0);
    out[k] = shift + amp * (a1 * std::sin(pi * x + ph) + a2 * std::cos(3 * pi * x) +
                            a3 * std::sin(7 * pi * x));
  }
  return out;
}

double max_signed(const GridFunction& u, const GridFunction& v) {
  double m = -INFINITY;
  for (std::size_t k = 0; k < u.size(); ++k) m = std::max(m, u[k] - v[k]);
  return m;
}

const std::filesystem::path scratch = std::filesystem::temp_directory_path() / "splap_acceptance";

}  // namespace

int main() {
  criterion(1, "eigenpair accuracy", [] {
    bool ok = true;
    std::string d;
    auto one = [&](const GridPtr& g, double p, double ref, double tol, const char* name) {
      const auto t0 = Clock::now();
      const double l = first_eigenpair(g, p).lambda1;
      const double rel = std::abs(l - ref) / ref, secs = seconds_since(t0);
      ok = ok && rel <= tol && secs < 30.0;
      d += fmt("%s rel=%.2e (tol %.0e, %.2fs) ", name, rel, tol, secs);
    };
    const double pip = 2.0 * pi / (3.0 * std::sin(pi / 3.0));
    one(build_grid_1d(1.0, 400), 2.0, pi * pi, 1e-3, "1D p=2");
    one(build_grid_1d(1.0, 400), 3.0, 2.0 * std::pow(pip, 3.0), 1e-2, "1D p=3");
    one(build_grid_2d(1.0, 1.0, 81, 81), 2.0, 2.0 * pi * pi, 5e-3, "2D p=2");
    return Outcome{ok, d};
  });

  criterion(2, "barrier certificates", [] {
    auto g = build_grid_1d(1.0, 201);
    const double h = g->h(0);
    int certified = 0;
    double worst = -INFINITY;
    for (double p : {1.5, 2.0, 3.0})
      for (double delta : {0.5, 1.0, 2.0}) {
        const ProblemParams P{p, delta, {}};
        const BarrierPair bp = build_barriers(g, P, 1.0);
        bool ok = check_certificate(bp, P, BarrierTarget::stationary(g, 1.0, 0.0)).ok;
        // independent re-check of the residual signs
        for (std::size_t i = 1; i + 1 < g->size(); ++i) {
          const double au = minus_plap_1d(bp.under, i, p, h), su = std::pow(bp.under[i], -delta);
          const double ao = minus_plap_1d(bp.over, i, p, h), sv = std::pow(bp.over[i], -delta);
          const double ru = (au - su + 1.0) / (std::abs(au) + su + 1.0);
          const double ro = -(ao - sv - 1.0) / (std::abs(ao) + sv + 1.0);
          worst = std::max({worst, ru, ro});
          if (ru > 1e-12 || ro > 1e-12) ok = false;
          if (!(bp.under[i] > 0.0) || bp.under[i] > bp.over[i]) ok = false;
        }
        certified += ok;
      }
    return Outcome{certified == 9,
                   fmt("%d/9 pairs certified, worst scaled residual %.2e", certified, worst)};
  });

  criterion(3, "resolvent m-accretivity", [] {
    std::mt19937_64 rng(2024);
    auto g = build_grid_1d(1.0, 101);
    const double ps[] = {1.5, 2.0, 3.0}, ds[] = {0.5, 1.0, 2.0};
    double worst = -INFINITY;
    int count = 0;
    for (int s = 0; s < 50; ++s) {
      const ProblemParams P{ps[s % 3], ds[(s / 3) % 3], {}};
      const GridFunction f = smooth_random(g, rng, 0.5, 0.5);
      const GridFunction gg = smooth_random(g, rng, 0.5, 0.5);
      for (double lambda : {0.01, 1.0, 100.0}) {
        const GridFunction uf = solve_singular(g, P, lambda, f).first;
        const GridFunction ug = solve_singular(g, P, lambda, gg).first;
        worst = std::max(worst, max_abs_diff(uf, ug) - max_abs_diff(f, gg));
        ++count;
      }
    }
    return Outcome{worst <= 1e-7, fmt("%d solve pairs, max(||u(f)-u(g)|| - ||f-g||) = %.3e (tol 1e-7)",
                                      count, worst)};
  });

  criterion(4, "weak comparison", [] {
    std::mt19937_64 rng(99);
    auto g = build_grid_1d(1.0, 101);
    const double ps[] = {1.5, 2.0, 3.0}, ds[] = {0.5, 1.0, 2.0};
    const double lams[] = {0.01, 1.0, 100.0};
    double worst = -INFINITY;
    for (int s = 0; s < 50; ++s) {
      const ProblemParams P{ps[s % 3], ds[(s / 3) % 3], {}};
      const GridFunction g1 = smooth_random(g, rng, 0.3, 0.6);
      GridFunction bump = smooth_random(g, rng, 0.0, 0.4);
      for (std::size_t k = 0; k < bump.size(); ++k) bump[k] = std::abs(bump[k]);
      const GridFunction g2 = g1 + bump;
      const double lambda = lams[(s / 9) % 3];
      const GridFunction u1 = solve_singular(g, P, lambda, g1).first;
      const GridFunction u2 = solve_singular(g, P, lambda, g2).first;
      worst = std::max(worst, max_signed(u1, u2));
    }
    return Outcome{worst <= 1e-8, fmt("50 ordered pairs, max(u1 - u2) = %.3e (tol 1e-8)", worst)};
  });

  criterion(5, "discrete energy", [] {
    auto g = build_grid_1d(1.0, 101);
    double worst_conv = INFINITY, worst_def = -INFINITY;
    int runs = 0;
    for (double p : {1.5, 2.0, 3.0})
      for (double delta : {0.5, 1.0, 2.0}) {
        const ProblemParams P{p, delta, {}};
        const GridFunction u0 = cone_profile(g, p, delta).profile;
        Forcing h{[](double x, double, double t) { return 1.0 + 0.5 * std::sin(4.0 * x + 3.0 * t); }, 1.5};
        const EvolveReport a = evolve_St(g, P, u0, h, 0.5, 25).second;
        const ProblemParams Pr{p, delta, ReactionSpec::saturating(1.0)};
        const EvolveReport b = evolve_Pt(g, Pr, u0, 0.5, 25).second;
        for (const auto* r : {&a, &b}) {
          worst_conv = std::min(worst_conv, r->worst_convexity_rel);
          worst_def = std::max(worst_def, r->worst_defect_rel);
          ++runs;
        }
      }
    return Outcome{worst_conv >= -1e-12 && worst_def <= 1e-8,
                   fmt("%d runs, min convexity slack %.2e (>= -1e-12), max defect %.2e (<= 1e-8)",
                       runs, worst_conv, worst_def)};
  });

  criterion(6, "scheme fixed point", [] {
    const double tol = 1e-10;
    auto g = build_grid_1d(1.0, 101);
    const ProblemParams P{2.0, 1.5, ReactionSpec::saturating(1.0)};
    const GridFunction uinf = solve_stationary_Q(g, P).first;
    const double a = [&] {
      auto [tr, rep] = evolve_Pt(g, P, uinf, 1.0, 100);
      double m = 0.0;
      for (const auto& s : tr.steps) m = std::max(m, max_abs_diff(s, uinf));
      return m;
    }();
    const ProblemParams P0{2.0, 0.5, {}};
    const GridFunction U = solve_homogeneous_U(g, 2.0, 0.5);
    const double b = [&] {
      auto [tr, rep] = evolve_St(g, P0, U, Forcing::constant(0.0), 1.0, 100);
      double m = 0.0;
      for (const auto& s : tr.steps) m = std::max(m, max_abs_diff(s, U));
      return m;
    }();
    return Outcome{a <= 10 * tol && b <= 10 * tol,
                   fmt("reaction scheme drift %.2e, forced scheme drift %.2e (tol %.0e)", a, b, 10 * tol)};
  });

  criterion(7, "interpolant gap", [] {
    auto g = build_grid_1d(1.0, 101);
    bool ok = true;
    std::string d;
    for (double delta : {0.5, 1.0, 2.0}) {
      const ProblemParams P{2.0, delta, {}};
      const GridFunction u0 = cone_profile(g, 2.0, delta).profile;
      std::vector<double> C;
      for (std::size_t N : {10u, 20u, 40u, 80u}) {
        auto [tr, rep] = evolve_St(g, P, u0, Forcing::constant(1.0), 1.0, N);
        C.push_back(tr.interpolant_gap() / std::sqrt(tr.dt));
      }
      for (std::size_t i = 1; i < C.size(); ++i)
        ok = ok && std::isfinite(C[i]) && C[i] <= 2.0 * C[i - 1] && C[i] >= 0.5 * C[i - 1];
      d += fmt("delta=%.1f C=%.3f..%.3f ", delta, C.front(), C.back());
    }
    return Outcome{ok, d + "(halvings within 2x)"};
  });

  criterion(8, "stabilization", [] {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::stabilize;
    cfg.n = 101;
    cfg.p = 2.0;
    cfg.delta = 0.5;
    cfg.reaction_kind = "saturating";
    cfg.reaction_params = "1";
    cfg.T = 5.0;
    cfg.N = 500;
    cfg.verdict_tol = 1e-3;
    cfg.out = (scratch / "stabilize").string();
    const auto t0 = Clock::now();
    const RunReport r = run_experiment(cfg);
    const double secs = seconds_since(t0);
    const auto& m = r.metrics;
    return Outcome{r.pass() && secs < 120.0,
                   fmt("e(T) mid %.2e under %.2e over %.2e (< 1e-3), monotone viol %.1e/%.1e, "
                       "bracket viol %.1e (<= 1e-9)",
                       m["e_T"]["mid"].get<double>(), m["e_T"]["under"].get<double>(),
                       m["e_T"]["over"].get<double>(), m["monotone_violation_under"].get<double>(),
                       m["monotone_violation_over"].get<double>(), m["bracket_violation"].get<double>())};
  });

  criterion(9, "L2 contraction", [] {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::contraction;
    cfg.n = 101;
    cfg.p = 2.0;
    cfg.delta = 0.5;
    cfg.reaction_kind = "saturating";
    cfg.reaction_params = "1";
    // implicit Euler damps mode lambda by 1/(1 + dt lambda): small dt keeps the rate near lambda
    cfg.T = 0.5;
    cfg.N = 200;
    cfg.margin_slope = 0.05;
    cfg.out = (scratch / "contraction").string();
    const RunReport r = run_experiment(cfg);
    const double slope = r.metrics["l2_slope"].get<double>();
    const double l1 = r.metrics["lambda1"].get<double>();
    bool ok = false;
    for (const auto& v : r.verdicts)
      if (v.name == "l2_decay_slope") ok = v.pass;
    return Outcome{ok, fmt("slope %.3f vs -lambda1 + 5%% = %.3f (omega = %g)", slope, -0.95 * l1,
                           r.metrics["omega"].get<double>())};
  });

  criterion(10, "sharpness of the threshold", [] {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sharpness;
    cfg.p = 2.0;
    cfg.deltas = {2.5, 3.5};
    cfg.grids = {101, 201, 401, 801};
    cfg.lambda = 1.0;
    cfg.data = 1.0;
    cfg.out = (scratch / "sharpness").string();
    const auto t0 = Clock::now();
    const RunReport r = run_experiment(cfg);
    const double secs = seconds_since(t0);
    const auto& rows = r.metrics["rows"];
    std::string d;
    for (const auto& row : rows)
      d += fmt("delta=%.1f slopes W %.3f S %.3f (rate %.3f; Richardson %.3f/%.3f) ",
               row["delta"].get<double>(), row["slope_dirichlet"].get<double>(),
               row["slope_singular"].get<double>(),
               row["delta"].get<double>() < 3.0 ? 0.0 : row["predicted_rate"].get<double>(),
               row["richardson_rate_dirichlet"].get<double>(),
               row["richardson_rate_singular"].get<double>());
    return Outcome{r.pass() && secs < 300.0,
                   d + "(need |slope| <= 0.05 below, within 30% above)"};
  });

  criterion(11, "eps-monotonicity", [] {
    std::mt19937_64 rng(5);
    double worst1 = -INFINITY, worst2 = -INFINITY;
    const double ps[] = {1.5, 2.0, 3.0};
    const double ds[] = {0.5, 1.0, 2.0, 2.5};
    for (int s = 0; s < 10; ++s) {
      auto g = build_grid_1d(1.0, 101);
      const ProblemParams P{ps[s % 3], ds[s % 4], {}};
      const GridFunction data = smooth_random(g, rng, 0.5, 0.4);
      SolveOptions o;
      o.auto_barriers = false;
      const double eps = 1e-2 / (1 + s % 3), epst = eps / (2.0 + s % 5);
      const GridFunction ue = solve_regularized(g, P, 1.0, eps, data, nullptr, o);
      const GridFunction ut = solve_regularized(g, P, 1.0, epst, data, nullptr, o);
      worst1 = std::max(worst1, max_signed(ue, ut));
      worst2 = std::max(worst2, max_signed(ut + GridFunction(g, epst, false),
                                           ue + GridFunction(g, eps, false)));
    }
    return Outcome{worst1 <= 1e-8 && worst2 <= 1e-8,
                   fmt("10 problems, max(u_eps - u_epst) = %.2e, max(u_epst + epst - u_eps - eps) = "
                       "%.2e (tol 1e-8)",
                       worst1, worst2)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
