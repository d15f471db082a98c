#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "splap/elliptic.hpp"
#include "splap/plap.hpp"
#include "splap/rothe.hpp"

using namespace splap;
using std::numbers::pi;

namespace {

double max_diff_signed(const GridFunction& u, const GridFunction& v) {
  double m = -INFINITY;
  for (std::size_t k = 0; k < u.size(); ++k) m = std::max(m, u[k] - v[k]);
  return m;
}

// u - dt u'' = rhs, zero Dirichlet, uniform 1D grid, Thomas algorithm
std::vector<double> heat_step_1d(const std::vector<double>& rhs, double dt, double h) {
  const std::size_t m = rhs.size() - 2;
  const double off = -dt / (h * h), diag = 1.0 + 2.0 * dt / (h * h);
  std::vector<double> c(m), d(m), x(rhs.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double den = diag - (i ? off * c[i - 1] : 0.0);
    c[i] = off / den;
    d[i] = (rhs[i + 1] - (i ? off * d[i - 1] : 0.0)) / den;
  }
  for (std::size_t i = m; i-- > 0;) x[i + 1] = d[i] - (i + 1 < m ? c[i] * x[i + 2] : 0.0);
  return x;
}

}  // namespace

TEST_CASE("forcing time averages") {
  auto g = build_grid_1d(1.0, 11);
  const auto c = forcing_average(g, [](double, double, double) { return 2.5; }, 3, 0.1);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(c[k] == 2.5);
  const auto lin = forcing_average(g, [](double, double, double t) { return t; }, 1, 0.2);
  CHECK(lin[4] == doctest::Approx(0.1).epsilon(1e-15));
  const auto sn = forcing_average(g, [](double, double, double t) { return std::sin(t); }, 1, 0.1);
  CHECK(std::abs(sn[0] - (1.0 - std::cos(0.1)) / 0.1) <= 1e-10);
  const auto sx = forcing_average(g, [](double x, double, double t) { return x * t; }, 2, 0.5);
  CHECK(sx[10] == doctest::Approx(0.75));
  CHECK_THROWS_AS(forcing_average(g, [](double, double, double) { return 0.0; }, 0, 0.1),
                  InvalidArgument);
}

TEST_CASE("rothe step: fixed point and sandwich") {
  auto g = build_grid_1d(1.0, 101);
  const ProblemParams P{2.0, 1.5, ReactionSpec::saturating(1.0)};
  auto [uinf, srep] = solve_stationary_Q(g, P);
  const GridFunction h = P.reaction.apply(uinf);
  const BarrierPair bp = stationary_barriers(g, P, &uinf);
  SolveOptions o;
  const GridFunction next = rothe_step(uinf, 0.01, h, P, &bp, o);
  CHECK(max_abs_diff(next, uinf) <= 10 * o.tol);

  // arbitrary admissible data stays in the box
  GridFunction mid = 0.5 * (bp.under + bp.over);
  GridFunction h2(g, 0.3, false);
  SolveReport rep;
  const GridFunction v = rothe_step(mid, 0.05, h2, P, &bp, o, &rep);
  CHECK(rep.final_active == 0);
  CHECK(max_diff_signed(bp.under, v) <= 0.0);
  CHECK(max_diff_signed(v, bp.over) <= 0.0);
}

TEST_CASE("rothe step reduces to a heat step for large data") {
  auto g = build_grid_1d(1.0, 101);
  const double dt = 0.01, A = 1e6;
  GridFunction prev(g);
  for (std::size_t k : g->interior()) prev[k] = A * std::sin(pi * g->coord(k, 0));
  GridFunction h(g, 3.0, false);
  const GridFunction u = rothe_step(prev, dt, h, ProblemParams{2.0, 2.0, {}}, nullptr, {});
  std::vector<double> rhs(g->size());
  for (std::size_t k = 0; k < g->size(); ++k) rhs[k] = prev[k] + dt * h[k];
  const auto lin = heat_step_1d(rhs, dt, g->h(0));
  double err = 0.0;
  for (std::size_t k = 0; k < g->size(); ++k) err = std::max(err, std::abs(u[k] - lin[k]));
  CHECK(err <= 1e-8 * norm_Linf(u));
}

TEST_CASE("evolution from a steady state stays put") {
  auto g = build_grid_1d(1.0, 101);
  const ProblemParams P{2.0, 0.5, {}};
  const GridFunction U = solve_homogeneous_U(g, 2.0, 0.5);
  auto [tr, rep] = evolve_St(g, P, U, Forcing::constant(0.0), 1.0, 50);
  double drift = 0.0;
  for (const auto& s : tr.steps) drift = std::max(drift, max_abs_diff(s, U));
  CHECK(drift <= 10 * 1e-10);
  CHECK(rep.energy_ok);
}

TEST_CASE("energy ledger on evolutions") {
  auto g = build_grid_1d(1.0, 81);
  for (double p : {1.5, 2.0, 3.0}) {
    for (double delta : {0.5, 1.0, 2.0}) {
      INFO("p=" << p << " delta=" << delta);
      const ProblemParams P{p, delta, {}};
      const GridFunction u0 = cone_profile(g, p, delta).profile;
      Forcing h{[](double x, double, double t) { return 1.0 + std::sin(3.0 * x + t); }, 2.0};
      auto [tr, rep] = evolve_St(g, P, u0, h, 0.2, 20);
      CHECK(rep.energy_ok);
      CHECK(rep.sandwich_ok);
      CHECK(rep.max_final_active == 0);
      CHECK(rep.energy.size() == 20);
      for (const auto& r : rep.energy) {
        CHECK(r.convexity_dirichlet_rel >= -1e-12);
        CHECK(r.convexity_singular_rel >= -1e-12);
        CHECK(r.energy_defect_rel <= 1e-8);
      }
    }
  }
}

TEST_CASE("trajectory views") {
  auto g = build_grid_1d(1.0, 51);
  const ProblemParams P{2.0, 1.0, {}};
  const GridFunction u0 = cone_profile(g, 2.0, 1.0).profile;
  auto [tr, rep] = evolve_St(g, P, u0, Forcing::constant(1.0), 0.5, 10);
  CHECK(tr.N() == 10);
  CHECK(tr.T() == doctest::Approx(0.5));
  CHECK(max_abs_diff(tr.steps[0], u0) == 0.0);
  for (std::size_t n = 1; n <= 10; ++n) {
    const double t = tr.dt * n;
    CHECK(max_abs_diff(tr.piecewise_linear(t), tr.steps[n]) <= 1e-14);
    CHECK(max_abs_diff(tr.piecewise_constant(t), tr.steps[n]) == 0.0);
    CHECK(max_abs_diff(tr.piecewise_constant(t - 0.5 * tr.dt), tr.steps[n]) == 0.0);
  }
  const GridFunction half = tr.piecewise_linear(0.25 * tr.dt);
  const GridFunction expect = tr.steps[0] + 0.25 * (tr.steps[1] - tr.steps[0]);
  CHECK(max_abs_diff(half, expect) <= 1e-14);
}

TEST_CASE("time refinement and interpolant gap") {
  auto g = build_grid_1d(1.0, 51);
  const ProblemParams P{2.0, 0.5, {}};
  GridFunction u0 = cone_profile(g, 2.0, 0.5).profile;
  Forcing h{[](double, double, double t) { return 1.0 + t; }, 2.0};
  std::vector<GridFunction> finals;
  std::vector<double> C, tdiff;
  for (std::size_t N : {10u, 20u, 40u, 80u}) {
    auto [tr, rep] = evolve_St(g, P, u0, h, 0.5, N);
    finals.push_back(tr.steps.back());
    C.push_back(tr.interpolant_gap() / std::sqrt(tr.dt));
    tdiff.push_back(rep.max_time_derivative);
  }
  const double e1 = max_abs_diff(finals[0], finals[1]);
  const double e2 = max_abs_diff(finals[1], finals[2]);
  const double e3 = max_abs_diff(finals[2], finals[3]);
  CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.2));
  CHECK(std::log2(e2 / e3) == doctest::Approx(1.0).epsilon(0.2));
  for (std::size_t i = 1; i < C.size(); ++i) {
    CHECK(std::isfinite(C[i]));
    CHECK(C[i] <= 2.0 * C[i - 1]);
    CHECK(C[i] >= 0.5 * C[i - 1]);
  }
  // the cone profile has an unbounded defect, so the time derivative grows as dt shrinks
  CHECK(tdiff.back() > tdiff.front());
}

TEST_CASE("Lipschitz in time for data with bounded defect") {
  auto g = build_grid_1d(1.0, 51);
  const ProblemParams P{2.0, 0.5, {}};
  // -Delta_p u0 - u0^{-delta} = 2
  const GridFunction u0 =
      solve_stationary_Q(g, ProblemParams{2.0, 0.5, ReactionSpec::constant(2.0)}).first;
  Forcing h{[](double x, double, double t) { return 1.0 + t * x; }, 2.0};
  std::vector<double> tdiff;
  for (std::size_t N : {10u, 20u, 40u, 80u})
    tdiff.push_back(evolve_St(g, P, u0, h, 0.5, N).second.max_time_derivative);
  // ||A u0 - h(0)||_inf + int_0^T ||h_t||_inf = 1 + 0.5, uniformly in dt
  for (double v : tdiff) CHECK(v <= 1.5 + 1e-6);
  // and the sequence settles
  CHECK(tdiff[3] - tdiff[2] < tdiff[2] - tdiff[1]);
}

TEST_CASE("reaction scheme with constant reaction equals forced scheme") {
  auto g = build_grid_1d(1.0, 51);
  const GridFunction u0 = cone_profile(g, 2.0, 1.5).profile;
  const ProblemParams Pr{2.0, 1.5, ReactionSpec::constant(0.8)};
  const ProblemParams Pf{2.0, 1.5, {}};
  auto [a, ra] = evolve_Pt(g, Pr, u0, 0.2, 10);
  auto [b, rb] = evolve_St(g, Pf, u0, Forcing::constant(0.8), 0.2, 10);
  for (std::size_t n = 0; n <= 10; ++n) CHECK(max_abs_diff(a.steps[n], b.steps[n]) <= 1e-9);
}

TEST_CASE("monotone trajectories of the reaction scheme") {
  auto g = build_grid_1d(1.0, 51);
  const ProblemParams P{2.0, 0.5, ReactionSpec::saturating(1.0)};
  const BarrierPair bp = stationary_barriers(g, P);
  const GridFunction mid = 0.5 * (bp.under + bp.over);
  EvolveOptions o;
  o.barriers = &bp;
  // dt = 0.05 < 1/K with K = 1
  auto [lo, r1] = evolve_Pt(g, P, bp.under, 1.0, 20, o);
  auto [hi, r2] = evolve_Pt(g, P, bp.over, 1.0, 20, o);
  auto [md, r3] = evolve_Pt(g, P, mid, 1.0, 20, o);
  for (std::size_t n = 1; n <= 20; ++n) {
    CHECK(max_diff_signed(lo.steps[n - 1], lo.steps[n]) <= 1e-9);
    CHECK(max_diff_signed(hi.steps[n], hi.steps[n - 1]) <= 1e-9);
    CHECK(max_diff_signed(lo.steps[n], md.steps[n]) <= 1e-9);
    CHECK(max_diff_signed(md.steps[n], hi.steps[n]) <= 1e-9);
  }
  CHECK(r1.energy_ok);
  CHECK(r2.energy_ok);
  CHECK(r3.energy_ok);
}

TEST_CASE("L-inf stability of the schemes") {
  auto g = build_grid_1d(1.0, 51);
  const ProblemParams P{2.0, 1.0, {}};
  const GridFunction u0 = cone_profile(g, 2.0, 1.0).profile;
  auto [a, ra] = evolve_St(g, P, u0, Forcing::constant(1.0), 0.5, 10);
  SUBCASE("identical inputs") {
    auto [b, rb] = evolve_St(g, P, u0, Forcing::constant(1.0), 0.5, 10);
    const auto s = linf_stability_check(a, b, 0.0);
    CHECK(s.pass);
    for (double gap : s.gaps) CHECK(gap == 0.0);
  }
  SUBCASE("shifted forcing") {
    auto [b, rb] = evolve_St(g, P, u0, Forcing::constant(1.5), 0.5, 10);
    const auto s = linf_stability_check(a, b, 1e-9);
    CHECK(s.pass);
    CHECK(s.bounds.back() == doctest::Approx(0.5 * 0.5 + 1e-9));
  }
  SUBCASE("bumped initial datum") {
    GridFunction u1 = u0;
    for (std::size_t k : g->interior()) u1[k] += 0.05 * std::sin(pi * g->coord(k, 0));
    auto [b, rb] = evolve_St(g, P, u1, Forcing::constant(1.0), 0.5, 10);
    const auto s = linf_stability_check(a, b, 1e-9);
    CHECK(s.pass);
    for (std::size_t n = 1; n < s.gaps.size(); ++n) CHECK(s.gaps[n] <= s.gaps[n - 1] + 1e-9);
  }
  SUBCASE("reaction form") {
    const ProblemParams Pr{2.0, 1.0, ReactionSpec::saturating(1.0)};
    GridFunction u1 = u0;
    for (std::size_t k : g->interior()) u1[k] += 0.05 * std::sin(pi * g->coord(k, 0));
    auto [c, rc] = evolve_Pt(g, Pr, u0, 0.5, 10);
    auto [d, rd] = evolve_Pt(g, Pr, u1, 0.5, 10);
    const auto s = linf_stability_check_reaction(c, d, Pr.reaction.lipschitz(0.0, 10.0), 1e-9);
    CHECK(s.pass);
  }
}

TEST_CASE("evolution preconditions and csv") {
  auto g = build_grid_1d(1.0, 31);
  const ProblemParams P{2.0, 0.5, {}};
  GridFunction zero(g);
  CHECK_THROWS_AS(evolve_St(g, P, zero, Forcing::constant(1.0), 1.0, 5), InvalidArgument);
  const GridFunction u0 = cone_profile(g, 2.0, 0.5).profile;
  CHECK_THROWS_AS(evolve_St(g, ProblemParams{2.0, 3.0, {}}, u0, Forcing::constant(1.0), 1.0, 5),
                  InvalidArgument);
  CHECK_THROWS_AS(evolve_St(g, P, u0, Forcing::constant(1.0), 1.0, 0), InvalidArgument);
  auto [tr, rep] = evolve_St(g, P, u0, Forcing::constant(1.0), 0.1, 4);
  std::ostringstream os;
  write_energy_csv(os, rep.energy);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line ==
        "n,t,kinetic_cum,dirichlet,singular_potential,reaction_potential,forcing_work_cum,"
        "energy_defect");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4);
}
