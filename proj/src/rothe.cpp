#include "splap/rothe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "splap/plap.hpp"

namespace splap {

namespace {

using Clock = std::chrono::steady_clock;

// -(1/(1-delta)) sum_interior w u^{1-delta}; -sum w log u at delta = 1. Boundary
// nodes carry no unknown and are left out, as in the solver's energy.
double singular_potential(const GridFunction& u, double delta) {
  const auto w = u.grid().weights();
  double s = 0.0;
  for (std::size_t k : u.grid().interior()) {
    if (delta == 1.0)
      s -= w[k] * std::log(u[k]);
    else
      s -= w[k] * std::pow(u[k], 1.0 - delta) / (1.0 - delta);
  }
  return s;
}

// sum_interior w f g
double interior_pairing(const GridFunction& f, const GridFunction& g) {
  const auto w = f.grid().weights();
  double s = 0.0;
  for (std::size_t k : f.grid().interior()) s += w[k] * f[k] * g[k];
  return s;
}

struct Ledger {
  const ProblemParams* params;
  double measure;
  double E0, Psi0;
  double kinetic = 0.0, work = 0.0, hmax2 = 0.0;
};

EnergyRecord ledger_step(Ledger& L, const GridFunction& prev, const GridFunction& cur,
                         const GridFunction& h, std::size_t n, double dt) {
  const ProblemParams& P = *L.params;
  EnergyRecord r;
  r.n = n;
  r.t = dt * static_cast<double>(n);
  const GridFunction du = cur - prev;
  L.kinetic += interior_pairing(du, du) / dt;
  L.work += interior_pairing(h, du);
  L.hmax2 = std::max(L.hmax2, norm_Linf(h) * norm_Linf(h));

  const double Eprev = dirichlet_energy(prev, P.p);
  r.dirichlet = dirichlet_energy(cur, P.p);
  const double Psiprev = singular_potential(prev, P.delta);
  r.singular_potential = singular_potential(cur, P.delta);
  r.reaction_potential = integrate(P.reaction.apply_primitive(cur));
  r.kinetic_cum = L.kinetic;
  r.forcing_work_cum = L.work;

  // convexity: E(u^n) - E(u^{n-1}) <= <-Delta_p u^n, du>, same for the singular potential
  const double pair_d = interior_pairing(apply_p_laplacian(cur, P.p), du);
  r.convexity_dirichlet = pair_d - (r.dirichlet - Eprev);
  r.convexity_dirichlet_rel =
      r.convexity_dirichlet / std::max(std::abs(pair_d) + std::abs(r.dirichlet) + std::abs(Eprev), 1e-300);
  GridFunction sing(cur.grid_ptr());
  for (std::size_t k : cur.grid().interior()) sing[k] = -std::pow(cur[k], -P.delta);
  const double pair_s = interior_pairing(sing, du);
  r.convexity_singular = pair_s - (r.singular_potential - Psiprev);
  r.convexity_singular_rel = r.convexity_singular /
      std::max(std::abs(pair_s) + std::abs(r.singular_potential) + std::abs(Psiprev), 1e-300);

  const double dE = r.dirichlet - L.E0;
  const double dPsi = r.singular_potential - L.Psi0;
  r.energy_defect = L.kinetic + dE + dPsi - L.work;
  const double scale = L.kinetic + std::abs(r.dirichlet) + std::abs(L.E0) +
                       std::abs(r.singular_potential) + std::abs(L.Psi0) + std::abs(L.work);
  r.energy_defect_rel = r.energy_defect / std::max(scale, 1e-300);
  r.young_defect = 0.5 * L.kinetic + dE + dPsi - L.measure * 0.5 * r.t * L.hmax2;
  return r;
}

void check_initial(const GridPtr& grid, const ProblemParams& params, const GridFunction& u0,
                   bool require_cone) {
  params.validate();
  if (&u0.grid() != grid.get()) throw InvalidArgument("u0 lives on a different grid");
  if (!u0.dirichlet()) throw InvalidArgument("u0 must be Dirichlet-tagged");
  if (!u0.all_finite()) throw InvalidArgument("u0 must be finite");
  if (require_cone) {
    const ConeFit f = cone_fit(u0, cone_profile(grid, params.p, params.delta));
    if (!f.member) throw InvalidArgument("u0 is not in the cone");
  }
}

template <class ForcingAt>
std::pair<RotheTrajectory, EvolveReport> run(const GridPtr& grid, const ProblemParams& params,
                                             const GridFunction& u0, double T, std::size_t N,
                                             const EvolveOptions& opts, const BarrierPair* bar,
                                             ForcingAt&& forcing_at) {
  const auto t0 = Clock::now();
  RotheTrajectory traj;
  EvolveReport rep;
  traj.dt = T / static_cast<double>(N);
  traj.steps.reserve(N + 1);
  rep.worst_convexity_rel = std::numeric_limits<double>::infinity();
  rep.worst_defect_rel = -std::numeric_limits<double>::infinity();
  traj.steps.push_back(u0);
  if (bar) {
    rep.barriers = *bar;
    rep.barriers_used = true;
  }
  Ledger L{&params, grid->measure(), dirichlet_energy(u0, params.p),
           singular_potential(u0, params.delta)};

  for (std::size_t n = 1; n <= N; ++n) {
    const GridFunction& prev = traj.steps.back();
    GridFunction h = forcing_at(n, prev);
    SolveReport sr;
    GridFunction cur = rothe_step(prev, traj.dt, h, params, bar, opts.solve, &sr);
    rep.newton_iterations += sr.iterations;
    rep.max_final_active = std::max(rep.max_final_active, sr.final_active);
    rep.max_time_derivative = std::max(rep.max_time_derivative, max_abs_diff(cur, prev) / traj.dt);
    if (bar) {
      const double slack = 10.0 * opts.solve.tol * std::max(1.0, norm_Linf(cur));
      for (std::size_t k : grid->interior())
        if (cur[k] < bar->under[k] - slack || cur[k] > bar->over[k] + slack) rep.sandwich_ok = false;
    }
    EnergyRecord er = ledger_step(L, prev, cur, h, n, traj.dt);
    rep.worst_convexity_rel =
        std::min({rep.worst_convexity_rel, er.convexity_dirichlet_rel, er.convexity_singular_rel});
    rep.worst_defect_rel = std::max(rep.worst_defect_rel, er.energy_defect_rel);
    rep.energy.push_back(er);
    traj.forcing.push_back(std::move(h));
    traj.steps.push_back(std::move(cur));
  }
  rep.energy_ok = rep.worst_convexity_rel >= -1e-12 && rep.worst_defect_rel <= 1e-8;
  rep.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {std::move(traj), std::move(rep)};
}

}  // namespace

Forcing Forcing::constant(double c) {
  return Forcing{[c](double, double, double) { return c; }, std::abs(c)};
}

GridFunction forcing_average(const GridPtr& grid, const ForcingFn& h, std::size_t n, double dt) {
  if (n == 0) throw InvalidArgument("forcing steps start at n = 1");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const double a = dt * static_cast<double>(n - 1);
  const double r = std::sqrt(0.6);
  const double nodes[3] = {-r, 0.0, r};
  const double wts[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  GridFunction out(grid, 0.0, false);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const double x = grid->coord(k, 0);
    const double y = grid->dim() == 2 ? grid->coord(k, 1) : 0.0;
    double s = 0.0;
    for (int q = 0; q < 3; ++q) s += wts[q] * h(x, y, a + 0.5 * dt * (1.0 + nodes[q]));
    out[k] = s;
  }
  return out;
}

GridFunction rothe_step(const GridFunction& u_prev, double dt, const GridFunction& h_n,
                        const ProblemParams& params, const BarrierPair* barriers,
                        const SolveOptions& opts, SolveReport* report) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  GridFunction g(u_prev.grid_ptr(), 0.0, false);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = dt * h_n[k] + u_prev[k];
  SolveOptions o = opts;
  o.mass = 1.0;
  if (barriers) {
    o.barriers = barriers;
  } else {
    o.barriers = nullptr;
    o.auto_barriers = false;
  }
  auto [u, rep] = solve_singular(u_prev.grid_ptr(), params, dt, g, o, &u_prev);
  if (report) *report = std::move(rep);
  return u;
}

GridFunction RotheTrajectory::piecewise_constant(double t) const {
  if (steps.empty()) throw InvalidArgument("empty trajectory");
  if (t <= 0.0) return steps.front();
  auto n = static_cast<std::size_t>(std::ceil(t / dt - 1e-12));
  return steps[std::min(n, N())];
}

GridFunction RotheTrajectory::piecewise_linear(double t) const {
  if (steps.empty()) throw InvalidArgument("empty trajectory");
  if (t <= 0.0) return steps.front();
  if (t >= T()) return steps.back();
  const double s = t / dt;
  auto n = static_cast<std::size_t>(std::floor(s));
  const double th = s - static_cast<double>(n);
  GridFunction out = steps[n];
  if (th > 0.0) out += th * (steps[n + 1] - steps[n]);
  return out;
}

double RotheTrajectory::interpolant_gap() const {
  double g = 0.0;
  for (std::size_t n = 1; n < steps.size(); ++n) g = std::max(g, norm_Lq(steps[n] - steps[n - 1], 2.0));
  return g;
}

std::string EvolveReport::to_json() const {
  nlohmann::json j{{"steps", energy.size()},
                   {"barriers_used", barriers_used},
                   {"eta", barriers.eta},
                   {"M", barriers.M},
                   {"sandwich_ok", sandwich_ok},
                   {"max_final_active", max_final_active},
                   {"newton_iterations", newton_iterations},
                   {"worst_convexity_rel", worst_convexity_rel},
                   {"worst_defect_rel", worst_defect_rel},
                   {"energy_ok", energy_ok},
                   {"max_time_derivative", max_time_derivative},
                   {"wall_seconds", wall_seconds}};
  return j.dump(2);
}

std::pair<RotheTrajectory, EvolveReport> evolve_St(const GridPtr& grid,
                                                   const ProblemParams& params,
                                                   const GridFunction& u0, const Forcing& h,
                                                   double T, std::size_t N,
                                                   const EvolveOptions& opts) {
  check_initial(grid, params, u0, opts.require_cone);
  if (!(T > 0.0) || N == 0) throw InvalidArgument("T and N must be positive");
  if (!params.below_threshold()) throw InvalidArgument("evolution requires delta < 2 + 1/(p-1)");
  const double dt = T / static_cast<double>(N);

  BarrierPair built;
  const BarrierPair* bar = opts.barriers;
  if (!bar && opts.use_barriers) {
    ProblemParams plain = params;
    plain.reaction = ReactionSpec::none();
    BarrierOptions bo;
    bo.enclose = &u0;
    built = build_barriers(grid, plain, std::max(h.bound, 1e-3), bo);
    bar = &built;
  }
  return run(grid, params, u0, T, N, opts, bar,
             [&](std::size_t n, const GridFunction&) { return forcing_average(grid, h.fn, n, dt); });
}

std::pair<RotheTrajectory, EvolveReport> evolve_Pt(const GridPtr& grid,
                                                   const ProblemParams& params,
                                                   const GridFunction& u0, double T,
                                                   std::size_t N, const EvolveOptions& opts) {
  check_initial(grid, params, u0, opts.require_cone);
  if (!(T > 0.0) || N == 0) throw InvalidArgument("T and N must be positive");
  if (!params.below_threshold()) throw InvalidArgument("evolution requires delta < 2 + 1/(p-1)");

  BarrierPair built;
  const BarrierPair* bar = opts.barriers;
  if (!bar && opts.use_barriers) {
    built = stationary_barriers(grid, params, &u0);
    bar = &built;
  }
  return run(grid, params, u0, T, N, opts, bar,
             [&](std::size_t, const GridFunction& prev) { return params.reaction.apply(prev); });
}

namespace {

StabilityReport compare(const RotheTrajectory& a, const RotheTrajectory& b, double slack,
                        const std::function<double(std::size_t, double)>& bound_at) {
  if (a.steps.size() != b.steps.size() || a.dt != b.dt)
    throw InvalidArgument("trajectories must share the time grid");
  StabilityReport r;
  r.worst_margin = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t n = 0; n < a.steps.size(); ++n) {
    if (n > 0) acc += a.dt * max_abs_diff(a.forcing[n - 1], b.forcing[n - 1]);
    const double gap = max_abs_diff(a.steps[n], b.steps[n]);
    const double bound = bound_at(n, acc) + slack;
    r.gaps.push_back(gap);
    r.bounds.push_back(bound);
    if (bound - gap < r.worst_margin) {
      r.worst_margin = bound - gap;
      r.worst_step = n;
    }
  }
  r.pass = r.worst_margin >= 0.0;
  return r;
}

}  // namespace

StabilityReport linf_stability_check(const RotheTrajectory& a, const RotheTrajectory& b,
                                     double slack) {
  const double d0 = max_abs_diff(a.steps.front(), b.steps.front());
  return compare(a, b, slack, [&](std::size_t, double acc) { return d0 + acc; });
}

StabilityReport linf_stability_check_reaction(const RotheTrajectory& a, const RotheTrajectory& b,
                                              double omega, double slack) {
  const double d0 = max_abs_diff(a.steps.front(), b.steps.front());
  return compare(a, b, slack, [&](std::size_t n, double) {
    return std::exp(omega * a.dt * static_cast<double>(n)) * d0;
  });
}

void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& records) {
  os.precision(17);
  os << "n,t,kinetic_cum,dirichlet,singular_potential,reaction_potential,forcing_work_cum,"
        "energy_defect\n";
  for (const auto& r : records) {
    os << r.n << ',' << r.t << ',' << r.kinetic_cum << ',' << r.dirichlet << ','
       << r.singular_potential << ',' << r.reaction_potential << ',' << r.forcing_work_cum << ','
       << r.energy_defect << '\n';
  }
}

void write_energy_csv(const std::string& path, const std::vector<EnergyRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_energy_csv(os, records);
}

}  // namespace splap
