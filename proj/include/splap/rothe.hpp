#pragma once

// Implicit Euler (Rothe) stepping for
//   (S_t)  u_t - Delta_p u = u^{-delta} + h(x,t)
//   (P_t)  u_t - Delta_p u = u^{-delta} + f(x,u)     (reaction lagged one step)
// with the discrete energy ledger of each run.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "splap/barriers.hpp"
#include "splap/elliptic.hpp"
#include "splap/grid.hpp"
#include "splap/problem.hpp"

namespace splap {

using ForcingFn = std::function<double(double x, double y, double t)>;

struct Forcing {
  ForcingFn fn;
  double bound = 0.0;  // sup |h| over the space-time cylinder
  static Forcing constant(double c);
};

// (1/dt) int_{(n-1)dt}^{n dt} h dt per node, 3-point Gauss in time.
GridFunction forcing_average(const GridPtr& grid, const ForcingFn& h, std::size_t n, double dt);

// One step: solve u - dt(Delta_p u + u^{-delta}) = dt h_n + u_prev.
GridFunction rothe_step(const GridFunction& u_prev, double dt, const GridFunction& h_n,
                        const ProblemParams& params, const BarrierPair* barriers,
                        const SolveOptions& opts = {}, SolveReport* report = nullptr);

struct RotheTrajectory {
  double dt = 0.0;
  std::vector<GridFunction> steps;    // u^0 .. u^N
  std::vector<GridFunction> forcing;  // h^1 .. h^N (f(u^{n-1}) for the reaction scheme)

  std::size_t N() const { return steps.empty() ? 0 : steps.size() - 1; }
  double T() const { return dt * static_cast<double>(N()); }
  // u_dt(t) = u^n on (t_{n-1}, t_n], u^0 at t = 0
  GridFunction piecewise_constant(double t) const;
  // linear interpolation between u^{n-1} and u^n
  GridFunction piecewise_linear(double t) const;
  // sup_t ||u_dt - u~_dt||_{L2} = max_n ||u^n - u^{n-1}||_{L2}
  double interpolant_gap() const;
};

struct EnergyRecord {
  std::size_t n = 0;
  double t = 0.0;
  double kinetic_cum = 0.0;          // sum dt ||(u^m - u^{m-1})/dt||^2
  double dirichlet = 0.0;            // (1/p) int |grad u^n|^p
  double singular_potential = 0.0;   // -(1/(1-delta)) int (u^n)^{1-delta}, or -int log u^n
  double reaction_potential = 0.0;   // int F(u^n)
  double forcing_work_cum = 0.0;     // sum int h^m (u^m - u^{m-1})
  double energy_defect = 0.0;        // kinetic + dirichlet and singular differences - work
  double energy_defect_rel = 0.0;
  double young_defect = 0.0;         // kinetic/2 + differences - |Omega| (t/2) max ||h||^2
  // per-step convexity slack, >= 0 up to rounding
  double convexity_dirichlet = 0.0;
  double convexity_singular = 0.0;
  double convexity_dirichlet_rel = 0.0;
  double convexity_singular_rel = 0.0;
};

struct EvolveOptions {
  SolveOptions solve;
  const BarrierPair* barriers = nullptr;  // built from the data when null
  bool use_barriers = true;
  bool require_cone = true;               // reject u0 outside the cone
};

struct EvolveReport {
  std::vector<EnergyRecord> energy;
  BarrierPair barriers;
  bool barriers_used = false;
  bool sandwich_ok = true;
  std::size_t max_final_active = 0;
  std::size_t newton_iterations = 0;
  double worst_convexity_rel = 0.0;       // most negative relative slack
  double worst_defect_rel = 0.0;          // most positive relative defect
  bool energy_ok = true;                  // convexity 1e-12 and defect 1e-8, relative
  double max_time_derivative = 0.0;       // max_n ||u^n - u^{n-1}||_inf / dt
  double wall_seconds = 0.0;
  std::string to_json() const;
};

std::pair<RotheTrajectory, EvolveReport> evolve_St(const GridPtr& grid,
                                                   const ProblemParams& params,
                                                   const GridFunction& u0, const Forcing& h,
                                                   double T, std::size_t N,
                                                   const EvolveOptions& opts = {});

std::pair<RotheTrajectory, EvolveReport> evolve_Pt(const GridPtr& grid,
                                                   const ProblemParams& params,
                                                   const GridFunction& u0, double T,
                                                   std::size_t N,
                                                   const EvolveOptions& opts = {});

struct StabilityReport {
  bool pass = true;
  double worst_margin = 0.0;  // min_n (bound_n - ||u1^n - u2^n||_inf)
  std::size_t worst_step = 0;
  std::vector<double> gaps;    // ||u1^n - u2^n||_inf
  std::vector<double> bounds;
};

// ||u1^n - u2^n||_inf <= ||u1^0 - u2^0||_inf + sum_{m<=n} dt ||h1^m - h2^m||_inf + slack
StabilityReport linf_stability_check(const RotheTrajectory& a, const RotheTrajectory& b,
                                     double slack);
// Reaction scheme: e^{omega t_n} ||u1^0 - u2^0||_inf + slack
StabilityReport linf_stability_check_reaction(const RotheTrajectory& a, const RotheTrajectory& b,
                                              double omega, double slack);

// n,t,kinetic_cum,dirichlet,singular_potential,reaction_potential,forcing_work_cum,energy_defect
void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& records);
void write_energy_csv(const std::string& path, const std::vector<EnergyRecord>& records);

}  // namespace splap
