#pragma once

// Singular resolvent  mass*u - lambda(Delta_p u + (u+eps)^{-delta}) = g  with Dirichlet
// data, its eps -> 0 limit, the homogeneous problem -Delta_p U = U^{-delta}, and the
// stationary problem -Delta_p u - u^{-delta} = f(u).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "splap/barriers.hpp"
#include "splap/grid.hpp"
#include "splap/problem.hpp"

namespace splap {

struct SolveOptions {
  double tol = 1e-10;           // pointwise relative residual, and eps-continuation increment
  std::size_t max_newton = 200;
  std::size_t max_continuation = 80;
  double eps0 = 0.0;            // 0 selects 1e-2 * min interior barrier value
  double mass = 1.0;
  // Clamp box. Null with auto_barriers builds resolvent barriers on demand.
  const BarrierPair* barriers = nullptr;
  bool auto_barriers = true;
};

struct SolveReport {
  std::size_t iterations = 0;          // Newton iterations, all continuation stages
  std::size_t picard_steps = 0;
  std::size_t continuation_steps = 0;
  double residual = 0.0;               // L-inf nodal defect
  double relative_residual = 0.0;      // max_i |defect_i| / scale_i
  std::vector<double> eps_schedule;
  std::vector<double> increments;      // ||u_{k+1} - u_k||_inf along the schedule
  std::size_t clamp_activations = 0;   // projections performed, all iterations
  std::size_t final_active = 0;        // nodes on the clamp box at the returned iterate
  bool barriers_used = false;
  bool w1p0_claim = true;              // false when delta >= 2 + 1/(p-1)
  double cone_c1 = 0.0, cone_c2 = 0.0;
  bool cone_member = false;
  double wall_seconds = 0.0;

  std::string to_json() const;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveReport report)
      : std::runtime_error(what), report(std::move(report)) {}
  SolveReport report;
};

// Nodal defect mass*u + lambda(-Delta_p u - (u+eps)^{-delta}) - g (zero on the boundary).
GridFunction resolvent_defect(const GridFunction& u, const ProblemParams& params, double lambda,
                              double eps, const GridFunction& g, double mass = 1.0);

// Fixed eps. eps = 0 is accepted for every delta on the discrete level since interior
// iterates stay positive; for delta >= 1 callers normally go through solve_singular.
GridFunction solve_regularized(const GridPtr& grid, const ProblemParams& params, double lambda,
                               double eps, const GridFunction& g, const BarrierPair* barriers,
                               const SolveOptions& opts = {}, SolveReport* report = nullptr,
                               const GridFunction* initial = nullptr);

std::pair<GridFunction, SolveReport> solve_singular(const GridPtr& grid,
                                                    const ProblemParams& params, double lambda,
                                                    const GridFunction& g,
                                                    const SolveOptions& opts = {},
                                                    const GridFunction* initial = nullptr);

GridFunction solve_homogeneous_U(const GridPtr& grid, double p, double delta,
                                 SolveReport* report = nullptr, double tol = 1e-10);

struct StationaryOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 500;
  const GridFunction* start = nullptr;       // defaults to the subsolution
  const BarrierPair* barriers = nullptr;     // defaults to build_barriers with bound 1
  std::vector<GridFunction>* iterates = nullptr;
};

struct StationaryReport {
  std::size_t iterations = 0;
  double K = 0.0;
  double min_increment = 0.0;                // min over n, nodes of u_{n+1} - u_n
  double last_change = 0.0;
  bool sandwich_ok = false;
  SolveReport inner;                         // last resolvent solve
  std::string to_json() const;
};

class MonotonicityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Monotone K-shift iteration from the subsolution.
std::pair<GridFunction, StationaryReport> solve_stationary_Q(const GridPtr& grid,
                                                             const ProblemParams& params,
                                                             const StationaryOptions& opts = {});

// Barrier pair used by solve_stationary_Q when none is supplied.
BarrierPair stationary_barriers(const GridPtr& grid, const ProblemParams& params,
                                const GridFunction* enclose = nullptr);

struct ComparisonReport {
  double max_violation = 0.0;  // max(u - v)
  bool pass = false;
};

ComparisonReport check_weak_comparison(const GridFunction& u, const GridFunction& v,
                                       double tol = 1e-10);

}  // namespace splap
