#pragma once

// Discrete p-Laplacian as the exact gradient of the discrete Dirichlet energy
//   E_p(u) = (1/p) sum_elements vol |grad_h u|^p,
// taken with respect to the lumped (trapezoidal) L2 pairing, so that
//   d/dt E_p(u + t v)|_{t=0} = <-Delta_p^h u, v>  for Dirichlet v.

#include <cstddef>
#include <string>

#include "splap/grid.hpp"

namespace splap {

// -Delta_p^h u at interior nodes, 0 on boundary rows.
GridFunction apply_p_laplacian(const GridFunction& u, double p);

// Same, plus a per-node magnitude: (1/w_i) sum of |element contributions|. This
// is the natural scale for relative residuals of equations containing -Delta_p.
GridFunction apply_p_laplacian(const GridFunction& u, double p, GridFunction& magnitude);

double dirichlet_energy(const GridFunction& u, double p);

struct EigenPair {
  double p = 2.0;
  double lambda1 = 0.0;
  GridFunction phi1;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||-Delta_p phi - lambda |phi|^{p-2} phi||_inf / (lambda ||phi||_inf^{p-1})
  bool clamped = false;   // whether the positivity clamp was active on the final iterate
};

struct EigenOptions {
  double tol = 1e-9;
  std::size_t max_iterations = 50000;
};

class EigenSolveError : public std::runtime_error {
 public:
  EigenSolveError(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what), iterations(iterations), residual(residual) {}
  std::size_t iterations;
  double residual;
};

// Minimizes R(u) = int |grad u|^p / int |u|^p over Dirichlet fields by
// preconditioned gradient descent with Barzilai-Borwein steps and projection
// onto { int |u|^p = 1, u >= 0 }.
EigenPair first_eigenpair(const GridPtr& grid, double p, const EigenOptions& opts = {});

double rayleigh_quotient(const GridFunction& u, double p);

// JSON {p, lambda1, iterations, residual}
std::string eigen_report_json(const EigenPair& ep);

struct MonotonicityGap {
  double lhs = 0.0;       // <-Delta_p u + Delta_p v, u - v>
  double rhs = 0.0;       // sharp lower bound
  double constant = 0.0;  // C1 (p >= 2) or C2 (p < 2)
};

// Sharp pointwise constants of the vector inequalities
//   (F(a)-F(b)).(a-b) >= C1 |a-b|^p                      (p >= 2)
//   (F(a)-F(b)).(a-b) >= C2 |a-b|^2 (|a|+|b|)^{p-2}     (p < 2)
// with F(a) = |a|^{p-2} a.
double monotonicity_constant(double p);

MonotonicityGap monotonicity_gap(const GridFunction& u, const GridFunction& v, double p);

}  // namespace splap
