#pragma once

// Boundary-distance cone profiles and certified sub/supersolution pairs for the
// three regimes delta < 1, delta = 1, delta > 1.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "splap/grid.hpp"
#include "splap/problem.hpp"

namespace splap {

enum class Regime { delta_lt_1, delta_eq_1, delta_gt_1 };

Regime regime_of(double delta);
const char* regime_name(Regime r);

struct ConeProfile {
  Regime regime = Regime::delta_lt_1;
  double p = 2.0;
  double delta = 0.5;
  double k = 0.0;  // log scale, delta = 1 only
  GridFunction profile;
  // Upper comparison profile: d^beta + d when delta > 1, otherwise the profile itself.
  GridFunction upper;
};

// k <= 0 selects the default 2e * max d.
ConeProfile cone_profile(const GridPtr& grid, double p, double delta, double k = 0.0);

struct ConeFit {
  double c1 = 0.0;  // min over interior of u / profile
  double c2 = 0.0;  // max over interior of u / upper
  bool member = false;
};

ConeFit cone_fit(const GridFunction& u, const ConeProfile& cone);

// Defect functional a barrier is certified against:
//   sub:   mass u + lambda(-Delta_p u - (u+eps)^{-delta}) - g_sub                 <= 0
//   super: mass u + lambda(-Delta_p u - (u+eps)^{-delta} - ell u^{p-1}) - g_sup   >= 0
// at every interior node.
struct BarrierTarget {
  double mass = 0.0;
  double lambda = 1.0;
  double eps = 0.0;
  double ell = 0.0;
  GridFunction g_sub;
  GridFunction g_sup;

  // -Delta_p u - u^{-delta} <= -B and >= ell u^{p-1} + B
  static BarrierTarget stationary(const GridPtr& grid, double bound_B, double ell);
  // u - lambda(Delta_p u + (u+eps)^{-delta}) compared with g
  static BarrierTarget resolvent(double lambda, const GridFunction& g, double eps = 0.0,
                                 double mass = 1.0);
};

struct BarrierPair {
  GridFunction under;
  GridFunction over;
  double eta = 0.0;
  double M = 0.0;
  double A = 0.0;    // log constant of the delta = 1 family
  double eps = 0.0;  // nonzero for the regularized families
  GridFunction residual_under;
  GridFunction residual_over;
  std::size_t search_steps = 0;
};

class BarrierSearchError : public std::runtime_error {
 public:
  BarrierSearchError(const std::string& what, bool under_side, std::size_t worst_node,
                     double worst_residual)
      : std::runtime_error(what),
        under_side(under_side),
        worst_node(worst_node),
        worst_residual(worst_residual) {}
  bool under_side;
  std::size_t worst_node;
  double worst_residual;
};

struct BarrierOptions {
  // When set, the search also requires under <= enclose <= over.
  const GridFunction* enclose = nullptr;
  double eta_start = 1.0;
  double M_start = 1.0;
};

// Stationary barriers for data bounded by bound_B; the reaction bounds of params
// (f >= -L, f <= ell t^{p-1} + L) are folded in.
BarrierPair build_barriers(const GridPtr& grid, const ProblemParams& params, double bound_B,
                           const BarrierOptions& opts = {});

// Barriers for the resolvent problem with given lambda and g.
BarrierPair build_resolvent_barriers(const GridPtr& grid, const ProblemParams& params,
                                     double lambda, const GridFunction& g, double mass = 1.0,
                                     const BarrierOptions& opts = {});

// Barriers for the regularized problem with (u+eps)^{-delta}. For delta < 1 the
// unregularized stationary pair is returned.
BarrierPair build_eps_barriers(const GridPtr& grid, const ProblemParams& params, double eps,
                               double bound_B, const BarrierOptions& opts = {});

// Unique root s in (0, A/e) of s ln(A/s)^{1/p} = eps, by bisection.
double solve_eps_prime(double eps, double A, double p);

// Default log constant of the delta = 1 barrier family for a given phi1.
double default_log_constant(const GridFunction& phi1);

struct CertificateCheck {
  bool ok = false;
  double worst_under = 0.0;  // max residual of the sub side (must be <= 0)
  double worst_over = 0.0;   // min residual of the super side (must be >= 0)
  std::size_t worst_under_node = 0;
  std::size_t worst_over_node = 0;
  bool ordered = false;      // 0 < under <= over at interior nodes
};

// Residuals of a candidate against a target, computed from scratch.
GridFunction sub_residual(const GridFunction& under, const ProblemParams& params,
                          const BarrierTarget& target);
GridFunction super_residual(const GridFunction& over, const ProblemParams& params,
                            const BarrierTarget& target);
CertificateCheck check_certificate(const BarrierPair& pair, const ProblemParams& params,
                                   const BarrierTarget& target);

// CSV: node,under,over,residual_under,residual_over
void write_certificate_csv(std::ostream& os, const BarrierPair& pair);
void write_certificate_csv(const std::string& path, const BarrierPair& pair);

}  // namespace splap
