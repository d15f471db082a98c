#pragma once

// Problem data for u_t - Delta_p u = u^{-delta} + f(x,u): exponents, reaction, hypotheses.

#include <string>
#include <vector>

#include "splap/grid.hpp"

namespace splap {

struct ReactionSpec {
  enum class Kind { none, constant, power, saturating, table };

  Kind kind = Kind::none;
  // constant: f = a.  power: f = a u^q.  saturating: f = a / (1 + u).
  double a = 0.0;
  double q = 0.0;
  // table: piecewise linear through (t_i, f_i), t_0 = 0, constant beyond the last knot.
  std::vector<double> t, f;

  static ReactionSpec none() { return {}; }
  static ReactionSpec constant(double c);
  static ReactionSpec power(double a, double q);
  static ReactionSpec saturating(double a);
  static ReactionSpec table(std::vector<double> t, std::vector<double> f);
  // "none", "constant:c", "power:a,q", "saturating:a", "table:t0,f0;t1,f1;..."
  static ReactionSpec parse(const std::string& text);
  std::string describe() const;

  double value(double u) const;
  // F(u) = int_0^u f
  double primitive(double u) const;
  // sup |f'| on [lo, hi], lo >= 0
  double lipschitz(double lo, double hi) const;
  // L with f >= -L on [0, inf)
  double lower_bound() const;
  // lim f(t)/t^{p-1}
  double alpha(double p) const;
  // (ell, L) with f(t) <= ell t^{p-1} + L on [0, inf); ell small when f is strictly sublinear.
  std::pair<double, double> growth_bound(double p) const;
  // whether t -> f(t)/t^{p-1} is nonincreasing on (0, inf)
  bool ratio_nonincreasing(double p) const;

  GridFunction apply(const GridFunction& u) const;
  GridFunction apply_primitive(const GridFunction& u) const;
};

struct ProblemParams {
  double p = 2.0;
  double delta = 0.5;
  ReactionSpec reaction;

  // 2 + 1/(p-1)
  double threshold() const { return 2.0 + 1.0 / (p - 1.0); }
  bool below_threshold() const { return delta < threshold(); }

  // Throws InvalidArgument when p <= 1, delta <= 0, or the reaction is malformed.
  void validate() const;
  // Throws InvalidArgument unless alpha_f < lambda1.
  void check_sublinear(double lambda1) const;
};

}  // namespace splap
