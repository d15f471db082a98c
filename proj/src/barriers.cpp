#include "splap/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>

#include "detail/cache.hpp"
#include "splap/plap.hpp"

namespace splap {

namespace {

constexpr double kScaleMin = 1e-12;
constexpr double kScaleMax = 1e12;

double beta_of(double p, double delta) { return p / (delta + p - 1.0); }

// phi1 ln(A/phi1)^{1/p}, zero where phi1 vanishes
double log_shape(double phi, double A, double p) {
  if (phi <= 0.0) return 0.0;
  return phi * std::pow(std::log(A / phi), 1.0 / p);
}

using Family = std::function<GridFunction(double)>;

struct Worst {
  double value = 0.0;
  std::size_t node = 0;
};

// max over interior of r (sub) or min (super)
Worst extreme(const GridFunction& r, bool want_max) {
  Worst w;
  w.value = want_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (std::size_t k : r.grid().interior()) {
    const double v = r[k];
    if (std::isnan(v)) return {std::numeric_limits<double>::quiet_NaN(), k};
    if (want_max ? v > w.value : v < w.value) w = {v, k};
  }
  return w;
}

bool leq_interior(const GridFunction& a, const GridFunction& b) {
  for (std::size_t k : a.grid().interior())
    if (!(a[k] <= b[k])) return false;
  return true;
}

bool positive_interior(const GridFunction& a) {
  for (std::size_t k : a.grid().interior())
    if (!(a[k] > 0.0)) return false;
  return true;
}

BarrierPair search(const ProblemParams& params, const BarrierTarget& target, const Family& under_of,
                   const Family& over_of, const BarrierOptions& opts) {
  BarrierPair out;
  std::size_t steps = 0;

  double eta = opts.eta_start;
  Worst last{};
  for (;; eta *= 0.5) {
    if (eta < kScaleMin) {
      throw BarrierSearchError("subsolution search exhausted (eta underflow)", true, last.node,
                               last.value);
    }
    ++steps;
    GridFunction cand = under_of(eta);
    if (!positive_interior(cand)) continue;
    GridFunction r = sub_residual(cand, params, target);
    last = extreme(r, true);
    if (!(last.value <= 0.0)) continue;
    if (opts.enclose && !leq_interior(cand, *opts.enclose)) continue;
    out.under = std::move(cand);
    out.residual_under = std::move(r);
    out.eta = eta;
    break;
  }

  double M = opts.M_start;
  for (;; M *= 2.0) {
    if (M > kScaleMax) {
      throw BarrierSearchError("supersolution search exhausted (M overflow)", false, last.node,
                               last.value);
    }
    ++steps;
    GridFunction cand = over_of(M);
    if (!positive_interior(cand)) continue;
    GridFunction r = super_residual(cand, params, target);
    last = extreme(r, false);
    if (!(last.value >= 0.0)) continue;
    if (opts.enclose && !leq_interior(*opts.enclose, cand)) continue;
    if (!leq_interior(out.under, cand)) continue;
    out.over = std::move(cand);
    out.residual_over = std::move(r);
    out.M = M;
    break;
  }
  out.search_steps = steps;
  return out;
}

struct Shapes {
  const EigenPair* eig = nullptr;
  double A = 0.0;
};

Shapes shapes_for(const GridPtr& grid, const ProblemParams& params) {
  Shapes s;
  s.eig = &detail::eigenpair_cached(grid, params.p);
  s.A = default_log_constant(s.eig->phi1);
  return s;
}

GridFunction map_phi(const GridFunction& phi1, const std::function<double(double)>& f) {
  GridFunction out(phi1.grid_ptr());
  for (std::size_t k : phi1.grid().interior()) out[k] = f(phi1[k]);
  return out;
}

BarrierPair regular_pair(const GridPtr& grid, const ProblemParams& params,
                         const BarrierTarget& target, const BarrierOptions& opts) {
  const Shapes s = shapes_for(grid, params);
  const GridFunction& phi1 = s.eig->phi1;
  const double p = params.p, delta = params.delta;
  const Regime reg = regime_of(delta);

  GridFunction phi;
  if (reg == Regime::delta_eq_1)
    phi = map_phi(phi1, [&](double v) { return log_shape(v, s.A, p); });
  else if (reg == Regime::delta_gt_1)
    phi = map_phi(phi1, [&](double v) { return std::pow(v, beta_of(p, delta)); });
  else
    phi = phi1;

  const GridFunction* over_shape = &phi;
  if (reg == Regime::delta_lt_1) over_shape = &detail::homogeneous_cached(grid, p, delta);

  auto under_of = [&](double eta) { return eta * phi; };
  auto over_of = [&](double M) { return M * (*over_shape); };
  BarrierPair out = search(params, target, under_of, over_of, opts);
  out.A = reg == Regime::delta_eq_1 ? s.A : 0.0;
  return out;
}

}  // namespace

Regime regime_of(double delta) {
  if (delta < 1.0) return Regime::delta_lt_1;
  if (delta == 1.0) return Regime::delta_eq_1;
  return Regime::delta_gt_1;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::delta_lt_1: return "delta_lt_1";
    case Regime::delta_eq_1: return "delta_eq_1";
    case Regime::delta_gt_1: return "delta_gt_1";
  }
  return "?";
}

ConeProfile cone_profile(const GridPtr& grid, double p, double delta, double k) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  ConeProfile c;
  c.regime = regime_of(delta);
  c.p = p;
  c.delta = delta;
  const auto d = grid->dist();
  GridFunction prof(grid), up(grid);
  switch (c.regime) {
    case Regime::delta_lt_1:
      for (std::size_t n : grid->interior()) prof[n] = d[n];
      up = prof;
      break;
    case Regime::delta_eq_1:
      c.k = k > 0.0 ? k : 2.0 * std::numbers::e * grid->max_dist();
      if (!(c.k > std::exp(1.0 / p) * grid->max_dist()))
        throw InvalidArgument("log scale k must exceed e^{1/p} max d");
      for (std::size_t n : grid->interior())
        prof[n] = d[n] * std::pow(std::log(c.k / d[n]), 1.0 / p);
      up = prof;
      break;
    case Regime::delta_gt_1: {
      const double beta = beta_of(p, delta);
      for (std::size_t n : grid->interior()) {
        prof[n] = std::pow(d[n], beta);
        up[n] = prof[n] + d[n];
      }
      break;
    }
  }
  c.profile = std::move(prof);
  c.upper = std::move(up);
  return c;
}

ConeFit cone_fit(const GridFunction& u, const ConeProfile& cone) {
  ConeFit f;
  f.c1 = std::numeric_limits<double>::infinity();
  f.c2 = 0.0;
  for (std::size_t k : u.grid().interior()) {
    f.c1 = std::min(f.c1, u[k] / cone.profile[k]);
    f.c2 = std::max(f.c2, u[k] / cone.upper[k]);
  }
  if (!(f.c1 > 0.0)) f.c1 = std::max(0.0, f.c1);
  f.member = f.c1 > 0.0 && std::isfinite(f.c2);
  return f;
}

BarrierTarget BarrierTarget::stationary(const GridPtr& grid, double bound_B, double ell) {
  BarrierTarget t;
  t.mass = 0.0;
  t.lambda = 1.0;
  t.ell = ell;
  t.g_sub = GridFunction(grid, -bound_B, false);
  t.g_sup = GridFunction(grid, bound_B, false);
  return t;
}

BarrierTarget BarrierTarget::resolvent(double lambda, const GridFunction& g, double eps,
                                       double mass) {
  BarrierTarget t;
  t.mass = mass;
  t.lambda = lambda;
  t.eps = eps;
  t.g_sub = g;
  t.g_sup = g;
  return t;
}

GridFunction sub_residual(const GridFunction& under, const ProblemParams& params,
                          const BarrierTarget& t) {
  const GridFunction lap = apply_p_laplacian(under, params.p);
  GridFunction r(under.grid_ptr());
  for (std::size_t k : under.grid().interior()) {
    const double sing = std::pow(under[k] + t.eps, -params.delta);
    r[k] = t.mass * under[k] + t.lambda * (lap[k] - sing) - t.g_sub[k];
  }
  return r;
}

GridFunction super_residual(const GridFunction& over, const ProblemParams& params,
                            const BarrierTarget& t) {
  const GridFunction lap = apply_p_laplacian(over, params.p);
  GridFunction r(over.grid_ptr());
  for (std::size_t k : over.grid().interior()) {
    const double sing = std::pow(over[k] + t.eps, -params.delta);
    const double grow = t.ell > 0.0 ? t.ell * std::pow(over[k], params.p - 1.0) : 0.0;
    r[k] = t.mass * over[k] + t.lambda * (lap[k] - sing - grow) - t.g_sup[k];
  }
  return r;
}

CertificateCheck check_certificate(const BarrierPair& pair, const ProblemParams& params,
                                   const BarrierTarget& target) {
  CertificateCheck c;
  const Worst wu = extreme(sub_residual(pair.under, params, target), true);
  const Worst wo = extreme(super_residual(pair.over, params, target), false);
  c.worst_under = wu.value;
  c.worst_under_node = wu.node;
  c.worst_over = wo.value;
  c.worst_over_node = wo.node;
  c.ordered = positive_interior(pair.under) && leq_interior(pair.under, pair.over);
  c.ok = wu.value <= 0.0 && wo.value >= 0.0 && c.ordered;
  return c;
}

double default_log_constant(const GridFunction& phi1) {
  return 2.0 * std::numbers::e * norm_Linf(phi1);
}

BarrierPair build_barriers(const GridPtr& grid, const ProblemParams& params, double bound_B,
                           const BarrierOptions& opts) {
  params.validate();
  if (!(bound_B > 0.0)) throw InvalidArgument("bound_B must be positive");
  if (!params.below_threshold())
    throw InvalidArgument("barriers in W^{1,p}_0 require delta < 2 + 1/(p-1)");
  const auto [ell, L_up] = params.reaction.growth_bound(params.p);
  const double L_low = params.reaction.lower_bound();
  BarrierTarget t = BarrierTarget::stationary(grid, bound_B, ell);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    t.g_sub[k] = -(bound_B + L_low);
    t.g_sup[k] = bound_B + L_up;
  }
  return regular_pair(grid, params, t, opts);
}

BarrierPair build_resolvent_barriers(const GridPtr& grid, const ProblemParams& params,
                                     double lambda, const GridFunction& g, double mass,
                                     const BarrierOptions& opts) {
  params.validate();
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  return regular_pair(grid, params, BarrierTarget::resolvent(lambda, g, 0.0, mass), opts);
}

double solve_eps_prime(double eps, double A, double p) {
  if (!(eps > 0.0) || !(A > 0.0)) throw InvalidArgument("eps and A must be positive");
  const double hi_end = A / std::numbers::e;
  // s ln(A/s)^{1/p} increases on (0, A e^{-1/p}) and equals A/e at s = A/e.
  if (!(eps < hi_end)) throw InvalidArgument("eps too large for the log constant A (need eps < A/e)");
  auto F = [&](double s) { return s * std::pow(std::log(A / s), 1.0 / p); };
  double lo = 0.0, hi = hi_end;
  for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (F(mid) < eps ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

BarrierPair build_eps_barriers(const GridPtr& grid, const ProblemParams& params, double eps,
                               double bound_B, const BarrierOptions& opts) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  BarrierPair base = build_barriers(grid, params, bound_B, opts);
  const Regime reg = regime_of(params.delta);
  if (reg == Regime::delta_lt_1) return base;

  const auto [ell, L_up] = params.reaction.growth_bound(params.p);
  const double L_low = params.reaction.lower_bound();
  BarrierTarget t = BarrierTarget::stationary(grid, bound_B, ell);
  t.eps = eps;
  for (std::size_t k = 0; k < grid->size(); ++k) {
    t.g_sub[k] = -(bound_B + L_low);
    t.g_sup[k] = bound_B + L_up;
  }

  const Shapes s = shapes_for(grid, params);
  const GridFunction& phi1 = s.eig->phi1;
  const double p = params.p, delta = params.delta;

  Family fam;
  if (reg == Regime::delta_eq_1) {
    // The scale sits inside the logarithm; A is rescaled so that eps -> 0 recovers
    // scale * phi1 ln(A/phi1)^{1/p}.
    fam = [&, A = s.A](double c) {
      const double Ac = c * A;
      const double ep = solve_eps_prime(eps, Ac, p);
      const double shift = log_shape(ep, Ac, p);
      return map_phi(phi1, [&](double v) { return log_shape(c * v + ep, Ac, p) - shift; });
    };
  } else {
    const double beta = beta_of(p, delta);
    const double lift = std::pow(eps, 1.0 / beta);
    fam = [&, beta, lift](double c) {
      return map_phi(phi1, [&](double v) { return c * (std::pow(v + lift, beta) - eps); });
    };
  }
  BarrierOptions o = opts;
  o.eta_start = base.eta;
  o.M_start = base.M;
  BarrierPair out = search(params, t, fam, fam, o);
  out.A = reg == Regime::delta_eq_1 ? s.A : 0.0;
  out.eps = eps;
  out.search_steps += base.search_steps;
  return out;
}

void write_certificate_csv(std::ostream& os, const BarrierPair& pair) {
  os.precision(17);
  os << "node,under,over,residual_under,residual_over\n";
  for (std::size_t k = 0; k < pair.under.size(); ++k) {
    os << k << ',' << pair.under[k] << ',' << pair.over[k] << ',' << pair.residual_under[k] << ','
       << pair.residual_over[k] << '\n';
  }
}

void write_certificate_csv(const std::string& path, const BarrierPair& pair) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_certificate_csv(os, pair);
}

}  // namespace splap
