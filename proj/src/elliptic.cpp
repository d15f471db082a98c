#include "splap/elliptic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include "json.hpp"

#include "detail/assembly.hpp"
#include "detail/cache.hpp"
#include "splap/kernels.hpp"
#include "splap/plap.hpp"

namespace splap {

namespace {

using detail::InteriorMap;
using detail::SpMat;
using detail::Vec;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// s -> (s+eps)^{1-delta}/(1-delta), or log(s+eps) when delta = 1
double potential(double s, double eps, double delta) {
  if (delta == 1.0) return std::log(s + eps);
  return std::pow(s + eps, 1.0 - delta) / (1.0 - delta);
}

struct Problem {
  const Grid* grid;
  double p, delta, lambda, eps, mass;
  const GridFunction* g;
  const std::vector<double>* lo;  // may be null
  const std::vector<double>* hi;
};

struct Eval {
  double J = 0.0;
  GridFunction defect;
  std::vector<double> scale;  // per node, interior only meaningful
  std::vector<double> noise;  // rounding sensitivity of the computed defect
};

// Change of the element fluxes under a few-ulp perturbation of the nodal values,
// scattered like the operator. Near-zero gradients with p < 2 make this large.
std::vector<double> flux_noise(const GridFunction& u, double p) {
  const Grid& g = u.grid();
  const auto elems = g.elements();
  const auto gr = detail::element_gradients(u);
  constexpr double ulp = std::numeric_limits<double>::epsilon();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const Element& el = elems[e];
    double spread = 0.0;
    for (int k = 0; k < el.nodes; ++k)
      spread += (std::abs(el.bx[k]) + std::abs(el.by[k])) * std::abs(u[el.node[k]]);
    const double s = std::hypot(gr.gx[e], gr.gy[e]);
    const double dg = 4.0 * ulp * spread;
    const double sens = std::pow(s + dg, p - 1.0) - std::pow(s, p - 1.0);
    for (int k = 0; k < el.nodes; ++k)
      out[el.node[k]] += el.vol * sens * (std::abs(el.bx[k]) + std::abs(el.by[k]));
  }
  return out;
}

Eval evaluate(const Problem& P, const GridFunction& u) {
  Eval ev;
  GridFunction mag;
  const GridFunction lap = apply_p_laplacian(u, P.p, mag);
  ev.defect = GridFunction(u.grid_ptr());
  ev.scale.assign(u.size(), 0.0);
  ev.noise = flux_noise(u, P.p);
  const auto w = P.grid->weights();
  constexpr double ulp = std::numeric_limits<double>::epsilon();
  double site = 0.0;
  for (std::size_t k : P.grid->interior()) {
    const double s = u[k] + P.eps;
    const double sing = std::pow(s, -P.delta);
    const double gk = (*P.g)[k];
    ev.defect[k] = P.mass * u[k] - gk + P.lambda * (lap[k] - sing);
    ev.scale[k] = std::abs(P.mass * u[k]) + std::abs(gk) + P.lambda * (sing + mag[k]);
    ev.noise[k] = P.lambda * ev.noise[k] / w[k] + 16.0 * ulp * ev.scale[k];
    site += w[k] * (0.5 * P.mass * u[k] * u[k] - gk * u[k] - P.lambda * potential(u[k], P.eps, P.delta));
  }
  ev.J = site + P.lambda * dirichlet_energy(u, P.p);
  return ev;
}

bool at_lower(const Problem& P, const GridFunction& u, std::size_t k) {
  return P.lo && u[k] <= (*P.lo)[k];
}
bool at_upper(const Problem& P, const GridFunction& u, std::size_t k) {
  return P.hi && u[k] >= (*P.hi)[k];
}

// Nodes held by the box: on a bound with the descent direction pointing outward.
std::vector<char> active_set(const Problem& P, const GridFunction& u, const Eval& ev) {
  std::vector<char> act(u.size(), 0);
  for (std::size_t k : P.grid->interior()) {
    if (at_lower(P, u, k) && ev.defect[k] > 0.0) act[k] = 1;
    if (at_upper(P, u, k) && ev.defect[k] < 0.0) act[k] = 1;
  }
  return act;
}

double relative_residual(const Problem& P, const Eval& ev, const std::vector<char>& act) {
  double r = 0.0;
  for (std::size_t k : P.grid->interior()) {
    if (act[k]) continue;
    const double sc = ev.scale[k] > 0.0 ? ev.scale[k] : 1.0;
    r = std::max(r, std::max(0.0, std::abs(ev.defect[k]) - ev.noise[k]) / sc);
  }
  return r;
}

double abs_residual(const Problem& P, const Eval& ev, const std::vector<char>& act) {
  double r = 0.0;
  for (std::size_t k : P.grid->interior())
    if (!act[k]) r = std::max(r, std::abs(ev.defect[k]));
  return r;
}

// Keeps u in the box and strictly inside the domain of the potential.
std::size_t project(const Problem& P, GridFunction& u) {
  std::size_t n = 0;
  for (std::size_t k : P.grid->interior()) {
    if (P.lo && u[k] < (*P.lo)[k]) {
      u[k] = (*P.lo)[k];
      ++n;
    }
    if (P.hi && u[k] > (*P.hi)[k]) {
      u[k] = (*P.hi)[k];
      ++n;
    }
  }
  return n;
}

SpMat hessian(const Problem& P, const GridFunction& u, const InteriorMap& map, double mu,
              bool picard) {
  SpMat H = P.lambda * detail::p_laplacian_hessian(u, P.p, mu, map, picard);
  const auto w = P.grid->weights();
  Vec diag(static_cast<Eigen::Index>(map.count));
  for (std::size_t k : P.grid->interior()) {
    const double s = u[k] + P.eps;
    diag[static_cast<Eigen::Index>(map.slot[k])] =
        w[k] * (P.mass + P.lambda * P.delta * std::pow(s, -P.delta - 1.0));
  }
  for (Eigen::Index i = 0; i < diag.size(); ++i) H.coeffRef(i, i) += diag[i];
  return H;
}

void pin_rows(SpMat& H, const std::vector<char>& pinned_slot) {
  for (int k = 0; k < H.outerSize(); ++k) {
    for (SpMat::InnerIterator it(H, k); it; ++it) {
      const bool pr = pinned_slot[static_cast<std::size_t>(it.row())];
      const bool pc = pinned_slot[static_cast<std::size_t>(it.col())];
      if (pr || pc) it.valueRef() = it.row() == it.col() ? 1.0 : 0.0;
    }
  }
}

GridFunction newton(const Problem& P, GridFunction u, const SolveOptions& opts, SolveReport& rep) {
  const Grid& grid = *P.grid;
  const InteriorMap map(grid);
  const auto interior = grid.interior();
  const auto w = grid.weights();

  // keep the start strictly inside the potential's domain
  for (std::size_t k : interior)
    if (!(u[k] + P.eps > 0.0)) u[k] = std::max(-P.eps, 0.0) + 1e-3 * grid.dist()[k] + 1e-300;
  rep.clamp_activations += project(P, u);

  double uscale = std::max(norm_Linf(u), norm_Linf(*P.g));
  if (!(uscale > 0.0)) uscale = 1.0;
  const double ext = grid.dim() == 1 ? grid.extent(0) : std::min(grid.extent(0), grid.extent(1));
  const double gradscale = uscale / ext;
  const double mu_floor = 1e-10 * gradscale;

  Eval ev = evaluate(P, u);
  std::vector<char> act = active_set(P, u, ev);
  double rel = relative_residual(P, ev, act);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;
  std::size_t it = 0;
  for (; rel > opts.tol; ++it) {
    if (it >= opts.max_newton) {
      rep.relative_residual = rel;
      rep.residual = abs_residual(P, ev, act);
      throw SolveError("Newton iteration limit reached", rep);
    }
    std::vector<char> pinned(map.count, 0);
    Vec G(static_cast<Eigen::Index>(map.count));
    for (std::size_t k : interior) {
      const std::size_t s = map.slot[k];
      pinned[s] = act[k];
      G[static_cast<Eigen::Index>(s)] = act[k] ? 0.0 : w[k] * ev.defect[k];
    }
    const double res0 = abs_residual(P, ev, act);
    // For p < 2 the curvature |g|^{p-2} is unbounded where a cell gradient crosses
    // zero; tying mu to the residual keeps early steps from stalling there.
    const double mu = P.p < 2.0 ? std::max(mu_floor, 1e-2 * std::min(1.0, rel) * gradscale) : mu_floor;

    bool accepted = false;
    for (int mode = 0; mode < 2 && !accepted; ++mode) {
      const bool picard = mode == 1;
      SpMat H = hessian(P, u, map, mu, picard);
      pin_rows(H, pinned);
      if (!analyzed) {
        ldlt.analyzePattern(H);
        analyzed = true;
      }
      ldlt.factorize(H);
      if (ldlt.info() != Eigen::Success) continue;
      const Vec d = -ldlt.solve(G);
      if (!d.allFinite()) continue;

      // fraction to the boundary of the potential's domain
      double amax = 1.0;
      for (std::size_t k : interior) {
        const double dk = d[static_cast<Eigen::Index>(map.slot[k])];
        if (dk < 0.0) amax = std::min(amax, 0.95 * (u[k] + P.eps) / -dk);
      }
      for (double alpha = amax; alpha > 1e-14; alpha *= 0.5) {
        GridFunction trial = u;
        for (std::size_t k : interior) trial[k] += alpha * d[static_cast<Eigen::Index>(map.slot[k])];
        std::size_t proj = project(P, trial);
        Eval tev = evaluate(P, trial);
        double slope = 0.0;
        for (std::size_t k : interior) slope += w[k] * ev.defect[k] * (trial[k] - u[k]);
        const bool armijo = tev.J <= ev.J + 1e-4 * slope;
        const bool residual_drop = abs_residual(P, tev, active_set(P, trial, tev)) < (1.0 - 1e-4 * alpha) * res0;
        if (std::isfinite(tev.J) && (armijo || residual_drop)) {
          // Keep halving while the energy still drops beyond rounding, or stays flat
          // while the residual drops: full steps on sign(g)|g|^{p-1} with p < 2 can
          // flip a cell gradient back and forth below the energy's resolution.
          double tres = abs_residual(P, tev, active_set(P, trial, tev));
          for (double a2 = 0.5 * alpha; a2 > 1e-14; a2 *= 0.5) {
            GridFunction t2 = u;
            for (std::size_t k : interior) t2[k] += a2 * d[static_cast<Eigen::Index>(map.slot[k])];
            const std::size_t proj2 = project(P, t2);
            Eval ev2 = evaluate(P, t2);
            const double flat = 1e-13 * std::abs(tev.J);
            const double res2 = abs_residual(P, ev2, active_set(P, t2, ev2));
            const bool better = ev2.J < tev.J - flat || (ev2.J <= tev.J + flat && res2 < tres);
            if (!better) break;
            tres = res2;
            trial = std::move(t2);
            tev = std::move(ev2);
            proj = proj2;
          }
          rep.clamp_activations += proj;
          u = std::move(trial);
          act = active_set(P, u, tev);
          ev = std::move(tev);
          accepted = true;
          break;
        }
      }
      if (accepted && picard) ++rep.picard_steps;
    }
    if (!accepted) {
      rep.relative_residual = rel;
      rep.residual = res0;
      throw SolveError("Newton and Picard line searches stagnated", rep);
    }
    rel = relative_residual(P, ev, act);
  }
  rep.iterations += it;
  rep.relative_residual = rel;
  rep.residual = abs_residual(P, ev, act);
  rep.final_active = 0;
  for (std::size_t k : interior) rep.final_active += (at_lower(P, u, k) || at_upper(P, u, k));
  return u;
}

GridFunction default_start(const GridPtr& grid, const GridFunction& g) {
  const double s = std::max(1.0, norm_Linf(g));
  GridFunction u(grid);
  const double md = grid->max_dist();
  for (std::size_t k : grid->interior()) u[k] = s * grid->dist()[k] / md + std::max(g[k], 0.0);
  return u;
}

double min_interior(const GridFunction& u) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k : u.grid().interior()) m = std::min(m, u[k]);
  return m;
}

}  // namespace

std::string SolveReport::to_json() const {
  nlohmann::json j{{"iterations", iterations},
                   {"picard_steps", picard_steps},
                   {"continuation_steps", continuation_steps},
                   {"residual", residual},
                   {"relative_residual", relative_residual},
                   {"eps_schedule", eps_schedule},
                   {"increments", increments},
                   {"clamp_activations", clamp_activations},
                   {"final_active", final_active},
                   {"barriers_used", barriers_used},
                   {"w1p0_claim", w1p0_claim},
                   {"cone", {{"c1", cone_c1}, {"c2", cone_c2}, {"member", cone_member}}},
                   {"wall_seconds", wall_seconds}};
  return j.dump(2);
}

std::string StationaryReport::to_json() const {
  nlohmann::json j{{"iterations", iterations},
                   {"K", K},
                   {"min_increment", min_increment},
                   {"last_change", last_change},
                   {"sandwich_ok", sandwich_ok},
                   {"inner", nlohmann::json::parse(inner.to_json())}};
  return j.dump(2);
}

GridFunction resolvent_defect(const GridFunction& u, const ProblemParams& params, double lambda,
                              double eps, const GridFunction& g, double mass) {
  const GridFunction lap = apply_p_laplacian(u, params.p);
  GridFunction r(u.grid_ptr());
  for (std::size_t k : u.grid().interior())
    r[k] = mass * u[k] - g[k] + lambda * (lap[k] - std::pow(u[k] + eps, -params.delta));
  return r;
}

GridFunction solve_regularized(const GridPtr& grid, const ProblemParams& params, double lambda,
                               double eps, const GridFunction& g, const BarrierPair* barriers,
                               const SolveOptions& opts, SolveReport* report,
                               const GridFunction* initial) {
  params.validate();
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (!(eps >= 0.0)) throw InvalidArgument("eps must be nonnegative");
  if (!g.all_finite()) throw InvalidArgument("g must be finite");
  const auto t0 = Clock::now();
  SolveReport local;
  SolveReport& rep = report ? *report : local;

  std::vector<double> lo, hi;
  if (barriers) {
    lo.assign(grid->size(), 0.0);
    hi.assign(grid->size(), 0.0);
    for (std::size_t k = 0; k < grid->size(); ++k) {
      lo[k] = barriers->under[k] - eps;
      hi[k] = barriers->over[k];
    }
    rep.barriers_used = true;
  }
  Problem P{grid.get(), params.p, params.delta, lambda, eps, opts.mass, &g,
            barriers ? &lo : nullptr, barriers ? &hi : nullptr};

  GridFunction u0;
  if (initial) {
    u0 = *initial;
  } else if (barriers) {
    u0 = 0.5 * (barriers->under + barriers->over);
  } else {
    u0 = default_start(grid, g);
  }
  u0.set_dirichlet(true);
  GridFunction u = newton(P, std::move(u0), opts, rep);
  rep.wall_seconds += seconds_since(t0);
  return u;
}

std::pair<GridFunction, SolveReport> solve_singular(const GridPtr& grid,
                                                    const ProblemParams& params, double lambda,
                                                    const GridFunction& g,
                                                    const SolveOptions& opts,
                                                    const GridFunction* initial) {
  params.validate();
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  const auto t0 = Clock::now();
  SolveReport rep;
  rep.w1p0_claim = params.below_threshold();

  BarrierPair built;
  const BarrierPair* bar = opts.barriers;
  if (!bar && opts.auto_barriers) {
    try {
      built = build_resolvent_barriers(grid, params, lambda, g, opts.mass);
      bar = &built;
    } catch (const BarrierSearchError&) {
      bar = nullptr;
    }
  }

  GridFunction u;
  if (params.delta < 1.0) {
    u = solve_regularized(grid, params, lambda, 0.0, g, bar, opts, &rep, initial);
    rep.eps_schedule.push_back(0.0);
  } else {
    double eps = opts.eps0;
    GridFunction prev;
    if (!(eps > 0.0)) {
      if (bar) {
        eps = 1e-2 * min_interior(bar->under);
      } else {
        // the unregularized discrete problem is solvable; it fixes the scale
        prev = solve_regularized(grid, params, lambda, 0.0, g, nullptr, opts, &rep, initial);
        eps = 1e-2 * min_interior(prev);
      }
    }
    const GridFunction* warm = prev.size() ? &prev : initial;
    GridFunction cur = solve_regularized(grid, params, lambda, eps, g, bar, opts, &rep, warm);
    rep.eps_schedule.push_back(eps);
    int rising = 0;
    for (std::size_t k = 1;; ++k) {
      if (k > opts.max_continuation)
        throw SolveError("eps continuation did not settle", rep);
      eps *= 0.5;
      GridFunction next = solve_regularized(grid, params, lambda, eps, g, bar, opts, &rep, &cur);
      rep.eps_schedule.push_back(eps);
      const double inc = max_abs_diff(next, cur);
      rep.increments.push_back(inc);
      cur = std::move(next);
      const double scale = std::max(1.0, norm_Linf(cur));
      if (inc < opts.tol * scale) break;
      const std::size_t n = rep.increments.size();
      if (n >= 2 && inc >= rep.increments[n - 2] && inc > 100.0 * opts.tol * scale) {
        if (++rising >= 2) throw SolveError("eps continuation increments stopped contracting", rep);
      } else {
        rising = 0;
      }
    }
    rep.continuation_steps = rep.eps_schedule.size();
    u = std::move(cur);
  }

  const ConeFit fit = cone_fit(u, cone_profile(grid, params.p, params.delta));
  rep.cone_c1 = fit.c1;
  rep.cone_c2 = fit.c2;
  rep.cone_member = fit.member;
  rep.wall_seconds = seconds_since(t0);
  return {std::move(u), std::move(rep)};
}

GridFunction solve_homogeneous_U(const GridPtr& grid, double p, double delta, SolveReport* report,
                                 double tol) {
  ProblemParams params;
  params.p = p;
  params.delta = delta;
  params.validate();
  if (!params.below_threshold())
    throw InvalidArgument("homogeneous problem requires delta < 2 + 1/(p-1)");
  const double ext = std::max(grid->extent(0), grid->dim() == 2 ? grid->extent(1) : 0.0);
  // pseudo-time step; continuation device for the lambda -> infinity limit
  const double lambda_big = 1e6 * std::pow(ext, p);

  SolveOptions opts;
  opts.tol = tol;
  opts.auto_barriers = false;
  GridFunction u(grid);
  SolveReport last;
  double prev_inc = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 60; ++j) {
    auto [next, rep] = solve_singular(grid, params, lambda_big, u, opts, j ? &u : nullptr);
    const double inc = max_abs_diff(next, u);
    u = std::move(next);
    last = std::move(rep);
    if (inc < tol * std::max(1.0, norm_Linf(u))) {
      if (report) *report = last;
      return u;
    }
    if (j > 2 && inc >= prev_inc) throw SolveError("homogeneous fixed point stagnated", last);
    prev_inc = inc;
  }
  throw SolveError("homogeneous fixed point did not converge", last);
}

BarrierPair stationary_barriers(const GridPtr& grid, const ProblemParams& params,
                                const GridFunction* enclose) {
  const auto [ell, L_up] = params.reaction.growth_bound(params.p);
  (void)ell;
  double B = std::max(params.reaction.lower_bound(), L_up);
  if (!(B > 0.0)) B = 1.0;
  BarrierOptions o;
  o.enclose = enclose;
  return build_barriers(grid, params, B, o);
}

std::pair<GridFunction, StationaryReport> solve_stationary_Q(const GridPtr& grid,
                                                             const ProblemParams& params,
                                                             const StationaryOptions& opts) {
  params.validate();
  params.check_sublinear(detail::eigenpair_cached(grid, params.p).lambda1);

  BarrierPair built;
  const BarrierPair* bar = opts.barriers;
  if (!bar) {
    built = stationary_barriers(grid, params, opts.start);
    bar = &built;
  }

  StationaryReport rep;
  const double top = norm_Linf(bar->over);
  double lip = params.reaction.lipschitz(0.0, top);
  if (!std::isfinite(lip)) lip = params.reaction.lipschitz(min_interior(bar->under), top);
  rep.K = 1.1 * lip;

  const bool monotone = opts.start == nullptr;
  GridFunction u = opts.start ? *opts.start : bar->under;
  if (opts.iterates) opts.iterates->push_back(u);

  SolveOptions so;
  so.tol = opts.tol;
  so.barriers = bar;
  so.mass = rep.K > 0.0 ? 1.0 : 0.0;
  const double lambda = rep.K > 0.0 ? 1.0 / rep.K : 1.0;
  rep.min_increment = std::numeric_limits<double>::infinity();

  for (std::size_t n = 1;; ++n) {
    if (n > opts.max_iterations) throw SolveError("stationary iteration did not converge", rep.inner);
    const GridFunction fu = params.reaction.apply(u);
    GridFunction g(grid, 0.0, false);
    for (std::size_t k = 0; k < g.size(); ++k)
      g[k] = rep.K > 0.0 ? u[k] + fu[k] / rep.K : fu[k];
    auto [next, inner] = solve_singular(grid, params, lambda, g, so, &u);
    rep.inner = std::move(inner);

    double minc = std::numeric_limits<double>::infinity();
    for (std::size_t k : grid->interior()) minc = std::min(minc, next[k] - u[k]);
    rep.min_increment = std::min(rep.min_increment, minc);
    const double scale = std::max(1.0, norm_Linf(next));
    if (monotone && minc < -10.0 * opts.tol * scale)
      throw MonotonicityError("stationary iterates decreased; shift K too small");

    rep.last_change = max_abs_diff(next, u);
    u = std::move(next);
    rep.iterations = n;
    if (opts.iterates) opts.iterates->push_back(u);
    if (rep.last_change < opts.tol * scale) break;
  }

  const double slack = 10.0 * opts.tol * std::max(1.0, norm_Linf(u));
  rep.sandwich_ok = true;
  for (std::size_t k : grid->interior())
    if (u[k] < bar->under[k] - slack || u[k] > bar->over[k] + slack) rep.sandwich_ok = false;
  return {std::move(u), std::move(rep)};
}

ComparisonReport check_weak_comparison(const GridFunction& u, const GridFunction& v, double tol) {
  ComparisonReport r;
  r.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < u.size(); ++k) r.max_violation = std::max(r.max_violation, u[k] - v[k]);
  r.pass = r.max_violation <= 10.0 * tol;
  return r;
}

namespace detail {

const EigenPair& eigenpair_cached(const GridPtr& g, double p) {
  static GridMemo<EigenPair> memo;
  return memo.get(g, p, 0.0, [&] { return first_eigenpair(g, p); });
}

const GridFunction& homogeneous_cached(const GridPtr& g, double p, double delta) {
  static GridMemo<GridFunction> memo;
  return memo.get(g, p, delta, [&] { return solve_homogeneous_U(g, p, delta); });
}

}  // namespace detail

}  // namespace splap
