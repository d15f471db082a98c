#include "splap/plap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include "json.hpp"

#include "detail/assembly.hpp"
#include "splap/kernels.hpp"

namespace splap {
namespace detail {

InteriorMap::InteriorMap(const Grid& g) : slot(g.size(), npos) {
  for (std::size_t k : g.interior()) slot[k] = count++;
}

ElementGradients element_gradients(const GridFunction& u) {
  const auto elems = u.grid().elements();
  ElementGradients out;
  out.gx.resize(elems.size());
  out.gy.resize(elems.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const Element& el = elems[e];
    double gx = 0.0, gy = 0.0;
    for (int k = 0; k < el.nodes; ++k) {
      const double v = u[el.node[k]];
      gx += el.bx[k] * v;
      gy += el.by[k] * v;
    }
    out.gx[e] = gx;
    out.gy[e] = gy;
  }
  return out;
}

SpMat p_laplacian_hessian(const GridFunction& u, double p, double mu, const InteriorMap& map,
                          bool picard) {
  const Grid& g = u.grid();
  const auto elems = g.elements();
  const auto grads = element_gradients(u);
  const bool two_d = g.dim() == 2;
  std::vector<double> a(elems.size()), b(elems.size());
  kernels::active().newton_coef(grads.gx.data(), two_d ? grads.gy.data() : nullptr,
                                elems.size(), p, mu * mu, a.data(), b.data());

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(elems.size() * 9);
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const Element& el = elems[e];
    const double gx = grads.gx[e], gy = two_d ? grads.gy[e] : 0.0;
    const double bb = picard ? 0.0 : b[e];
    // M = a I + b g g^T
    const double mxx = a[e] + bb * gx * gx;
    const double mxy = bb * gx * gy;
    const double myy = a[e] + bb * gy * gy;
    for (int r = 0; r < el.nodes; ++r) {
      const std::size_t ir = map.slot[el.node[r]];
      if (ir == InteriorMap::npos) continue;
      for (int c = 0; c < el.nodes; ++c) {
        const std::size_t ic = map.slot[el.node[c]];
        if (ic == InteriorMap::npos) continue;
        const double val = el.vol * (el.bx[r] * (mxx * el.bx[c] + mxy * el.by[c]) +
                                     el.by[r] * (mxy * el.bx[c] + myy * el.by[c]));
        trip.emplace_back(static_cast<int>(ir), static_cast<int>(ic), val);
      }
    }
  }
  SpMat H(static_cast<Eigen::Index>(map.count), static_cast<Eigen::Index>(map.count));
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

SpMat laplacian_stiffness(const GridPtr& g, const InteriorMap& map) {
  GridFunction zero(g);
  return p_laplacian_hessian(zero, 2.0, 0.0, map, true);
}

}  // namespace detail

namespace {

// Gradient of E_p with respect to nodal values; optionally the sum of absolute
// element contributions per node.
void energy_gradient(const GridFunction& u, double p, std::vector<double>& grad,
                     std::vector<double>* magnitude) {
  const Grid& g = u.grid();
  const auto elems = g.elements();
  const auto grads = detail::element_gradients(u);
  const bool two_d = g.dim() == 2;
  std::vector<double> coef(elems.size());
  kernels::active().grad_coef(grads.gx.data(), two_d ? grads.gy.data() : nullptr, elems.size(),
                              p, coef.data());
  grad.assign(g.size(), 0.0);
  if (magnitude) magnitude->assign(g.size(), 0.0);
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const Element& el = elems[e];
    const double fx = el.vol * coef[e] * grads.gx[e];
    const double fy = two_d ? el.vol * coef[e] * grads.gy[e] : 0.0;
    for (int k = 0; k < el.nodes; ++k) {
      const double c = fx * el.bx[k] + fy * el.by[k];
      grad[el.node[k]] += c;
      if (magnitude) (*magnitude)[el.node[k]] += std::abs(c);
    }
  }
}

}  // namespace

GridFunction apply_p_laplacian(const GridFunction& u, double p, GridFunction& magnitude) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  std::vector<double> grad, mag;
  energy_gradient(u, p, grad, &mag);
  const Grid& g = u.grid();
  const auto w = g.weights();
  GridFunction out(u.grid_ptr(), 0.0, true);
  magnitude = GridFunction(u.grid_ptr(), 0.0, true);
  for (std::size_t k : g.interior()) {
    out[k] = grad[k] / w[k];
    magnitude[k] = mag[k] / w[k];
  }
  return out;
}

GridFunction apply_p_laplacian(const GridFunction& u, double p) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  std::vector<double> grad;
  energy_gradient(u, p, grad, nullptr);
  const Grid& g = u.grid();
  const auto w = g.weights();
  GridFunction out(u.grid_ptr(), 0.0, true);
  for (std::size_t k : g.interior()) out[k] = grad[k] / w[k];
  return out;
}

double dirichlet_energy(const GridFunction& u, double p) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  // direct sum; energy differences between nearby fields stay accurate
  const auto elems = u.grid().elements();
  const auto gr = detail::element_gradients(u);
  double s = 0.0;
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const double n2 = gr.gx[e] * gr.gx[e] + gr.gy[e] * gr.gy[e];
    if (n2 > 0.0) s += elems[e].vol * std::pow(n2, 0.5 * p);
  }
  return s / p;
}

double rayleigh_quotient(const GridFunction& u, double p) {
  const double num = std::pow(seminorm_W1p(u, p), p);
  const double den = std::pow(norm_Lq(u, p), p);
  return num / den;
}

namespace {

// |u|^{p-2} u
double signed_pow(double v, double p) {
  if (v == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(v), p - 1.0), v);
}

void normalize_p(GridFunction& u, double p) {
  const double n = norm_Lq(u, p);
  u *= 1.0 / n;
}

}  // namespace

EigenPair first_eigenpair(const GridPtr& grid, double p, const EigenOptions& opts) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  const Grid& g = *grid;
  const detail::InteriorMap map(g);
  const auto interior = g.interior();
  const auto w = g.weights();
  const std::size_t m = map.count;

  Eigen::SimplicialLDLT<detail::SpMat> precond(detail::laplacian_stiffness(grid, map));
  if (precond.info() != Eigen::Success) throw EigenSolveError("preconditioner failed", 0, 0.0);

  GridFunction u = distance_function(grid);
  normalize_p(u, p);

  detail::Vec x(m), grad(m), z(m), x_prev(m), grad_prev(m), z_prev(m);
  auto gather = [&](const GridFunction& f, detail::Vec& out) {
    for (std::size_t i = 0; i < m; ++i) out[static_cast<Eigen::Index>(i)] = f[interior[i]];
  };
  gather(u, x);

  double alpha = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  double best_residual = residual;
  std::size_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    const GridFunction op = apply_p_laplacian(u, p);
    const double R = rayleigh_quotient(u, p);
    const double unorm = norm_Linf(u);
    double rmax = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = interior[i];
      const double r = op[k] - R * signed_pow(u[k], p);
      rmax = std::max(rmax, std::abs(r));
      // gradient of R on the normalized sphere, up to the factor p
      grad[static_cast<Eigen::Index>(i)] = w[k] * r;
    }
    residual = rmax / (R * std::pow(unorm, p - 1.0));
    best_residual = std::min(best_residual, residual);
    if (residual <= opts.tol) break;

    z = precond.solve(grad);
    if (it == 0) {
      alpha = 0.1 * x.cwiseAbs().maxCoeff() / std::max(z.cwiseAbs().maxCoeff(), 1e-300);
    } else {
      const detail::Vec s = x - x_prev;
      const detail::Vec y = grad - grad_prev;
      const detail::Vec zy = z - z_prev;
      const double sy = s.dot(y);
      const double yzy = y.dot(zy);
      if (sy > 0.0 && yzy > 0.0) alpha = sy / yzy;
    }
    x_prev = x;
    grad_prev = grad;
    z_prev = z;
    x -= alpha * z;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::max(x[i], 0.0);

    for (std::size_t i = 0; i < m; ++i) u[interior[i]] = x[static_cast<Eigen::Index>(i)];
    normalize_p(u, p);
    gather(u, x);
  }
  if (residual > opts.tol)
    throw EigenSolveError("first_eigenpair did not converge", it, residual);

  EigenPair ep;
  ep.p = p;
  ep.lambda1 = rayleigh_quotient(u, p);
  ep.iterations = it;
  ep.residual = residual;
  for (std::size_t k : interior)
    if (!(u[k] > 0.0)) ep.clamped = true;
  ep.phi1 = std::move(u);
  return ep;
}

std::string eigen_report_json(const EigenPair& ep) {
  nlohmann::json j{{"p", ep.p},
                   {"lambda1", ep.lambda1},
                   {"iterations", ep.iterations},
                   {"residual", ep.residual}};
  return j.dump(2);
}

double monotonicity_constant(double p) {
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  return p >= 2.0 ? std::pow(2.0, 2.0 - p) : (p - 1.0) * std::pow(2.0, 2.0 - p);
}

MonotonicityGap monotonicity_gap(const GridFunction& u, const GridFunction& v, double p) {
  const GridFunction diff = u - v;
  MonotonicityGap gap;
  gap.constant = monotonicity_constant(p);
  gap.lhs = pairing(apply_p_laplacian(u, p) - apply_p_laplacian(v, p), diff);
  const double d = seminorm_W1p(diff, p);
  if (p >= 2.0) {
    gap.rhs = gap.constant * std::pow(d, p);
  } else {
    const double denom = seminorm_W1p(u, p) + seminorm_W1p(v, p);
    gap.rhs = denom > 0.0 ? gap.constant * d * d / std::pow(denom, 2.0 - p) : 0.0;
  }
  return gap;
}

}  // namespace splap
