#include "splap/kernels.hpp"

#include <cmath>
#include <limits>

namespace splap::kernels {
namespace {

double pow_nonneg_one(double x, double a) {
  if (x == 0.0) {
    if (a > 0.0) return 0.0;
    if (a == 0.0) return 1.0;
    return std::numeric_limits<double>::infinity();
  }
  return std::pow(x, a);
}

void pow_nonneg(const double* x, std::size_t n, double a, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pow_nonneg_one(x[i], a);
}

double norm_sq(const double* gx, const double* gy, std::size_t i) {
  double s = gx[i] * gx[i];
  if (gy) s += gy[i] * gy[i];
  return s;
}

void grad_coef(const double* gx, const double* gy, std::size_t n, double p, double* coef) {
  const double e = 0.5 * (p - 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = norm_sq(gx, gy, i);
    if (p == 2.0)
      coef[i] = 1.0;
    else if (s == 0.0)
      coef[i] = 0.0;
    else
      coef[i] = std::pow(s, e);
  }
}

void newton_coef(const double* gx, const double* gy, std::size_t n, double p, double mu2,
                 double* a, double* b) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = norm_sq(gx, gy, i) + mu2;
    if (p == 2.0) {
      a[i] = 1.0;
      b[i] = 0.0;
      continue;
    }
    const double ai = std::pow(s, 0.5 * (p - 2.0));
    a[i] = ai;
    b[i] = (p - 2.0) * ai / s;
  }
}

void singular(const double* u, std::size_t n, double eps, double delta, double* val,
              double* deriv) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = u[i] + eps;
    const double v = std::pow(s, -delta);
    val[i] = v;
    if (deriv) deriv[i] = delta * v / s;
  }
}

double weighted_sum(const double* w, const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * x[i];
  return acc;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * x[i] * y[i];
  return acc;
}

double max_abs_diff(const double* x, const double* y, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(y ? x[i] - y[i] : x[i]);
    if (d > m || std::isnan(d)) m = d;
  }
  return m;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, pow_nonneg,   grad_coef,   newton_coef,
                                 singular,    weighted_sum, weighted_dot, max_abs_diff};
  return table;
}

}  // namespace splap::kernels
