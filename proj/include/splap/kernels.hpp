#pragma once

// Elementwise and reduction kernels behind every discrete operator.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at startup from CPUID and
// can be overridden (SPLAP_ISA=scalar, or select()) for equivalence testing.

#include <cstddef>
#include <string_view>

namespace splap::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // out[i] = x[i]^a for x[i] >= 0, with 0^a = 0 (a > 0), 1 (a == 0), +inf (a < 0).
  void (*pow_nonneg)(const double* x, std::size_t n, double a, double* out);

  // coef[i] = |g_i|^{p-2} where |g|^2 = gx^2 + gy^2 (gy may be null).
  // Cells with g = 0 get coef 0 when p < 2 (flux extended by its limit).
  void (*grad_coef)(const double* gx, const double* gy, std::size_t n, double p, double* coef);

  // Regularized Hessian weights of (1/p)(|g|^2+mu2)^{p/2}:
  //   a = (|g|^2+mu2)^{(p-2)/2},  b = (p-2)(|g|^2+mu2)^{(p-4)/2}.
  void (*newton_coef)(const double* gx, const double* gy, std::size_t n, double p, double mu2,
                      double* a, double* b);

  // val = (u+eps)^{-delta}, deriv = delta (u+eps)^{-delta-1}. deriv may be null.
  void (*singular)(const double* u, std::size_t n, double eps, double delta, double* val,
                   double* deriv);

  double (*weighted_sum)(const double* w, const double* x, std::size_t n);
  double (*weighted_dot)(const double* w, const double* x, const double* y, std::size_t n);

  // max_i |x_i - y_i|; y may be null (then max_i |x_i|).
  double (*max_abs_diff)(const double* x, const double* y, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

Isa detect();
const KernelTable& active();
void select(Isa isa);

}  // namespace splap::kernels
