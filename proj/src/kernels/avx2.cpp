// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a CPUID check (see dispatch.cpp).

#include "splap/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

namespace splap::kernels {
namespace {

constexpr int kLanes = 4;

// log(x) for x > 0 finite. Subnormals are rescaled by 2^54 first.
// log(m 2^e) = e ln2 + 2 atanh(s), s = (m-1)/(m+1), m in [sqrt(1/2), sqrt(2)).
inline __m256d log_pd(__m256d x) {
  const __m256d tiny = _mm256_set1_pd(std::numeric_limits<double>::min());
  const __m256d is_sub = _mm256_cmp_pd(x, tiny, _CMP_LT_OQ);
  x = _mm256_blendv_pd(x, _mm256_mul_pd(x, _mm256_set1_pd(0x1p54)), is_sub);
  __m256d ebias = _mm256_and_pd(is_sub, _mm256_set1_pd(54.0));

  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  // Exponent field is at most 2046 so the low 32 bits of each lane suffice.
  const __m128i e32 = _mm256_castsi256_si128(
      _mm256_permutevar8x32_epi32(exp_bits, _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6)));
  __m256d e = _mm256_sub_pd(_mm256_cvtepi32_pd(e32), _mm256_set1_pd(1023.0));
  e = _mm256_sub_pd(e, ebias);

  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, _mm256_set1_pd(1.0)));

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);
  // 1 + z/3 + z^2/5 + ... + z^11/23
  __m256d poly = _mm256_set1_pd(1.0 / 23.0);
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 21.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 19.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 17.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 15.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 13.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 11.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 9.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 7.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 5.0));
  poly = _mm256_fmadd_pd(poly, z, _mm256_set1_pd(1.0 / 3.0));
  // log m = 2s + 2s z poly'  where poly = 1 + z*poly'
  const __m256d two_s = _mm256_add_pd(s, s);
  const __m256d tail = _mm256_mul_pd(_mm256_mul_pd(two_s, z), poly);

  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  __m256d r = _mm256_fmadd_pd(e, ln2_lo, tail);
  r = _mm256_add_pd(r, two_s);
  return _mm256_fmadd_pd(e, ln2_hi, r);
}

inline __m256d pow2i_pd(__m256d k) {
  // 2^k for integral k in [-1022, 1023]
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_castsi256_pd(bits);
}

// exp(y); inputs beyond the double range saturate to 0 / +inf.
inline __m256d exp_pd(__m256d y) {
  y = _mm256_max_pd(y, _mm256_set1_pd(-746.0));
  const __m256d overflow = _mm256_cmp_pd(y, _mm256_set1_pd(709.79), _CMP_GT_OQ);
  y = _mm256_min_pd(y, _mm256_set1_pd(709.79));

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d k =
      _mm256_round_pd(_mm256_mul_pd(y, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, y);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  // Taylor to degree 13, |r| <= ln2/2
  static constexpr double c[] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
                                 1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
                                 1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
                                 1.0 / 24.0,         1.0 / 6.0,         0.5,
                                 1.0,                1.0};
  __m256d poly = _mm256_set1_pd(c[0]);
  for (int i = 1; i < 14; ++i) poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(c[i]));

  // Split 2^k into two factors so that subnormal results come out gradually.
  const __m256d k1 = _mm256_floor_pd(_mm256_mul_pd(k, _mm256_set1_pd(0.5)));
  const __m256d k2 = _mm256_sub_pd(k, k1);
  __m256d out = _mm256_mul_pd(_mm256_mul_pd(poly, pow2i_pd(k1)), pow2i_pd(k2));
  return _mm256_blendv_pd(out, _mm256_set1_pd(std::numeric_limits<double>::infinity()), overflow);
}

// x^a for x >= 0 with the zero conventions of pow_nonneg.
inline __m256d pow_pd(__m256d x, double a) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d is_zero = _mm256_cmp_pd(x, zero, _CMP_EQ_OQ);
  const __m256d safe = _mm256_blendv_pd(x, _mm256_set1_pd(1.0), is_zero);
  const __m256d r = exp_pd(_mm256_mul_pd(_mm256_set1_pd(a), log_pd(safe)));
  double zval = a > 0.0 ? 0.0 : (a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return _mm256_blendv_pd(r, _mm256_set1_pd(zval), is_zero);
}

double pow_nonneg_tail(double x, double a) {
  if (x == 0.0) return a > 0.0 ? 0.0 : (a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return std::pow(x, a);
}

void pow_nonneg(const double* x, std::size_t n, double a, double* out) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(out + i, pow_pd(_mm256_loadu_pd(x + i), a));
  for (; i < n; ++i) out[i] = pow_nonneg_tail(x[i], a);
}

inline __m256d load_norm_sq(const double* gx, const double* gy, std::size_t i) {
  const __m256d x = _mm256_loadu_pd(gx + i);
  __m256d s = _mm256_mul_pd(x, x);
  if (gy) {
    const __m256d y = _mm256_loadu_pd(gy + i);
    s = _mm256_fmadd_pd(y, y, s);
  }
  return s;
}

void grad_coef(const double* gx, const double* gy, std::size_t n, double p, double* coef) {
  if (p == 2.0) {
    for (std::size_t i = 0; i < n; ++i) coef[i] = 1.0;
    return;
  }
  const double e = 0.5 * (p - 2.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d s = load_norm_sq(gx, gy, i);
    __m256d c;
    if (p == 4.0)
      c = s;
    else if (p == 3.0)
      c = _mm256_sqrt_pd(s);
    else
      c = pow_pd(s, e);
    // g = 0 → 0 for every p != 2 (pow gives +inf when p < 2)
    c = _mm256_blendv_pd(c, _mm256_setzero_pd(),
                         _mm256_cmp_pd(s, _mm256_setzero_pd(), _CMP_EQ_OQ));
    _mm256_storeu_pd(coef + i, c);
  }
  for (; i < n; ++i) {
    double s = gx[i] * gx[i];
    if (gy) s += gy[i] * gy[i];
    coef[i] = s == 0.0 ? 0.0 : (p == 4.0 ? s : (p == 3.0 ? std::sqrt(s) : std::pow(s, e)));
  }
}

void newton_coef(const double* gx, const double* gy, std::size_t n, double p, double mu2,
                 double* a, double* b) {
  if (p == 2.0) {
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = 1.0;
      b[i] = 0.0;
    }
    return;
  }
  const double e = 0.5 * (p - 2.0);
  const __m256d vmu2 = _mm256_set1_pd(mu2);
  const __m256d vpm2 = _mm256_set1_pd(p - 2.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d s = _mm256_add_pd(load_norm_sq(gx, gy, i), vmu2);
    __m256d av;
    if (p == 4.0)
      av = s;
    else if (p == 3.0)
      av = _mm256_sqrt_pd(s);
    else
      av = pow_pd(s, e);
    _mm256_storeu_pd(a + i, av);
    _mm256_storeu_pd(b + i, _mm256_div_pd(_mm256_mul_pd(vpm2, av), s));
  }
  for (; i < n; ++i) {
    double s = gx[i] * gx[i] + mu2;
    if (gy) s += gy[i] * gy[i];
    const double ai = p == 4.0 ? s : (p == 3.0 ? std::sqrt(s) : std::pow(s, e));
    a[i] = ai;
    b[i] = (p - 2.0) * ai / s;
  }
}

void singular(const double* u, std::size_t n, double eps, double delta, double* val,
              double* deriv) {
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vdelta = _mm256_set1_pd(delta);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d s = _mm256_add_pd(_mm256_loadu_pd(u + i), veps);
    const __m256d v = pow_pd(s, -delta);
    _mm256_storeu_pd(val + i, v);
    if (deriv) _mm256_storeu_pd(deriv + i, _mm256_div_pd(_mm256_mul_pd(vdelta, v), s));
  }
  for (; i < n; ++i) {
    const double s = u[i] + eps;
    const double v = std::pow(s, -delta);
    val[i] = v;
    if (deriv) deriv[i] = delta * v / s;
  }
}

// Lane partials are combined in a fixed order so results are reproducible run to run.
double hsum(__m256d v) {
  alignas(32) double t[kLanes];
  _mm256_store_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

double weighted_sum(const double* w, const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * x[i];
  return s;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    acc = _mm256_fmadd_pd(wx, _mm256_loadu_pd(y + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * x[i] * y[i];
  return s;
}

double max_abs_diff(const double* x, const double* y, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  __m256d nan_seen = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d d = _mm256_loadu_pd(x + i);
    if (y) d = _mm256_sub_pd(d, _mm256_loadu_pd(y + i));
    d = _mm256_andnot_pd(sign, d);
    nan_seen = _mm256_or_pd(nan_seen, _mm256_cmp_pd(d, d, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, d);
  }
  alignas(32) double t[kLanes];
  _mm256_store_pd(t, m);
  double r = std::max(std::max(t[0], t[1]), std::max(t[2], t[3]));
  if (_mm256_movemask_pd(nan_seen)) r = std::numeric_limits<double>::quiet_NaN();
  for (; i < n; ++i) {
    const double d = std::abs(y ? x[i] - y[i] : x[i]);
    if (d > r || std::isnan(d)) r = d;
  }
  return r;
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table{Isa::avx2, pow_nonneg,   grad_coef,    newton_coef,
                                 singular,  weighted_sum, weighted_dot, max_abs_diff};
  return &table;
}

}  // namespace splap::kernels
