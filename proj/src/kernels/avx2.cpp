#include <immintrin.h>

#include "hwq/kernels.hpp"

// Compiled with -mavx2: keep this file free of shared inline helpers and templates.
namespace hwq::kernels::avx2 {

namespace {

void cutoff_tail(double a, double* v, double* d1, double* d2) {
  if (a <= -1.0) {
    *v = -0.5, *d1 = 0.0, *d2 = 0.0;
  } else if (a >= 0.0) {
    *v = a, *d1 = 1.0, *d2 = 0.0;
  } else {
    const double s = a + 1.0;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double s4 = s2 * s2;
    *v = s3 - 0.5 * s4 - 0.5;
    *d1 = 3.0 * s2 - 2.0 * s3;
    *d2 = 6.0 * s - 6.0 * s2;
  }
}

}  // namespace

void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2) {
  const __m256d vscale = _mm256_set1_pd(scale);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d mone = _mm256_set1_pd(-1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d three = _mm256_set1_pd(3.0);
  const __m256d six = _mm256_set1_pd(6.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d a = _mm256_mul_pd(vscale, _mm256_loadu_pd(t + k));
    const __m256d s = _mm256_add_pd(a, one);
    const __m256d s2 = _mm256_mul_pd(s, s);
    const __m256d s3 = _mm256_mul_pd(s2, s);
    const __m256d s4 = _mm256_mul_pd(s2, s2);
    __m256d pv = _mm256_sub_pd(_mm256_sub_pd(s3, _mm256_mul_pd(half, s4)), half);
    __m256d p1 = _mm256_sub_pd(_mm256_mul_pd(three, s2), _mm256_mul_pd(two, s3));
    __m256d p2 = _mm256_sub_pd(_mm256_mul_pd(six, s), _mm256_mul_pd(six, s2));
    const __m256d lo = _mm256_cmp_pd(a, mone, _CMP_LE_OQ);
    const __m256d hi = _mm256_cmp_pd(a, zero, _CMP_GE_OQ);
    pv = _mm256_blendv_pd(_mm256_blendv_pd(pv, a, hi), mhalf, lo);
    p1 = _mm256_blendv_pd(_mm256_blendv_pd(p1, one, hi), zero, lo);
    p2 = _mm256_blendv_pd(_mm256_blendv_pd(p2, zero, hi), zero, lo);
    if (v) _mm256_storeu_pd(v + k, pv);
    if (d1) _mm256_storeu_pd(d1 + k, p1);
    if (d2) _mm256_storeu_pd(d2 + k, p2);
  }
  for (; k < n; ++k) {
    double cv, c1, c2;
    cutoff_tail(scale * t[k], &cv, &c1, &c2);
    if (v) v[k] = cv;
    if (d1) d1[k] = c1;
    if (d2) d2[k] = c2;
  }
}

void euler_step(const EulerBatch& b) {
  const std::size_t L = b.lanes;
  double* s = b.scratch;
  const __m256d zero = _mm256_setzero_pd();
  std::size_t r = 0;
  for (; r + 4 <= L; r += 4) {
    __m256d acc = _mm256_loadu_pd(b.x + r);
    for (std::size_t i = 1; i < b.m; ++i) acc = _mm256_add_pd(acc, _mm256_loadu_pd(b.x + i * L + r));
    _mm256_storeu_pd(s + r, _mm256_max_pd(zero, acc));
  }
  for (; r < L; ++r) {
    double acc = b.x[r];
    for (std::size_t i = 1; i < b.m; ++i) acc = acc + b.x[i * L + r];
    s[r] = (acc < 0.0) ? 0.0 : acc;
  }

  const __m256d vh = _mm256_set1_pd(b.h);
  for (std::size_t i = 0; i < b.m; ++i) {
    const double mu = b.mu[i], ga = b.gamma[i], off = b.offset[i], sc = b.noise_scale[i];
    const __m256d vmu = _mm256_set1_pd(mu);
    const __m256d vga = _mm256_set1_pd(ga);
    const __m256d vnoff = _mm256_set1_pd(-off);
    const __m256d vsc = _mm256_set1_pd(sc);
    double* xi = b.x + i * L;
    const double* ui = b.u + i * L;
    const double* ni = b.noise + i * L;
    std::size_t k = 0;
    for (; k + 4 <= L; k += 4) {
      const __m256d x = _mm256_loadu_pd(xi + k);
      const __m256d q = _mm256_mul_pd(_mm256_loadu_pd(s + k), _mm256_loadu_pd(ui + k));
      const __m256d dr =
          _mm256_sub_pd(_mm256_sub_pd(vnoff, _mm256_mul_pd(vmu, _mm256_sub_pd(x, q))), _mm256_mul_pd(vga, q));
      const __m256d nx = _mm256_add_pd(_mm256_add_pd(x, _mm256_mul_pd(dr, vh)),
                                       _mm256_mul_pd(vsc, _mm256_loadu_pd(ni + k)));
      _mm256_storeu_pd(xi + k, nx);
    }
    for (; k < L; ++k) {
      const double q = s[k] * ui[k];
      const double drift = (-off - mu * (xi[k] - q)) - ga * q;
      xi[k] = (xi[k] + drift * b.h) + sc * ni[k];
    }
  }
}

}  // namespace hwq::kernels::avx2
