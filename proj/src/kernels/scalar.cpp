#include <algorithm>

#include "hwq/cutoff.hpp"
#include "hwq/kernels.hpp"

namespace hwq::kernels::scalar {

void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2) {
  for (std::size_t k = 0; k < n; ++k) {
    const CutoffValue c = cutoff_eval(scale * t[k]);
    if (v) v[k] = c.v;
    if (d1) d1[k] = c.d1;
    if (d2) d2[k] = c.d2;
  }
}

void euler_step(const EulerBatch& b) {
  const std::size_t L = b.lanes;
  double* s = b.scratch;
  for (std::size_t r = 0; r < L; ++r) s[r] = b.x[r];
  for (std::size_t i = 1; i < b.m; ++i)
    for (std::size_t r = 0; r < L; ++r) s[r] = s[r] + b.x[i * L + r];
  for (std::size_t r = 0; r < L; ++r) s[r] = std::max(s[r], 0.0);

  for (std::size_t i = 0; i < b.m; ++i) {
    const double mu = b.mu[i], ga = b.gamma[i], off = b.offset[i], sc = b.noise_scale[i];
    double* xi = b.x + i * L;
    const double* ui = b.u + i * L;
    const double* ni = b.noise + i * L;
    for (std::size_t r = 0; r < L; ++r) {
      const double q = s[r] * ui[r];
      const double drift = (-off - mu * (xi[r] - q)) - ga * q;
      xi[r] = (xi[r] + drift * b.h) + sc * ni[r];
    }
  }
}

}  // namespace hwq::kernels::scalar
