#pragma once

#include <cstddef>

// Data-parallel inner loops. Each kernel has a scalar reference and an AVX2 variant;
// both perform the same IEEE operations in the same order, so results agree bit for bit.
namespace hwq::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_available();
Backend active_backend();
// Throws std::invalid_argument when the requested backend is not supported by the CPU.
void set_backend(Backend b);
const char* backend_name(Backend b);

// v[k], d1[k], d2[k] = ψ, ψ′, ψ″ evaluated at scale * t[k]. Output pointers may be null.
void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2);

// One Euler–Maruyama step for `lanes` independent replicas stored class-major
// (x[i * lanes + r]). Drift is the controlled diffusion drift with control u.
struct EulerBatch {
  std::size_t m = 0;
  std::size_t lanes = 0;
  double* x = nullptr;
  const double* u = nullptr;
  const double* noise = nullptr;
  const double* mu = nullptr;
  const double* gamma = nullptr;
  const double* offset = nullptr;      // ϱ μ_i / m
  const double* noise_scale = nullptr; // σ_i √h
  double h = 0.0;
  double* scratch = nullptr;           // `lanes` doubles
};

void euler_step(const EulerBatch& batch);

namespace scalar {
void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2);
void euler_step(const EulerBatch& batch);
}  // namespace scalar

namespace avx2 {
void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2);
void euler_step(const EulerBatch& batch);
}  // namespace avx2

}  // namespace hwq::kernels
