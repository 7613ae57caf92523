#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "hwq/kernels.hpp"

namespace hwq::kernels {

namespace {

Backend detect() {
  const char* env = std::getenv("HWQ_KERNELS");
  if (env && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available()) throw std::invalid_argument("AVX2 not supported on this CPU");
  current().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void cutoff_batch(const double* t, std::size_t n, double scale, double* v, double* d1, double* d2) {
  if (active_backend() == Backend::Avx2)
    avx2::cutoff_batch(t, n, scale, v, d1, d2);
  else
    scalar::cutoff_batch(t, n, scale, v, d1, d2);
}

void euler_step(const EulerBatch& batch) {
  if (active_backend() == Backend::Avx2)
    avx2::euler_step(batch);
  else
    scalar::euler_step(batch);
}

}  // namespace hwq::kernels
