#include "cosmic/kernels.hpp"

#include <omp.h>

#include <atomic>

namespace cosmic::kernels {

namespace {

std::atomic<bool> g_parallel{true};

inline double dot_nn(const double* a_row, const double* b, std::size_t j, std::size_t n,
                     std::size_t k) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b[p * n + j];
  return acc;
}

inline double dot_nt(const double* a_row, const double* b_row, std::size_t k) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
  return acc;
}

inline double dot_tn(const double* a, const double* b, std::size_t i, std::size_t j,
                     std::size_t m, std::size_t n, std::size_t k) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
  return acc;
}

}  // namespace

namespace serial {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) out[i * d.n + j] += dot_nn(&a[i * d.k], b.data(), j, d.n, d.k);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) out[i * d.n + j] += dot_nt(&a[i * d.k], &b[j * d.k], d.k);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      out[i * d.n + j] += dot_tn(a.data(), b.data(), i, j, d.m, d.n, d.k);
}

}  // namespace serial

namespace parallel {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  const auto total = static_cast<std::ptrdiff_t>(d.m * d.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < total; ++e) {
    const std::size_t i = static_cast<std::size_t>(e) / d.n;
    const std::size_t j = static_cast<std::size_t>(e) % d.n;
    out[static_cast<std::size_t>(e)] += dot_nn(&a[i * d.k], b.data(), j, d.n, d.k);
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  const auto total = static_cast<std::ptrdiff_t>(d.m * d.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < total; ++e) {
    const std::size_t i = static_cast<std::size_t>(e) / d.n;
    const std::size_t j = static_cast<std::size_t>(e) % d.n;
    out[static_cast<std::size_t>(e)] += dot_nt(&a[i * d.k], &b[j * d.k], d.k);
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  const auto total = static_cast<std::ptrdiff_t>(d.m * d.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < total; ++e) {
    const std::size_t i = static_cast<std::size_t>(e) / d.n;
    const std::size_t j = static_cast<std::size_t>(e) % d.n;
    out[static_cast<std::size_t>(e)] += dot_tn(a.data(), b.data(), i, j, d.m, d.n, d.k);
  }
}

}  // namespace parallel

namespace {

bool use_parallel(Dims d) {
  return g_parallel.load(std::memory_order_relaxed) && d.m * d.n * d.k >= kParallelThreshold &&
         omp_get_max_threads() > 1 && !omp_in_parallel();
}

}  // namespace

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  use_parallel(d) ? parallel::matmul_nn(a, b, out, d) : serial::matmul_nn(a, b, out, d);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  use_parallel(d) ? parallel::matmul_nt(a, b, out, d) : serial::matmul_nt(a, b, out, d);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d) {
  use_parallel(d) ? parallel::matmul_tn(a, b, out, d) : serial::matmul_tn(a, b, out, d);
}

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

}  // namespace cosmic::kernels
