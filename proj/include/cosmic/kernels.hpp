#pragma once

#include <cstddef>
#include <span>

// Dense matrix-product kernels. Every kernel accumulates into `out`
// (out += product). The serial versions are the reference; the OpenMP
// versions split the output elements across threads and keep the per-element
// reduction order, so both produce bit-identical results.
namespace cosmic::kernels {

struct Dims {
  std::size_t m;  // output rows
  std::size_t n;  // output cols
  std::size_t k;  // reduction length
};

namespace serial {
// out[m×n] += a[m×k] · b[k×n]
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
// out[m×n] += a[m×k] · b[n×k]ᵀ
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
// out[m×n] += a[k×m]ᵀ · b[k×n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
}  // namespace serial

namespace parallel {
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
}  // namespace parallel

// Dispatching entry points used by the autodiff engine: OpenMP when enabled
// and the product is large enough to amortize the fork, serial otherwise.
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, Dims d);

// Global switch; defaults to on. Turning it off forces the serial kernels.
void set_parallel(bool enabled);
bool parallel_enabled();

// Minimum m·n·k for which the dispatcher uses OpenMP.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace cosmic::kernels
