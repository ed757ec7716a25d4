#pragma once

// Data-parallel inner loops shared by the pipeline. Each kernel has a scalar
// reference implementation and, where the target supports it, an AVX2
// variant. The active table is chosen once at startup from CPUID; the
// VOXBENCH_SIMD environment variable ("scalar" or "avx2") overrides it.
//
// Element-wise kernels are bit-identical across variants. Reductions differ
// only by summation order.

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>

namespace voxbench::simd {

struct KernelTable {
  std::string_view name;

  /// acc[i] += w[i] * v[i]; wsum[i] += w[i]   (double accumulators)
  void (*accumulate_weighted)(double* acc, double* wsum, const float* v, const float* w, std::size_t n);
  /// out[i] = float(double(in[i]) * a + b)
  void (*scale_shift)(float* out, const float* in, double a, double b, std::size_t n);
  /// x[i] = min(max(x[i], lo), hi)
  void (*clamp)(float* x, float lo, float hi, std::size_t n);
  /// out[i] = a * x[i] + b * y[i]   (float)
  void (*axpby)(float* out, float a, const float* x, float b, const float* y, std::size_t n);
  /// out[i] = a * x[i] + b * y[i] + c * z[i]   (float)
  void (*axpbycz)(float* out, float a, const float* x, float b, const float* y, float c, const float* z,
                  std::size_t n);
  /// Sum of x[i]
  double (*sum)(const float* x, std::size_t n);
  /// Sum of (x[i] - mean)^2
  double (*sum_sq_dev)(const float* x, double mean, std::size_t n);
  /// Sum of (a[i] - b[i])^2
  double (*sum_sq_diff)(const float* a, const float* b, std::size_t n);
  /// Sum of a[i]^2
  double (*sum_sq)(const float* a, std::size_t n);
  /// out[i] += w * in[i]   (double)
  void (*axpy_f64)(double* out, double w, const double* in, std::size_t n);
  /// Valid-mode 1D correlation: out[i] = sum_k taps[k] * in[i + k], i < n - ntaps + 1
  void (*correlate_valid)(double* out, const double* in, std::size_t n, const double* taps, std::size_t ntaps);
  /// Per-voxel SSIM from local moments; returns the sum of the map values.
  double (*ssim_map)(double* out, const double* mu_a, const double* mu_b, const double* e_aa,
                     const double* e_bb, const double* e_ab, double c1, double c2, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_kernels();
/// The table selected for this process.
const KernelTable& active();

}  // namespace voxbench::simd
