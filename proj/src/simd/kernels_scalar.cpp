#include "voxbench/simd/kernels.hpp"

#include <algorithm>

#include "kernels_impl.hpp"

namespace voxbench::simd::scalar {

void accumulate_weighted(double* acc, double* wsum, const float* v, const float* w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i];
    acc[i] += wi * static_cast<double>(v[i]);
    wsum[i] += wi;
  }
}

void scale_shift(float* out, const float* in, double a, double b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(static_cast<double>(in[i]) * a + b);
}

void clamp(float* x, float lo, float hi, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbycz(float* out, float a, const float* x, float b, const float* y, float c, const float* z,
             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

double sum(const float* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const float* x, double mean, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean;
    s += d * d;
  }
  return s;
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

double sum_sq(const float* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i];
    s += d * d;
  }
  return s;
}

void axpy_f64(double* out, double w, const double* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += w * in[i];
}

void correlate_valid(double* out, const double* in, std::size_t n, const double* taps, std::size_t ntaps) {
  if (n < ntaps) return;
  const std::size_t m = n - ntaps + 1;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < ntaps; ++k) s += taps[k] * in[i + k];
    out[i] = s;
  }
}

double ssim_map(double* out, const double* mu_a, const double* mu_b, const double* e_aa, const double* e_bb,
                const double* e_ab, double c1, double c2, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = ssim_value(mu_a[i], mu_b[i], e_aa[i], e_bb[i], e_ab[i], c1, c2);
    total += out[i];
  }
  return total;
}

}  // namespace voxbench::simd::scalar

namespace voxbench::simd {

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",          scalar::accumulate_weighted, scalar::scale_shift,     scalar::clamp,
      scalar::axpby,     scalar::axpbycz,             scalar::sum,             scalar::sum_sq_dev,
      scalar::sum_sq_diff, scalar::sum_sq,            scalar::axpy_f64,        scalar::correlate_valid,
      scalar::ssim_map,
  };
  return table;
}

}  // namespace voxbench::simd
