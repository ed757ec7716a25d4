// Compiled with -mavx2; only reached after the dispatcher has confirmed AVX2
// support. No FMA: products and sums round exactly like the scalar kernels.

#include <immintrin.h>

#include <algorithm>

#include "kernels_impl.hpp"
#include "voxbench/simd/kernels.hpp"

namespace voxbench::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

}  // namespace

void accumulate_weighted(double* acc, double* wsum, const float* v, const float* w, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wd = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
    const __m256d vd = _mm256_cvtps_pd(_mm_loadu_ps(v + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(wd, vd)));
    _mm256_storeu_pd(wsum + i, _mm256_add_pd(_mm256_loadu_pd(wsum + i), wd));
  }
  for (; i < n; ++i) {
    const double wi = w[i];
    acc[i] += wi * static_cast<double>(v[i]);
    wsum[i] += wi;
  }
}

void scale_shift(float* out, const float* in, double a, double b, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(in + i));
    _mm_storeu_ps(out + i, _mm256_cvtpd_ps(_mm256_add_pd(_mm256_mul_pd(x, va), vb)));
  }
  for (; i < n; ++i) out[i] = static_cast<float>(static_cast<double>(in[i]) * a + b);
}

void clamp(float* x, float lo, float hi, std::size_t n) {
  const __m256 vlo = _mm256_set1_ps(lo);
  const __m256 vhi = _mm256_set1_ps(hi);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(x + i, _mm256_min_ps(_mm256_max_ps(v, vlo), vhi));
  }
  for (; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 r = _mm256_add_ps(_mm256_mul_ps(va, _mm256_loadu_ps(x + i)), _mm256_mul_ps(vb, _mm256_loadu_ps(y + i)));
    _mm256_storeu_ps(out + i, r);
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbycz(float* out, float a, const float* x, float b, const float* y, float c, const float* z,
             std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  const __m256 vc = _mm256_set1_ps(c);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ab =
        _mm256_add_ps(_mm256_mul_ps(va, _mm256_loadu_ps(x + i)), _mm256_mul_ps(vb, _mm256_loadu_ps(y + i)));
    _mm256_storeu_ps(out + i, _mm256_add_ps(ab, _mm256_mul_ps(vc, _mm256_loadu_ps(z + i))));
  }
  for (; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

double sum(const float* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm_loadu_ps(x + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const float* x, double mean, std::size_t n) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(_mm_loadu_ps(x + i)), vm);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean;
    s += d * d;
  }
  return s;
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + i)), _mm256_cvtps_pd(_mm_loadu_ps(b + i)));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

double sum_sq(const float* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i];
    s += d * d;
  }
  return s;
}

void axpy_f64(double* out, double w, const double* in, std::size_t n) {
  const __m256d vw = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), _mm256_mul_pd(vw, _mm256_loadu_pd(in + i))));
  }
  for (; i < n; ++i) out[i] += w * in[i];
}

void correlate_valid(double* out, const double* in, std::size_t n, const double* taps, std::size_t ntaps) {
  if (n < ntaps) return;
  const std::size_t m = n - ntaps + 1;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    __m256d s = _mm256_setzero_pd();
    for (std::size_t k = 0; k < ntaps; ++k) {
      s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(in + i + k)));
    }
    _mm256_storeu_pd(out + i, s);
  }
  for (; i < m; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < ntaps; ++k) s += taps[k] * in[i + k];
    out[i] = s;
  }
}

double ssim_map(double* out, const double* mu_a, const double* mu_b, const double* e_aa, const double* e_bb,
                const double* e_ab, double c1, double c2, std::size_t n) {
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d two = _mm256_set1_pd(2.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ma = _mm256_loadu_pd(mu_a + i);
    const __m256d mb = _mm256_loadu_pd(mu_b + i);
    const __m256d ma2 = _mm256_mul_pd(ma, ma);
    const __m256d mb2 = _mm256_mul_pd(mb, mb);
    const __m256d mab = _mm256_mul_pd(ma, mb);
    const __m256d var_a = _mm256_sub_pd(_mm256_loadu_pd(e_aa + i), ma2);
    const __m256d var_b = _mm256_sub_pd(_mm256_loadu_pd(e_bb + i), mb2);
    const __m256d cov = _mm256_sub_pd(_mm256_loadu_pd(e_ab + i), mab);
    // (2*mu_a)*mu_b matches the scalar left-to-right evaluation.
    const __m256d num = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(two, ma), mb), vc1),
                                      _mm256_add_pd(_mm256_mul_pd(two, cov), vc2));
    const __m256d den = _mm256_mul_pd(_mm256_add_pd(_mm256_add_pd(ma2, mb2), vc1),
                                      _mm256_add_pd(_mm256_add_pd(var_a, var_b), vc2));
    const __m256d r = _mm256_div_pd(num, den);
    _mm256_storeu_pd(out + i, r);
    acc = _mm256_add_pd(acc, r);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    out[i] = ssim_value(mu_a[i], mu_b[i], e_aa[i], e_bb[i], e_ab[i], c1, c2);
    total += out[i];
  }
  return total;
}

}  // namespace voxbench::simd::avx2

namespace voxbench::simd {

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2",           avx2::accumulate_weighted, avx2::scale_shift, avx2::clamp,
      avx2::axpby,      avx2::axpbycz,             avx2::sum,         avx2::sum_sq_dev,
      avx2::sum_sq_diff, avx2::sum_sq,             avx2::axpy_f64,    avx2::correlate_valid,
      avx2::ssim_map,
  };
  return table;
}

}  // namespace voxbench::simd
