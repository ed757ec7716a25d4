#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/simd/kernels.hpp"

using namespace voxbench;

namespace {

std::vector<float> rand_f(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(r.uniform() * 4.0 - 2.0);
  return v;
}

std::vector<double> rand_d(std::size_t n, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng r(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * r.uniform();
  return v;
}

void check_reduction(double a, double b) { CHECK(a == doctest::Approx(b).epsilon(1e-12).scale(1.0)); }

}  // namespace

TEST_CASE("scalar kernels against direct loops") {
  const auto& k = simd::scalar_kernels();
  const std::size_t n = 37;
  const auto x = rand_f(n, 1), y = rand_f(n, 2);
  double s = 0, sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s += x[i];
    sq += double(x[i]) * double(x[i]);
  }
  check_reduction(k.sum(x.data(), n), s);
  check_reduction(k.sum_sq(x.data(), n), sq);
  std::vector<float> out(n);
  k.axpby(out.data(), 2.0f, x.data(), -0.5f, y.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == 2.0f * x[i] + -0.5f * y[i]);
  std::vector<double> taps = {0.25, 0.5, 0.25}, in = rand_d(n, 3), corr(n - 2);
  k.correlate_valid(corr.data(), in.data(), n, taps.data(), taps.size());
  for (std::size_t i = 0; i + 2 < n; ++i)
    CHECK(corr[i] == doctest::Approx(0.25 * in[i] + 0.5 * in[i + 1] + 0.25 * in[i + 2]));
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const simd::KernelTable* v = simd::avx2_kernels();
  if (!v) {
    MESSAGE("AVX2 unavailable on this host; equivalence not exercised");
    return;
  }
  const auto& s = simd::scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 17u, 63u, 1000u, 4099u}) {
    CAPTURE(n);
    const auto x = rand_f(n, 10 + n), y = rand_f(n, 20 + n), z = rand_f(n, 30 + n);

    std::vector<double> acc_s = rand_d(n, 40 + n), w_s = rand_d(n, 50 + n, 0, 1);
    auto acc_v = acc_s, w_v = w_s;
    const auto wf = rand_f(n, 60 + n);
    s.accumulate_weighted(acc_s.data(), w_s.data(), x.data(), wf.data(), n);
    v->accumulate_weighted(acc_v.data(), w_v.data(), x.data(), wf.data(), n);
    CHECK(acc_s == acc_v);
    CHECK(w_s == w_v);

    std::vector<float> o_s(n), o_v(n);
    s.scale_shift(o_s.data(), x.data(), 1.7, -0.3, n);
    v->scale_shift(o_v.data(), x.data(), 1.7, -0.3, n);
    CHECK(o_s == o_v);

    auto c_s = x, c_v = x;
    s.clamp(c_s.data(), -0.5f, 0.75f, n);
    v->clamp(c_v.data(), -0.5f, 0.75f, n);
    CHECK(c_s == c_v);

    s.axpby(o_s.data(), 0.3f, x.data(), -1.1f, y.data(), n);
    v->axpby(o_v.data(), 0.3f, x.data(), -1.1f, y.data(), n);
    CHECK(o_s == o_v);

    s.axpbycz(o_s.data(), 0.3f, x.data(), -1.1f, y.data(), 2.5f, z.data(), n);
    v->axpbycz(o_v.data(), 0.3f, x.data(), -1.1f, y.data(), 2.5f, z.data(), n);
    CHECK(o_s == o_v);

    check_reduction(s.sum(x.data(), n), v->sum(x.data(), n));
    check_reduction(s.sum_sq_dev(x.data(), 0.1, n), v->sum_sq_dev(x.data(), 0.1, n));
    check_reduction(s.sum_sq_diff(x.data(), y.data(), n), v->sum_sq_diff(x.data(), y.data(), n));
    check_reduction(s.sum_sq(x.data(), n), v->sum_sq(x.data(), n));

    auto d_s = rand_d(n, 70 + n), d_v = d_s;
    const auto din = rand_d(n, 80 + n);
    s.axpy_f64(d_s.data(), 0.7, din.data(), n);
    v->axpy_f64(d_v.data(), 0.7, din.data(), n);
    CHECK(d_s == d_v);

    if (n >= 7) {
      const std::vector<double> taps = {0.05, 0.1, 0.2, 0.3, 0.2, 0.1, 0.05};
      std::vector<double> r_s(n - 6), r_v(n - 6);
      s.correlate_valid(r_s.data(), din.data(), n, taps.data(), taps.size());
      v->correlate_valid(r_v.data(), din.data(), n, taps.data(), taps.size());
      for (std::size_t i = 0; i < r_s.size(); ++i) CHECK(r_s[i] == doctest::Approx(r_v[i]).epsilon(1e-14));
    }

    const auto mu_a = rand_d(n, 90 + n, 0, 1), mu_b = rand_d(n, 91 + n, 0, 1);
    auto e_aa = rand_d(n, 92 + n, 0, 1), e_bb = rand_d(n, 93 + n, 0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      e_aa[i] += mu_a[i] * mu_a[i];
      e_bb[i] += mu_b[i] * mu_b[i];
    }
    std::vector<double> e_ab(n);
    for (std::size_t i = 0; i < n; ++i) e_ab[i] = mu_a[i] * mu_b[i] + 0.1;
    std::vector<double> m_s(n), m_v(n);
    const double sum_s = s.ssim_map(m_s.data(), mu_a.data(), mu_b.data(), e_aa.data(), e_bb.data(), e_ab.data(),
                                    1e-4, 9e-4, n);
    const double sum_v = v->ssim_map(m_v.data(), mu_a.data(), mu_b.data(), e_aa.data(), e_bb.data(), e_ab.data(),
                                     1e-4, 9e-4, n);
    CHECK(m_s == m_v);
    check_reduction(sum_s, sum_v);
  }
}

TEST_CASE("active table honours the environment override") {
  const auto& a = simd::active();
  CHECK((a.name == "scalar" || a.name == "avx2"));
  if (const char* env = std::getenv("VOXBENCH_SIMD")) CHECK(a.name == std::string_view(env));
}
