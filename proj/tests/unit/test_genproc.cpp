#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/genproc.hpp"

using namespace voxbench;
using testutil::error_code_of;

namespace {

LatentTensor random_latent(Dims d, int c, std::uint64_t seed) {
  Rng r(seed);
  LatentTensor z(d, c);
  for (auto& v : z.values) v = r.uniform() * 2 - 1;
  return z;
}

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("scaled-linear schedule") {
  const NoiseSchedule s = make_scaled_linear_schedule();
  REQUIRE(s.T == 1000);
  CHECK(s.betas[0] == 0.0015);
  CHECK(s.betas[999] == 0.0205);
  long double abar = 1;
  for (int t = 0; t < 1000; ++t) {
    const double r = std::sqrt(0.0015) + (std::sqrt(0.0205) - std::sqrt(0.0015)) * t / 999.0;
    CHECK(s.betas[t] == doctest::Approx(r * r).epsilon(1e-14));
    CHECK(s.alphas[t] == doctest::Approx(1 - s.betas[t]).epsilon(1e-15));
    abar *= 1.0L - static_cast<long double>(s.betas[t]);
    CHECK(s.alpha_bars[t] == doctest::Approx(static_cast<double>(abar)).epsilon(1e-12));
  }
  CHECK(error_code_of([] { (void)make_scaled_linear_schedule(0.02, 0.01, 10); }) == ErrorCode::parameter);
}

TEST_CASE("bridge schedule") {
  const BridgeSchedule b = make_bridge_schedule();
  REQUIRE(b.T == 1000);
  CHECK(b.m[0] == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(b.m[999] == doctest::Approx(0.999).epsilon(1e-15));
  for (int t = 1; t < 1000; ++t) CHECK(b.m[t] - b.m[t - 1] == doctest::Approx(0.998 / 999).epsilon(1e-9));
  for (int t = 0; t < 1000; ++t) CHECK(b.sigma2[t] == doctest::Approx(2 * (b.m[t] - b.m[t] * b.m[t])).epsilon(1e-14));
  const auto peak = std::max_element(b.sigma2.begin(), b.sigma2.end()) - b.sigma2.begin();
  CHECK((peak == 499 || peak == 500));
  CHECK(b.sigma2[0] < 2.1e-3);
  CHECK(b.sigma2[999] < 2.1e-3);
}

TEST_CASE("schedule csv export") {
  testutil::TempDir dir("sched");
  write_schedule_csv(make_scaled_linear_schedule(), dir / "ddpm.csv");
  write_schedule_csv(make_bridge_schedule(), dir / "bridge.csv");
  CHECK(std::filesystem::file_size(dir / "ddpm.csv") > 1000);
  CHECK(std::filesystem::file_size(dir / "bridge.csv") > 1000);
}

TEST_CASE("ddim timesteps") {
  const auto ts = ddim_timesteps(1000, 50);
  REQUIRE(ts.size() == 50);
  CHECK(ts.front() == 999);
  CHECK(ts.back() == 0);
  CHECK(std::is_sorted(ts.rbegin(), ts.rend()));
  CHECK(std::adjacent_find(ts.begin(), ts.end()) == ts.end());
  CHECK(ddim_timesteps(1000, 1) == std::vector<int>{999});
  CHECK(ddim_timesteps(4, 4) == std::vector<int>{3, 2, 1, 0});
  CHECK(error_code_of([] { (void)ddim_timesteps(10, 11); }) == ErrorCode::parameter);
}

TEST_CASE("forward processes") {
  const NoiseSchedule s = make_scaled_linear_schedule();
  const LatentTensor z0 = random_latent(Dims{2, 3, 2}, 2, 1), eps = random_latent(Dims{2, 3, 2}, 2, 2);
  const LatentTensor zt = ddpm_forward(z0, 500, eps, s);
  for (std::size_t i = 0; i < zt.size(); ++i)
    CHECK(zt.values[i] == doctest::Approx(std::sqrt(s.alpha_bars[500]) * z0.values[i] +
                                          std::sqrt(1 - s.alpha_bars[500]) * eps.values[i]));
  CHECK(error_code_of([&] { (void)ddpm_forward(z0, 1000, eps, s); }) == ErrorCode::index);

  const BridgeSchedule b = make_bridge_schedule();
  const LatentTensor zy = random_latent(Dims{2, 3, 2}, 2, 3);
  const LatentTensor bt = bridge_forward(z0, zy, 250, eps, b);
  for (std::size_t i = 0; i < bt.size(); ++i)
    CHECK(bt.values[i] == doctest::Approx((1 - b.m[250]) * z0.values[i] + b.m[250] * zy.values[i] +
                                          std::sqrt(b.sigma2[250]) * eps.values[i]));

  const auto [zf, v] = flow_matching_target(z0, zy, 0.25);
  for (std::size_t i = 0; i < zf.size(); ++i) {
    CHECK(zf.values[i] == doctest::Approx(0.75 * z0.values[i] + 0.25 * zy.values[i]));
    CHECK(v.values[i] == doctest::Approx(zy.values[i] - z0.values[i]));
  }
}

TEST_CASE("toy codec") {
  Patch p(Dims{8, 8, 4});
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 8; ++x) p(x, y, z) = static_cast<float>((x / 4) + 2 * (y / 4));
  const LatentTensor z = toy_encode(p);
  CHECK(z.spatial == Dims{2, 2, 1});
  CHECK(z.channels == 3);
  for (int c = 0; c < 3; ++c) CHECK(z.channel(c)[3] == 3.0);
  CHECK(toy_decode(z).vector() == p.vector());
  CHECK(error_code_of([] { (void)toy_encode(Patch(Dims{6, 8, 8})); }) == ErrorCode::shape);
  const LatentTensor cat = concat_channels(z, z);
  CHECK(cat.channels == 6);
}

TEST_CASE("gaussian latents are seeded") {
  const LatentTensor a = gaussian_latent(Dims{10, 10, 10}, 3, 5), b = gaussian_latent(Dims{10, 10, 10}, 3, 5);
  CHECK(a == b);
  CHECK_FALSE(a == gaussian_latent(Dims{10, 10, 10}, 3, 6));
  double m = 0, v = 0;
  for (double x : a.values) m += x;
  m /= a.size();
  for (double x : a.values) v += (x - m) * (x - m);
  v /= a.size();
  CHECK(std::abs(m) < 0.1);
  CHECK(std::abs(v - 1) < 0.1);
}

TEST_CASE("ddim with an oracle noise predictor recovers the target") {
  const NoiseSchedule s = make_scaled_linear_schedule();
  const LatentTensor target = random_latent(Dims{4, 4, 4}, 3, 11);
  const auto pred = oracle_noise_predictor(target, s);
  for (int steps : {50, 10, 1}) {
    const LatentTensor out = ddim_sample(target, *pred, s, steps, 3);
    CHECK(max_abs_diff(out, target) < 1e-4);
  }
  const auto wrong = oracle_target_predictor(target);
  CHECK(error_code_of([&] { (void)ddim_sample(target, *wrong, s, 50, 0); }) == ErrorCode::contract);
}

TEST_CASE("bridge sampler") {
  const BridgeSchedule b = make_bridge_schedule();
  const LatentTensor target = random_latent(Dims{4, 4, 4}, 3, 12), zy = random_latent(Dims{4, 4, 4}, 3, 13);
  const auto pred = oracle_target_predictor(target);
  std::vector<int> seen;
  const LatentTensor out = bridge_sample(zy, *pred, b, 200, 0, false, [&](int t, const LatentTensor&) {
    seen.push_back(t);
  });
  CHECK(max_abs_diff(out, target) < 1e-5);
  CHECK(seen.size() == 200);
  CHECK(seen.front() == 999);
  const LatentTensor again = bridge_sample(zy, *pred, b, 200, 0, false);
  CHECK(again == out);
  const LatentTensor stoch = bridge_sample(zy, *pred, b, 200, 4, true);
  CHECK(max_abs_diff(stoch, target) < 1e-5);

}

TEST_CASE("flow sampler is exact on a constant velocity field") {
  const LatentTensor src = random_latent(Dims{4, 4, 4}, 3, 14), tgt = random_latent(Dims{4, 4, 4}, 3, 15);
  LatentTensor v = tgt;
  for (std::size_t i = 0; i < v.size(); ++i) v.values[i] = tgt.values[i] - src.values[i];
  const auto pred = constant_velocity_predictor(v);
  for (int steps : {1, 2, 3, 7, 10, 64, 100, 999}) {
    CAPTURE(steps);
    const LatentTensor out = flow_sample(src, *pred, steps);
    for (std::size_t i = 0; i < out.size(); ++i)
      REQUIRE(static_cast<float>(out.values[i]) == static_cast<float>(tgt.values[i]));
  }
  CHECK(error_code_of([&] { (void)flow_sample(src, *pred, 0); }) == ErrorCode::parameter);
}
