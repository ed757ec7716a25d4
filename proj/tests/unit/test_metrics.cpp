#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/metrics.hpp"

using namespace voxbench;
using testutil::error_code_of;

namespace {

Volume constant(Dims d, float v, Modality m = Modality::CT) { return Volume(Grid3<float>(d, v), Geometry{}, m); }

Volume offset(const Volume& v, float d) {
  Grid3<float> g = v.voxels();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  return v.with_voxels(std::move(g));
}

/// Direct evaluation of the windowed SSIM definition with explicit 3D weights.
double brute_ssim(const Volume& a, const Volume& b, double range) {
  const int w = 7;
  double taps[w], tsum = 0;
  for (int k = 0; k < w; ++k) tsum += taps[k] = std::exp(-(k - 3.0) * (k - 3.0) / (2 * 1.5 * 1.5));
  for (double& t : taps) t /= tsum;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  const Dims d = a.dims();
  double total = 0;
  std::size_t n = 0;
  for (std::int64_t z = 0; z + w <= d.z; ++z)
    for (std::int64_t y = 0; y + w <= d.y; ++y)
      for (std::int64_t x = 0; x + w <= d.x; ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int k = 0; k < w; ++k)
          for (int j = 0; j < w; ++j)
            for (int i = 0; i < w; ++i) {
              const double wt = taps[i] * taps[j] * taps[k];
              const double va = a(x + i, y + j, z + k), vb = b(x + i, y + j, z + k);
              ma += wt * va;
              mb += wt * vb;
              aa += wt * va * va;
              bb += wt * vb * vb;
              ab += wt * va * vb;
            }
        const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++n;
      }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("psnr and nmse closed forms") {
  const Volume ref = testutil::random_volume(Dims{10, 10, 10}, 1);
  CHECK(psnr(offset(ref, 0.1f), ref, 1.0) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(std::isinf(psnr(ref, ref, 1.0)));
  Grid3<float> twice = ref.voxels();
  for (std::size_t i = 0; i < twice.size(); ++i) twice[i] *= 2;
  CHECK(nmse(ref.with_voxels(twice), ref) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(error_code_of([&] { (void)nmse(ref, constant(Dims{10, 10, 10}, 0)); }) == ErrorCode::degenerate_reference);
  Mask m(ref.dims());
  m[0] = 1;
  Grid3<float> one = ref.voxels();
  one[0] += 0.5f;
  one[1] += 7.0f;
  CHECK(psnr(ref.with_voxels(one), ref, 1.0, &m) == doctest::Approx(10 * std::log10(1 / 0.25)).epsilon(1e-6));
  CHECK(error_code_of([&] { (void)psnr(ref, constant(Dims{2, 2, 2}, 0), 1.0); }) == ErrorCode::shape);
}

TEST_CASE("data ranges per modality") {
  const Volume mr = testutil::random_volume(Dims{4, 4, 4}, 2, 10, 50, Modality::MRI_T2f);
  double lo = 1e9, hi = -1e9;
  for (float v : mr.values()) {
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  CHECK(data_range_for(Modality::CT, mr) == 4024.0);
  CHECK(data_range_for(Modality::CBCT, mr) == 4024.0);
  CHECK(data_range_for(Modality::PET, mr) == 20.0);
  CHECK(data_range_for(Modality::MRI_T2f, mr) == hi - lo);
}

TEST_CASE("ssim matches the brute-force definition") {
  const Volume a = testutil::random_volume(Dims{16, 16, 16}, 3);
  Grid3<float> g = a.voxels();
  Rng r(4);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(0.7 * g[i] + 0.3 * r.uniform());
  const Volume b = a.with_voxels(g);
  CHECK(std::abs(ssim3d(b, a, 1.0) - brute_ssim(b, a, 1.0)) < 1e-6);
  CHECK(ssim3d(a, a, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  const Volume big = testutil::random_volume(Dims{19, 17, 23}, 5, -1000, 1000);
  const Volume big2 = offset(big, 30.0f);
  CHECK(std::abs(ssim3d(big2, big, 4024.0) - brute_ssim(big2, big, 4024.0)) < 1e-6);
  const auto map = ssim_map(b, a, 1.0);
  CHECK(map.dims() == Dims{10, 10, 10});
  const auto taps = gaussian_taps(7, 1.5);
  double s = 0;
  for (double t : taps) s += t;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(error_code_of([&] { (void)ssim3d(constant(Dims{5, 5, 5}, 0), constant(Dims{5, 5, 5}, 0), 1.0); }) ==
        ErrorCode::shape);
}

TEST_CASE("masked ssim averages the map over the mask") {
  const Volume a = testutil::random_volume(Dims{12, 12, 12}, 6);
  const Volume b = testutil::random_volume(Dims{12, 12, 12}, 7);
  const auto map = ssim_map(b, a, 1.0);
  Mask m(a.dims());
  m(3, 3, 3) = 1;
  m(5, 4, 3) = 1;
  m(0, 0, 0) = 1;
  const double expect = 0.5 * (map(0, 0, 0) + map(2, 1, 0));
  CHECK(ssim3d(b, a, 1.0, &m) == doctest::Approx(expect).epsilon(1e-12));
  Mask edge(a.dims());
  edge(0, 0, 0) = 1;
  CHECK(std::isnan(ssim3d(b, a, 1.0, &edge)));
}

TEST_CASE("error map") {
  const Volume a = testutil::random_volume(Dims{3, 3, 3}, 8);
  const Volume e = error_map(offset(a, 2.0f), a);
  for (float v : e.values()) CHECK(v == doctest::Approx(2.0f));
}

TEST_CASE("summary statistics") {
  CHECK(quantile_sorted({1, 2, 3, 4}, 0.25) == 1.75);
  CHECK(quantile_sorted({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile_sorted({5}, 0.75) == 5);
  const double inf = std::numeric_limits<double>::infinity();
  const Summary s = summarize({4, 1, inf, 3, 2});
  CHECK(s.n == 4);
  CHECK(s.excluded == 1);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.median == 2.5);
  CHECK(s.q25 == 1.75);
  CHECK(s.q75 == 3.25);
  CHECK(s.iqr() == 1.5);
  CHECK(error_code_of([&] { (void)summarize({inf, std::nan("")}); }) == ErrorCode::cardinality);
}

TEST_CASE("metric report") {
  const double inf = std::numeric_limits<double>::infinity();
  const MetricReport r = make_report({{"b", inf, 1.0, 0.0}, {"a", inf, 1.0, 0.0}});
  CHECK(r.rows[0].subject_id == "a");
  CHECK(r.psnr.n == 0);
  CHECK(r.psnr.excluded == 2);
  CHECK(std::isnan(r.psnr.mean));
  CHECK(r.ssim.mean == 1.0);
  const std::string csv = metrics_csv(r);
  CHECK(csv.rfind("subject_id,psnr_db,ssim,nmse\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const auto j = aggregate_json(r);
  CHECK(j["psnr_db"]["mean"].is_null());
  CHECK(j["ssim"]["mean"] == 1.0);
  const Volume ref = testutil::random_volume(Dims{8, 8, 8}, 9, 0, 100, Modality::PET);
  const MetricRow row = evaluate_pair("s", offset(ref, 1.0f), ref, 20.0);
  CHECK(row.psnr_db == doctest::Approx(10 * std::log10(400.0)).epsilon(1e-5));
}

TEST_CASE("connected components use 26-connectivity") {
  Mask m(Dims{6, 6, 6});
  m(1, 1, 1) = m(2, 2, 2) = 1;
  m(5, 0, 0) = 1;
  m(0, 5, 5) = m(0, 5, 4) = m(0, 4, 4) = 1;
  const Components c = connected_components(m);
  REQUIRE(c.sizes.size() == 3);
  CHECK(c.labels(5, 0, 0) == 1);
  CHECK(c.labels(1, 1, 1) == 2);
  CHECK(c.labels(2, 2, 2) == 2);
  CHECK(c.labels(0, 4, 4) == 3);
  CHECK(c.sizes == std::vector<std::size_t>{1, 2, 3});
  CHECK(c.labels(3, 3, 3) == 0);
}

TEST_CASE("lesion analysis") {
  const double r = 3.0;
  const std::size_t vox = 113;
  CHECK(equivalent_diameter(vox, {1, 1, 1}) == doctest::Approx(2 * std::cbrt(3.0 * vox / (4 * std::numbers::pi))));
  CHECK(equivalent_diameter(1, {2, 2, 2}) == doctest::Approx(2 * std::cbrt(6 / std::numbers::pi)));
  (void)r;

  const Volume ref = testutil::random_volume(Dims{20, 20, 20}, 10, -100, 100);
  Grid3<float> p = ref.voxels();
  Mask les(ref.dims());
  for (int z = 5; z < 8; ++z)
    for (int y = 5; y < 8; ++y)
      for (int x = 5; x < 8; ++x) les(x, y, z) = 1;
  les(15, 15, 15) = 1;
  for (int z = 0; z < 20; ++z)
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x)
        if (x >= 12) p(x, y, z) += 10.0f;
  const auto recs = lesion_analysis(ref.with_voxels(p), ref, les, 4024.0);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].voxel_count == 27);
  CHECK(recs[0].box.lo == Index3{4, 4, 4});
  CHECK(recs[0].box.hi == Index3{8, 8, 8});
  CHECK(std::isinf(recs[0].psnr_db));
  CHECK(recs[1].box.lo == Index3{14, 14, 14});
  CHECK(recs[1].psnr_db == doctest::Approx(20 * std::log10(4024.0 / 10.0)).epsilon(1e-5));
  CHECK(recs[0].size_group == SizeGroup::large);
  CHECK(recs[1].size_group == SizeGroup::small);

  std::vector<LesionRecord> g(6);
  const double diam[] = {1, 2, 3, 4, 5, 6};
  for (int i = 0; i < 6; ++i) g[i].diameter_mm = diam[i];
  assign_size_groups(g);
  const SizeGroup want[] = {SizeGroup::small, SizeGroup::small, SizeGroup::medium,
                            SizeGroup::medium, SizeGroup::large, SizeGroup::large};
  for (int i = 0; i < 6; ++i) CHECK(g[i].size_group == want[i]);
  const std::string csv = lesions_csv(recs);
  CHECK(csv.rfind("subject_id,lesion_id,voxel_count,equivalent_diameter_mm,size_group,psnr_db,ssim\n", 0) == 0);
}
