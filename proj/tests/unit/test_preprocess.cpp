#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/preprocess.hpp"

using namespace voxbench;
using testutil::error_code_of;

namespace {

Volume ramp_volume(Dims d, Vec3 spacing, Modality m, double scale = 1.0, double offset = 0.0) {
  Grid3<float> g(d);
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x)
        g(x, y, z) = static_cast<float>(offset + scale * (std::sin(0.3 * x) + std::cos(0.2 * y) + 0.1 * z));
  Geometry geo;
  geo.spacing = spacing;
  geo.origin = {-12.5, 7.0, 3.25};
  return Volume(std::move(g), geo, m);
}

}  // namespace

TEST_CASE("default modality ranges") {
  const auto ct = default_range(Modality::CT);
  CHECK(ct.clip_low == -1024.0);
  CHECK(ct.clip_high == 3000.0);
  CHECK(ct.fill_rule == FillRule::foreground_min);
  const auto pet = default_range(Modality::PET);
  CHECK(pet.clip_low == 0.0);
  CHECK(pet.clip_high == 20.0);
  const auto mri = default_range(Modality::MRI_T2w);
  CHECK_FALSE(mri.clips());
  CHECK(mri.fill_rule == FillRule::zero);
  CHECK(error_code_of([] { validate(ModalityRange{Modality::CT, 5, 1, FillRule::zero}); }) == ErrorCode::parameter);
}

TEST_CASE("clipping") {
  Grid3<float> g(Dims{4, 1, 1});
  g[0] = -2000;
  g[1] = 0;
  g[2] = 2999.5f;
  g[3] = 5000;
  const Volume ct(g, Geometry{}, Modality::CT);
  const auto [c, step] = clip_intensities(ct, default_range(Modality::CT));
  CHECK(step.applied);
  CHECK(c.values()[0] == -1024.0f);
  CHECK(c.values()[1] == 0.0f);
  CHECK(c.values()[2] == 2999.5f);
  CHECK(c.values()[3] == 3000.0f);
  const Volume mr(g, Geometry{}, Modality::MRI_T1w);
  const auto [m, mstep] = clip_intensities(mr, default_range(Modality::MRI_T1w));
  CHECK_FALSE(mstep.applied);
  CHECK(m.voxels().vector() == g.vector());
}

TEST_CASE("normalization") {
  const Volume v = testutil::random_volume(Dims{9, 8, 7}, 4, -500, 1500);
  const auto [n, step] = normalize(v);
  double mean = 0, var = 0;
  for (float x : v.values()) mean += x;
  mean /= static_cast<double>(v.voxels().size());
  for (float x : v.values()) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.voxels().size()));
  CHECK(step.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(step.std == doctest::Approx(sd).epsilon(1e-12));
  double nm = 0;
  for (float x : n.values()) nm += x;
  CHECK(std::abs(nm / static_cast<double>(n.voxels().size())) < 1e-6);
  const Volume back = denormalize(n, step);
  for (std::size_t i = 0; i < v.voxels().size(); ++i)
    CHECK(std::abs(back.values()[i] - v.values()[i]) <= 1e-5 * std::max(1.0f, std::abs(v.values()[i])));
  const Volume flat(Grid3<float>(Dims{3, 3, 3}, 2.0f), Geometry{}, Modality::CT);
  CHECK(error_code_of([&] { (void)normalize(flat); }) == ErrorCode::degenerate_normalization);
}

TEST_CASE("padding is symmetric with the extra voxel high and crops back exactly") {
  const Volume v = testutil::random_volume(Dims{50, 51, 97}, 5);
  const auto [p, step] = pad_to_multiple(v, 96, -7.0f);
  CHECK(p.dims() == Dims{96, 96, 192});
  CHECK(step.before == Index3{23, 22, 47});
  CHECK(step.after == Index3{23, 23, 48});
  CHECK(p(0, 0, 0) == -7.0f);
  CHECK(p(23, 22, 47) == v(0, 0, 0));
  const Volume c = crop_padding(p, step);
  CHECK(c.voxels().vector() == v.voxels().vector());
  CHECK(c.geometry() == v.geometry());
  CHECK(apply_padding(v, step).voxels().vector() == p.voxels().vector());

  const auto [q, qs] = pad_to_multiple(v, 16, 0.0f, Dims{64, 64, 64});
  CHECK(q.dims() == Dims{64, 64, 112});
  (void)qs;
}

TEST_CASE("foreground mask, padding exclusion and intersection") {
  Grid3<float> g(Dims{3, 1, 1});
  g[0] = 0.1f;
  g[1] = 0.1000001f;
  g[2] = 5.0f;
  const Mask m = foreground_mask(Volume(g, Geometry{}, Modality::CT), 0.1);
  CHECK(m[0] == 0);
  CHECK(m[1] == 1);
  CHECK(m[2] == 1);

  const Volume ones(Grid3<float>(Dims{2, 2, 2}, 1.0f), Geometry{}, Modality::CT);
  const auto [p, step] = pad_to_multiple(ones, 4, 1.0f);
  const Mask fg = exclude_padding(foreground_mask(p, 0.0), step);
  CHECK(count(fg) == 8);
  Mask a(Dims{2, 1, 1}), b(Dims{2, 1, 1});
  a[0] = a[1] = 1;
  b[1] = 1;
  CHECK(count(intersect_masks(a, b)) == 1);
  CHECK(error_code_of([&] { (void)intersect_masks(a, Mask(Dims{3, 1, 1})); }) == ErrorCode::shape);
}

TEST_CASE("body mask fill rules") {
  Grid3<float> g(Dims{4, 1, 1});
  g[0] = -1000;
  g[1] = -200;
  g[2] = 40;
  g[3] = -3000;
  Mask body(Dims{4, 1, 1});
  body[1] = body[2] = 1;
  const auto [ct, s] = apply_body_mask(Volume(g, Geometry{}, Modality::CT), body);
  CHECK(s.applied);
  CHECK(s.fill == -200.0f);
  CHECK(ct.values()[0] == -200.0f);
  CHECK(ct.values()[3] == -200.0f);
  CHECK(ct.values()[2] == 40.0f);
  const auto [mr, ms] = apply_body_mask(Volume(g, Geometry{}, Modality::MRI_T1w), body);
  CHECK(ms.fill == 0.0f);
  CHECK(mr.values()[0] == 0.0f);
  CHECK(modality_fill(Volume(g, Geometry{}, Modality::CT), nullptr, FillRule::foreground_min) == -3000.0f);
  CHECK(error_code_of([&] { (void)apply_body_mask(Volume(g, Geometry{}, Modality::CT), Mask(Dims{4, 1, 1})); }) ==
        ErrorCode::degenerate_mask);
}

TEST_CASE("axial crop round trip") {
  const Volume v = ramp_volume(Dims{4, 3, 10}, {1, 1, 2}, Modality::CT);
  const CropStep step{2, 7, 10, -1024.0f};
  const Volume c = apply_crop(v, step);
  CHECK(c.dims() == Dims{4, 3, 5});
  CHECK(c.geometry().origin[2] == v.geometry().origin[2] + 4.0);
  const Volume u = undo_crop(c, step);
  CHECK(u.geometry() == v.geometry());
  CHECK(u(1, 1, 0) == -1024.0f);
  CHECK(u(1, 1, 4) == v(1, 1, 4));
  CHECK(error_code_of([&] { (void)apply_crop(v, CropStep{5, 12, 10, 0}); }) == ErrorCode::corrupted_record);
}

TEST_CASE("full pipeline records every step and inverts") {
  const Volume src = ramp_volume(Dims{40, 36, 20}, {1.2, 1.2, 2.5}, Modality::CBCT, 300, -100);
  const Volume tgt = ramp_volume(Dims{40, 36, 20}, {1.2, 1.2, 2.5}, Modality::CT, 350, -50);
  PipelineConfig cfg;
  const PipelineResult r = run_pipeline(src, tgt, nullptr, cfg);
  CHECK(r.pair.source.dims() == Dims{96, 96, 96});
  std::vector<std::string> kinds;
  for (const auto& s : r.target_record.steps) kinds.emplace_back(step_kind(s));
  CHECK(kinds == std::vector<std::string>{"body-mask", "resample", "clip", "normalize", "pad"});

  SUBCASE("replay reproduces the pipeline bit-for-bit") {
    CHECK(replay(r.target_record, tgt, nullptr).voxels().vector() == r.pair.target.voxels().vector());
  }
  SUBCASE("record json round trip") {
    const TransformRecord back = record_from_json(to_json(r.target_record));
    CHECK(to_json(back) == to_json(r.target_record));
    auto broken = to_json(r.target_record);
    broken["steps"][3]["params"].erase("std");
    CHECK(error_code_of([&] { (void)record_from_json(broken); }) == ErrorCode::corrupted_record);
  }
  SUBCASE("inversion restores geometry exactly and intensities closely") {
    const Volume inv = invert_to_original(r.pair.target, r.target_record);
    CHECK(inv.dims() == tgt.dims());
    CHECK(inv.geometry() == tgt.geometry());
    CHECK(inv.modality() == Modality::CT);
    double ss = 0;
    for (std::size_t i = 0; i < inv.voxels().size(); ++i) {
      const double d = inv.values()[i] - tgt.values()[i];
      ss += d * d;
    }
    const double rms = std::sqrt(ss / static_cast<double>(inv.voxels().size()));
    CHECK(rms / r.target_record.find<NormalizeStep>()->std < 2e-2);
  }
  SUBCASE("foreground excludes padding") {
    const PadStep& pad = *r.source_record.find<PadStep>();
    CHECK(r.foreground(0, 0, 0) == 0);
    CHECK(count(r.foreground) <= static_cast<std::size_t>(r.pair.source.dims().count()));
    (void)pad;
  }
  SUBCASE("mismatched pair dims are rejected") {
    const Volume small = ramp_volume(Dims{10, 10, 10}, {1, 1, 1}, Modality::CT);
    CHECK(error_code_of([&] { (void)run_pipeline(src, small, nullptr, cfg); }) == ErrorCode::shape);
  }
}

TEST_CASE("pipeline config validation") {
  PipelineConfig cfg;
  cfg.target_spacing = {1, 0, 1};
  CHECK_THROWS_AS(cfg.validate(), Error);
  PipelineConfig c2;
  c2.pad_multiple = 0;
  CHECK_THROWS_AS(c2.validate(), Error);
}
