#include "voxbench/resample.hpp"

#include <cmath>

namespace voxbench {

namespace {

constexpr double kEdgeTolerance = 1e-6;

struct AxisSample {
  std::int64_t i0 = 0;
  std::int64_t i1 = 0;
  double frac = 0.0;
  bool inside = true;
};

AxisSample locate(double pos, std::int64_t n, Boundary boundary) {
  AxisSample s;
  const double last = static_cast<double>(n - 1);
  if (pos < -kEdgeTolerance || pos > last + kEdgeTolerance) {
    if (boundary == Boundary::fill) {
      s.inside = false;
      return s;
    }
  }
  pos = std::min(std::max(pos, 0.0), last);
  const auto base = static_cast<std::int64_t>(std::floor(pos));
  s.i0 = std::min(base, n - 1);
  s.i1 = std::min(s.i0 + 1, n - 1);
  s.frac = pos - static_cast<double>(s.i0);
  return s;
}

}  // namespace

Dims resampled_dims(const Dims& dims, const Vec3& spacing, const Vec3& target_spacing) {
  std::int64_t out[3];
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0.0)) throw Error(ErrorCode::parameter, "target spacing must be positive");
    const double extent = static_cast<double>(dims[a]) * spacing[a] / target_spacing[a];
    out[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(extent - 1e-6)));
  }
  return Dims{out[0], out[1], out[2]};
}

Volume resample_trilinear(const Volume& vol, const Vec3& target_spacing, float fill) {
  return resample_to_grid(vol, target_spacing, resampled_dims(vol.dims(), vol.spacing(), target_spacing),
                          Boundary::fill, fill);
}

Volume resample_to_grid(const Volume& vol, const Vec3& spacing, const Dims& dims, Boundary boundary, float fill) {
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0.0)) throw Error(ErrorCode::parameter, "target spacing must be positive");
  }
  if (!dims.positive()) throw Error(ErrorCode::shape, "target dims must be positive");
  const Dims& in = vol.dims();
  const Grid3<float>& src = vol.voxels();
  Vec3 ratio;
  for (int a = 0; a < 3; ++a) ratio[a] = spacing[a] / vol.spacing()[a];

  // Output index i lies at source index i * ratio along each axis because
  // both grids share origin and direction.
  std::vector<AxisSample> ax(static_cast<std::size_t>(dims.x)), ay(static_cast<std::size_t>(dims.y)),
      az(static_cast<std::size_t>(dims.z));
  for (std::int64_t i = 0; i < dims.x; ++i) ax[i] = locate(static_cast<double>(i) * ratio[0], in.x, boundary);
  for (std::int64_t i = 0; i < dims.y; ++i) ay[i] = locate(static_cast<double>(i) * ratio[1], in.y, boundary);
  for (std::int64_t i = 0; i < dims.z; ++i) az[i] = locate(static_cast<double>(i) * ratio[2], in.z, boundary);

  Grid3<float> out(dims, fill);
  for (std::int64_t z = 0; z < dims.z; ++z) {
    const AxisSample& sz = az[z];
    if (!sz.inside) continue;
    for (std::int64_t y = 0; y < dims.y; ++y) {
      const AxisSample& sy = ay[y];
      if (!sy.inside) continue;
      float* dst = out.row(y, z).data();
      for (std::int64_t x = 0; x < dims.x; ++x) {
        const AxisSample& sx = ax[x];
        if (!sx.inside) continue;
        const double fx = sx.frac, fy = sy.frac, fz = sz.frac;
        const double c00 = (1.0 - fx) * src(sx.i0, sy.i0, sz.i0) + fx * src(sx.i1, sy.i0, sz.i0);
        const double c10 = (1.0 - fx) * src(sx.i0, sy.i1, sz.i0) + fx * src(sx.i1, sy.i1, sz.i0);
        const double c01 = (1.0 - fx) * src(sx.i0, sy.i0, sz.i1) + fx * src(sx.i1, sy.i0, sz.i1);
        const double c11 = (1.0 - fx) * src(sx.i0, sy.i1, sz.i1) + fx * src(sx.i1, sy.i1, sz.i1);
        const double c0 = (1.0 - fy) * c00 + fy * c10;
        const double c1 = (1.0 - fy) * c01 + fy * c11;
        dst[x] = static_cast<float>((1.0 - fz) * c0 + fz * c1);
      }
    }
  }
  Geometry g = vol.geometry();
  g.spacing = spacing;
  return Volume(std::move(out), g, vol.modality());
}

Mask resample_mask_nearest(const Mask& mask, const Vec3& spacing, const Vec3& target_spacing,
                           const Dims& target_dims) {
  const Dims& in = mask.dims();
  Mask out(target_dims, 0);
  auto nearest = [](std::int64_t i, double ratio, std::int64_t n) -> std::int64_t {
    const auto j = static_cast<std::int64_t>(std::llround(static_cast<double>(i) * ratio));
    return j < n ? j : -1;
  };
  for (std::int64_t z = 0; z < target_dims.z; ++z) {
    const auto sz = nearest(z, target_spacing[2] / spacing[2], in.z);
    if (sz < 0) continue;
    for (std::int64_t y = 0; y < target_dims.y; ++y) {
      const auto sy = nearest(y, target_spacing[1] / spacing[1], in.y);
      if (sy < 0) continue;
      for (std::int64_t x = 0; x < target_dims.x; ++x) {
        const auto sx = nearest(x, target_spacing[0] / spacing[0], in.x);
        if (sx < 0) continue;
        out(x, y, z) = mask(sx, sy, sz);
      }
    }
  }
  return out;
}

}  // namespace voxbench
