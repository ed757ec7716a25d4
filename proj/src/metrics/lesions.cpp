#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "voxbench/csv.hpp"
#include "voxbench/metrics.hpp"

namespace voxbench {

std::string_view to_string(SizeGroup g) {
  switch (g) {
    case SizeGroup::small: return "small";
    case SizeGroup::medium: return "medium";
    case SizeGroup::large: return "large";
  }
  return "unknown";
}

Components connected_components(const Mask& mask) {
  const Dims& d = mask.dims();
  Components c;
  c.labels = Grid3<std::int32_t>(d, 0);
  std::vector<Index3> stack;
  std::int32_t next = 0;
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        if (!mask(x, y, z) || c.labels(x, y, z) != 0) continue;
        const std::int32_t label = ++next;
        std::size_t size = 0;
        c.labels(x, y, z) = label;
        stack.push_back({x, y, z});
        while (!stack.empty()) {
          const Index3 p = stack.back();
          stack.pop_back();
          ++size;
          for (std::int64_t dz = -1; dz <= 1; ++dz)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
              for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const std::int64_t qx = p.x + dx, qy = p.y + dy, qz = p.z + dz;
                if (!mask.contains(qx, qy, qz) || !mask(qx, qy, qz) || c.labels(qx, qy, qz) != 0) continue;
                c.labels(qx, qy, qz) = label;
                stack.push_back({qx, qy, qz});
              }
        }
        c.sizes.push_back(size);
      }
  return c;
}

double equivalent_diameter(std::size_t voxels, const Vec3& spacing) {
  const double v = static_cast<double>(voxels) * spacing[0] * spacing[1] * spacing[2];
  return 2.0 * std::cbrt(3.0 * v / (4.0 * std::numbers::pi));
}

void assign_size_groups(std::vector<LesionRecord>& records) {
  if (records.empty()) return;
  std::vector<double> d;
  for (const auto& r : records) d.push_back(r.diameter_mm);
  std::sort(d.begin(), d.end());
  const double t1 = quantile_sorted(d, 1.0 / 3.0), t2 = quantile_sorted(d, 2.0 / 3.0);
  for (auto& r : records)
    r.size_group = r.diameter_mm <= t1 ? SizeGroup::small : r.diameter_mm <= t2 ? SizeGroup::medium : SizeGroup::large;
}

std::vector<LesionRecord> lesion_analysis(const Volume& pred, const Volume& ref, const Mask& lesions,
                                          double data_range, const SsimOptions& opts) {
  if (!(pred.dims() == ref.dims()) || !(lesions.dims() == ref.dims()))
    throw Error(ErrorCode::shape, "prediction, reference and lesion mask dims differ");
  const Components comp = connected_components(lesions);
  if (comp.sizes.empty()) return {};
  const Dims& d = ref.dims();

  std::vector<Box> boxes(comp.sizes.size(), Box{{d.x, d.y, d.z}, {-1, -1, -1}});
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        const std::int32_t l = comp.labels(x, y, z);
        if (l == 0) continue;
        Box& b = boxes[static_cast<std::size_t>(l - 1)];
        b.lo = {std::min(b.lo.x, x), std::min(b.lo.y, y), std::min(b.lo.z, z)};
        b.hi = {std::max(b.hi.x, x), std::max(b.hi.y, y), std::max(b.hi.z, z)};
      }

  const Grid3<double> smap = ssim_map(pred, ref, data_range, opts);
  const std::int64_t h = opts.window / 2;

  std::vector<LesionRecord> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Box b = boxes[i];
    b.lo = {std::max<std::int64_t>(0, b.lo.x - 1), std::max<std::int64_t>(0, b.lo.y - 1),
            std::max<std::int64_t>(0, b.lo.z - 1)};
    b.hi = {std::min(d.x - 1, b.hi.x + 1), std::min(d.y - 1, b.hi.y + 1), std::min(d.z - 1, b.hi.z + 1)};
    double sse = 0.0, ssim_sum = 0.0;
    std::size_t n = 0, n_ssim = 0;
    for (std::int64_t z = b.lo.z; z <= b.hi.z; ++z)
      for (std::int64_t y = b.lo.y; y <= b.hi.y; ++y)
        for (std::int64_t x = b.lo.x; x <= b.hi.x; ++x) {
          const double diff = static_cast<double>(pred(x, y, z)) - static_cast<double>(ref(x, y, z));
          sse += diff * diff;
          ++n;
          if (smap.contains(x - h, y - h, z - h)) {
            ssim_sum += smap(x - h, y - h, z - h);
            ++n_ssim;
          }
        }
    LesionRecord r;
    r.lesion_id = static_cast<int>(i + 1);
    r.voxel_count = comp.sizes[i];
    r.diameter_mm = equivalent_diameter(r.voxel_count, ref.spacing());
    const double mse = sse / static_cast<double>(n);
    r.psnr_db = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(data_range * data_range / mse);
    r.ssim = n_ssim ? ssim_sum / static_cast<double>(n_ssim) : std::numeric_limits<double>::quiet_NaN();
    r.box = b;
    out.push_back(r);
  }
  assign_size_groups(out);
  return out;
}

std::string lesions_csv(const std::vector<LesionRecord>& records) {
  std::ostringstream out;
  out << "subject_id,lesion_id,voxel_count,equivalent_diameter_mm,size_group,psnr_db,ssim\n";
  for (const auto& r : records)
    out << csv_line({r.subject_id, std::to_string(r.lesion_id), std::to_string(r.voxel_count),
                     format_double(r.diameter_mm), std::string(to_string(r.size_group)), format_double(r.psnr_db),
                     format_double(r.ssim)})
        << '\n';
  return out.str();
}

}  // namespace voxbench
