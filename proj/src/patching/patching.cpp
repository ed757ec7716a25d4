#include "voxbench/patching.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "voxbench/random.hpp"
#include "voxbench/simd/kernels.hpp"

namespace voxbench {

namespace {

void require_fits(const Dims& vol, const Dims& patch) {
  if (!patch.positive()) throw Error(ErrorCode::parameter, "patch dims must be positive");
  for (int a = 0; a < 3; ++a)
    if (vol[a] < patch[a])
      throw Error(ErrorCode::shape, "volume " + to_string(vol) + " smaller than patch " + to_string(patch));
}

}  // namespace

std::vector<std::int64_t> axis_origins(std::int64_t n, std::int64_t p, std::int64_t step) {
  std::vector<std::int64_t> out;
  for (std::int64_t o = 0; o + p < n; o += step) out.push_back(o);
  out.push_back(n - p);
  return out;
}

PatchGrid build_patch_grid(const Dims& dims, const Dims& patch, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorCode::parameter, "overlap must lie in [0, 1)");
  require_fits(dims, patch);
  PatchGrid g;
  g.volume = dims;
  g.patch = patch;
  g.overlap = overlap;
  std::int64_t step[3];
  std::vector<std::int64_t> axes[3];
  for (int a = 0; a < 3; ++a) {
    step[a] = std::max<std::int64_t>(1, std::llround(static_cast<double>(patch[a]) * (1.0 - overlap)));
    axes[a] = axis_origins(dims[a], patch[a], step[a]);
  }
  g.step = Index3{step[0], step[1], step[2]};
  for (auto x : axes[0])
    for (auto y : axes[1])
      for (auto z : axes[2]) g.origins.push_back(Index3{x, y, z});
  return g;
}

Patch gaussian_importance(const Dims& patch, double sigma_scale) {
  if (!(sigma_scale > 0.0)) throw Error(ErrorCode::parameter, "sigma_scale must be positive");
  if (!patch.positive()) throw Error(ErrorCode::parameter, "patch dims must be positive");
  std::vector<double> axis[3];
  for (int a = 0; a < 3; ++a) {
    const double sigma = sigma_scale * static_cast<double>(patch[a]);
    const double c = static_cast<double>(patch[a] / 2);
    axis[a].resize(static_cast<std::size_t>(patch[a]));
    for (std::int64_t i = 0; i < patch[a]; ++i) {
      const double d = static_cast<double>(i) - c;
      axis[a][i] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  Patch w(patch);
  for (std::int64_t z = 0; z < patch.z; ++z)
    for (std::int64_t y = 0; y < patch.y; ++y)
      for (std::int64_t x = 0; x < patch.x; ++x)
        w(x, y, z) = static_cast<float>(std::max(axis[0][x] * axis[1][y] * axis[2][z], 1e-8));
  return w;
}

Patch extract_patch(const Grid3<float>& vol, const Index3& origin, const Dims& patch) {
  const Dims& d = vol.dims();
  if (origin.x < 0 || origin.y < 0 || origin.z < 0 || origin.x + patch.x > d.x || origin.y + patch.y > d.y ||
      origin.z + patch.z > d.z)
    throw Error(ErrorCode::index, "patch at origin exceeds volume " + to_string(d));
  Patch out(patch);
  for (std::int64_t z = 0; z < patch.z; ++z)
    for (std::int64_t y = 0; y < patch.y; ++y)
      std::copy_n(vol.row(origin.y + y, origin.z + z).data() + origin.x, patch.x, out.row(y, z).data());
  return out;
}

Grid3<float> stitch(std::vector<PatchOutput> outputs, const PatchGrid& grid, const Patch& importance) {
  if (!(importance.dims() == grid.patch)) throw Error(ErrorCode::shape, "importance map does not match patch dims");
  std::sort(outputs.begin(), outputs.end(), [](const PatchOutput& a, const PatchOutput& b) { return a.origin < b.origin; });
  if (outputs.size() != grid.origins.size())
    throw Error(ErrorCode::incomplete_coverage, "expected " + std::to_string(grid.origins.size()) +
                                                    " patches, got " + std::to_string(outputs.size()));
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!(outputs[i].origin == grid.origins[i]))
      throw Error(ErrorCode::incomplete_coverage, "patch outputs do not match the grid origins");
    if (!(outputs[i].values.dims() == grid.patch))
      throw Error(ErrorCode::shape, "patch output has dims " + to_string(outputs[i].values.dims()));
  }

  const auto& k = simd::active();
  const Dims& d = grid.volume;
  const Dims& p = grid.patch;
  std::vector<double> acc(d.count(), 0.0);
  std::vector<double> wsum(d.count(), 0.0);
  auto flat = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(d.x) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d.y) * static_cast<std::size_t>(z));
  };
  for (const PatchOutput& po : outputs) {
    const Index3& o = po.origin;
    for (std::int64_t z = 0; z < p.z; ++z)
      for (std::int64_t y = 0; y < p.y; ++y) {
        const std::size_t base = flat(o.x, o.y + y, o.z + z);
        k.accumulate_weighted(acc.data() + base, wsum.data() + base, po.values.row(y, z).data(),
                              importance.row(y, z).data(), static_cast<std::size_t>(p.x));
      }
  }
  Grid3<float> out(d);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (!(wsum[i] > 0.0)) throw Error(ErrorCode::incomplete_coverage, "voxel not covered by any patch");
    out[i] = static_cast<float>(acc[i] / wsum[i]);
  }
  return out;
}

Grid3<float> sliding_window_infer(const Grid3<float>& input, const PatchGrid& grid, const Patch& importance,
                                  const PatchFunction& fn, int jobs) {
  if (!(input.dims() == grid.volume)) throw Error(ErrorCode::shape, "input does not match grid volume dims");
  jobs = std::max(1, jobs);
  const std::size_t n = grid.origins.size();
  std::vector<PatchOutput> outputs(n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      const Index3& o = grid.origins[i];
      Patch result = fn(extract_patch(input, o, grid.patch), o);
      if (!(result.dims() == grid.patch)) throw Error(ErrorCode::contract, "model changed the patch dims");
      outputs[i] = PatchOutput{o, std::move(result)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t t = 0; t < count; ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return stitch(std::move(outputs), grid, importance);
}

std::vector<TrainingPatch> sample_training_patches(const PreprocessedPair& pair, const Mask& fg, int n,
                                                   std::uint64_t seed, const Dims& patch) {
  const Dims& d = pair.source.dims();
  if (!(pair.target.dims() == d) || !(fg.dims() == d))
    throw Error(ErrorCode::shape, "source, target and foreground dims differ");
  require_fits(d, patch);
  if (n < 0) throw Error(ErrorCode::parameter, "patch count must be non-negative");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < fg.size(); ++i)
    if (fg[i]) eligible.push_back(i);
  if (eligible.empty()) throw Error(ErrorCode::no_foreground, "foreground mask is empty");

  Rng rng(seed);
  std::vector<TrainingPatch> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t flat = eligible[rng.below(eligible.size())];
    const std::int64_t cx = static_cast<std::int64_t>(flat % static_cast<std::size_t>(d.x));
    const std::int64_t cy = static_cast<std::int64_t>((flat / static_cast<std::size_t>(d.x)) % static_cast<std::size_t>(d.y));
    const std::int64_t cz = static_cast<std::int64_t>(flat / (static_cast<std::size_t>(d.x) * static_cast<std::size_t>(d.y)));
    const Index3 c{cx, cy, cz};
    const Index3 o{std::clamp(cx - patch.x / 2, std::int64_t{0}, d.x - patch.x),
                   std::clamp(cy - patch.y / 2, std::int64_t{0}, d.y - patch.y),
                   std::clamp(cz - patch.z / 2, std::int64_t{0}, d.z - patch.z)};
    out.push_back(TrainingPatch{c, o, extract_patch(pair.source.voxels(), o, patch),
                                extract_patch(pair.target.voxels(), o, patch)});
  }
  return out;
}

nlohmann::json to_json(const PatchGrid& grid) {
  nlohmann::json j;
  j["volume"] = {grid.volume.x, grid.volume.y, grid.volume.z};
  j["patch"] = {grid.patch.x, grid.patch.y, grid.patch.z};
  j["overlap"] = grid.overlap;
  j["step"] = {grid.step.x, grid.step.y, grid.step.z};
  auto& origins = j["origins"] = nlohmann::json::array();
  for (const auto& o : grid.origins) origins.push_back({o.x, o.y, o.z});
  return j;
}

}  // namespace voxbench
