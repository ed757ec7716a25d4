#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "voxbench/preprocess.hpp"
#include "voxbench/volume.hpp"

namespace voxbench {

inline constexpr Dims kDefaultPatch{96, 96, 96};
inline constexpr double kDefaultOverlap = 0.625;
inline constexpr double kDefaultSigmaScale = 0.125;

struct PatchGrid {
  Dims volume;
  Dims patch;
  double overlap = kDefaultOverlap;
  Index3 step;
  std::vector<Index3> origins;  ///< lexicographically sorted
};

/// Origins along one axis: multiples of `step` whose patch ends strictly
/// inside the axis, then the final origin n - p.
std::vector<std::int64_t> axis_origins(std::int64_t n, std::int64_t p, std::int64_t step);

PatchGrid build_patch_grid(const Dims& dims, const Dims& patch = kDefaultPatch, double overlap = kDefaultOverlap);

/// Separable Gaussian centred at voxel p/2 with sigma = sigma_scale * p per
/// axis, floored at 1e-8.
Patch gaussian_importance(const Dims& patch = kDefaultPatch, double sigma_scale = kDefaultSigmaScale);

Patch extract_patch(const Grid3<float>& vol, const Index3& origin, const Dims& patch);

struct PatchOutput {
  Index3 origin;
  Patch values;
};

/// Weighted blend of patch predictions. Accumulation follows the grid's
/// origin order regardless of the order of `outputs`.
Grid3<float> stitch(std::vector<PatchOutput> outputs, const PatchGrid& grid, const Patch& importance);

using PatchFunction = std::function<Patch(const Patch& input, const Index3& origin)>;

/// Extracts every grid patch, runs `fn` on up to `jobs` patches at a time and
/// stitches the results. The output is independent of `jobs`.
Grid3<float> sliding_window_infer(const Grid3<float>& input, const PatchGrid& grid, const Patch& importance,
                                  const PatchFunction& fn, int jobs = 1);

struct TrainingPatch {
  Index3 center;
  Index3 origin;
  Patch source;
  Patch target;
};

/// n patch pairs centred on uniformly drawn foreground voxels, shifted to lie
/// inside the volume.
std::vector<TrainingPatch> sample_training_patches(const PreprocessedPair& pair, const Mask& fg, int n,
                                                   std::uint64_t seed, const Dims& patch = kDefaultPatch);

nlohmann::json to_json(const PatchGrid& grid);

}  // namespace voxbench
