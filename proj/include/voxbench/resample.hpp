#pragma once

#include "voxbench/volume.hpp"

namespace voxbench {

/// What a sample point outside the source voxel-centre lattice receives.
enum class Boundary {
  fill,   ///< the supplied fill value
  clamp,  ///< the nearest edge voxel
};

/// Output dims for a spacing change: ceil(n * s_in / s_out) per axis.
Dims resampled_dims(const Dims& dims, const Vec3& spacing, const Vec3& target_spacing);

/// Trilinear resampling onto a grid sharing the input's origin and
/// direction. Output dims follow resampled_dims().
Volume resample_trilinear(const Volume& vol, const Vec3& target_spacing, float fill);

/// Trilinear resampling onto an explicit grid with the input's origin and
/// direction.
Volume resample_to_grid(const Volume& vol, const Vec3& spacing, const Dims& dims, Boundary boundary, float fill);

/// Nearest-neighbour resampling of a mask onto a new grid.
Mask resample_mask_nearest(const Mask& mask, const Vec3& spacing, const Vec3& target_spacing, const Dims& target_dims);

}  // namespace voxbench
