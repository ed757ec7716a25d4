#include "voxbench/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxbench {

std::string to_string(const Dims& d) {
  return "(" + std::to_string(d.x) + "," + std::to_string(d.y) + "," + std::to_string(d.z) + ")";
}

std::size_t count(const Mask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](std::uint8_t b) { return b != 0; }));
}

Mask full_mask(Dims dims) { return Mask(dims, 1); }
Mask empty_mask(Dims dims) { return Mask(dims, 0); }

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::CT: return "CT";
    case Modality::CBCT: return "CBCT";
    case Modality::MRI_T1w: return "MRI_T1w";
    case Modality::MRI_T2w: return "MRI_T2w";
    case Modality::MRI_T2f: return "MRI_T2f";
    case Modality::PET: return "PET";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : {Modality::CT, Modality::CBCT, Modality::MRI_T1w, Modality::MRI_T2w, Modality::MRI_T2f,
                     Modality::PET}) {
    if (name == to_string(m)) return m;
  }
  if (name == "T1w") return Modality::MRI_T1w;
  if (name == "T2w") return Modality::MRI_T2w;
  if (name == "T2f") return Modality::MRI_T2f;
  throw Error(ErrorCode::parameter, "unknown modality '" + std::string(name) + "'");
}

Vec3 Geometry::world(const Vec3& index) const {
  Vec3 out = origin;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r] += direction[r * 3 + c] * index[c] * spacing[c];
  }
  return out;
}

void validate_geometry(const Geometry& g) {
  for (int a = 0; a < 3; ++a) {
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw Error(ErrorCode::parameter, "spacing must be positive and finite");
    if (!std::isfinite(g.origin[a])) throw Error(ErrorCode::parameter, "origin must be finite");
  }
  double worst = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += g.direction[r * 3 + k] * g.direction[c * 3 + k];
      worst = std::max(worst, std::abs(dot - (r == c ? 1.0 : 0.0)));
    }
  }
  if (!(worst < 1e-6)) throw Error(ErrorCode::parameter, "direction matrix is not orthonormal");
}

Volume::Volume(Grid3<float> voxels, Geometry geometry, Modality modality)
    : voxels_(std::move(voxels)), geometry_(geometry), modality_(modality) {
  if (!voxels_.dims().positive()) throw Error(ErrorCode::shape, "volume dims must be positive");
  validate_geometry(geometry_);
}

Volume Volume::with_voxels(Grid3<float> voxels) const { return Volume(std::move(voxels), geometry_, modality_); }
Volume Volume::with_geometry(Geometry geometry) const { return Volume(voxels_, geometry, modality_); }
Volume Volume::with_modality(Modality modality) const { return Volume(voxels_, geometry_, modality); }

}  // namespace voxbench
