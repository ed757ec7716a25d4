#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "voxbench/volume.hpp"

namespace voxbench {

struct BodyMaskStep {
  bool applied = false;  ///< false when no body mask was supplied
  float fill = 0.0f;
};

struct ResampleStep {
  Geometry original;      ///< geometry before resampling
  Dims original_dims;
  Vec3 target_spacing{};
  Dims output_dims;
  float fill = 0.0f;
};

struct ClipStep {
  bool applied = false;  ///< MRI bypasses clipping
  double low = 0.0;
  double high = 0.0;
};

struct NormalizeStep {
  double mean = 0.0;
  double std = 1.0;
};

struct PadStep {
  Index3 before;
  Index3 after;
  float fill = 0.0f;  ///< in normalized units
};

/// Axial crop (lung cropping); inversion re-pads slices with `fill`.
struct CropStep {
  std::int64_t z_begin = 0;
  std::int64_t z_end = 0;  ///< exclusive
  std::int64_t original_nz = 0;
  float fill = 0.0f;
};

using TransformStep = std::variant<BodyMaskStep, ResampleStep, ClipStep, NormalizeStep, PadStep, CropStep>;

std::string_view step_kind(const TransformStep& step);

/// Ordered log of the preprocessing applied to one volume.
struct TransformRecord {
  static constexpr int kSchemaVersion = 1;

  Modality modality = Modality::CT;
  std::vector<TransformStep> steps;

  template <typename Step>
  const Step* find() const {
    for (const auto& s : steps)
      if (const auto* p = std::get_if<Step>(&s)) return p;
    return nullptr;
  }
};

nlohmann::json to_json(const TransformRecord& record);
/// Throws corrupted_record when a step is missing parameters.
TransformRecord record_from_json(const nlohmann::json& j);

void write_record(const TransformRecord& record, const std::filesystem::path& path);
TransformRecord read_record(const std::filesystem::path& path);

}  // namespace voxbench
