#pragma once

#include <limits>
#include <optional>
#include <utility>

#include "voxbench/transform_record.hpp"
#include "voxbench/volume.hpp"

namespace voxbench {

enum class FillRule { foreground_min, zero };

struct ModalityRange {
  Modality modality = Modality::CT;
  double clip_low = -std::numeric_limits<double>::infinity();
  double clip_high = std::numeric_limits<double>::infinity();
  FillRule fill_rule = FillRule::zero;

  bool clips() const { return std::isfinite(clip_low) || std::isfinite(clip_high); }
};

/// CT/CBCT: [-1024, 3000] HU; PET: [0, 20] SUV; both filled with the
/// foreground minimum. MRI: no clipping, zero fill.
ModalityRange default_range(Modality m);
void validate(const ModalityRange& r);

struct PipelineConfig {
  Vec3 target_spacing{1.0, 1.0, 1.0};
  double source_threshold = 0.1;
  double target_threshold = 0.1;
  std::optional<ModalityRange> source_range;  ///< defaults from the source modality
  std::optional<ModalityRange> target_range;  ///< defaults from the target modality
  int pad_multiple = 96;
  Dims patch{96, 96, 96};  ///< padded dims never fall below the patch size

  void validate() const;
};

struct PreprocessedPair {
  Volume source;
  Volume target;
};

struct PipelineResult {
  PreprocessedPair pair;
  TransformRecord source_record;
  TransformRecord target_record;
  Mask foreground;  ///< intersected source/target foreground, padding excluded
};

/// Fill value for a volume given an optional body mask: the minimum inside
/// the mask (whole volume when absent) for foreground-min modalities, else 0.
float modality_fill(const Volume& vol, const Mask* body, FillRule rule);

std::pair<Volume, BodyMaskStep> apply_body_mask(const Volume& vol, const Mask& body);
std::pair<Volume, BodyMaskStep> apply_body_mask(const Volume& vol, const Mask& body, FillRule rule);
std::pair<Volume, ClipStep> clip_intensities(const Volume& vol, const ModalityRange& range);
std::pair<Volume, NormalizeStep> normalize(const Volume& vol);
/// Pads each axis up to the next multiple of `multiple` that is also at
/// least `min_dims`; odd remainders put the extra voxel on the high side.
std::pair<Volume, PadStep> pad_to_multiple(const Volume& vol, int multiple, float fill,
                                           Dims min_dims = Dims{1, 1, 1});

Volume denormalize(const Volume& vol, const NormalizeStep& step);
Volume crop_padding(const Volume& vol, const PadStep& step);
Volume apply_padding(const Volume& vol, const PadStep& step);
/// Keeps slices [z_begin, z_end); undo_crop re-inserts the rest as `fill`.
Volume apply_crop(const Volume& vol, const CropStep& step);
Volume undo_crop(const Volume& vol, const CropStep& step);

/// bit set iff voxel > threshold.
Mask foreground_mask(const Volume& vol, double threshold);
/// Clears the voxels that `step` added.
Mask exclude_padding(Mask mask, const PadStep& step);
Mask intersect_masks(const Mask& a, const Mask& b);

/// Runs one volume through body mask, resample, clip, normalize and pad.
Volume preprocess_volume(const Volume& vol, const Mask* body, const ModalityRange& range, const PipelineConfig& cfg,
                         TransformRecord& record);

/// Full paired pipeline: both volumes are preprocessed, thresholded and the
/// foreground masks intersected.
PipelineResult run_pipeline(const Volume& source, const Volume& target, const Mask* body, const PipelineConfig& cfg);

/// Re-applies a record's steps to the original volume.
Volume replay(const TransformRecord& record, const Volume& original, const Mask* body);

/// Undoes padding, normalization and resampling (once, back onto the
/// original grid) and axial crops. Clipping and body-mask fill destroy
/// information and are left in place.
Volume invert_to_original(const Volume& pred, const TransformRecord& record);

}  // namespace voxbench
