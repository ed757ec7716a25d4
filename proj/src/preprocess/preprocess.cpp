#include "voxbench/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "voxbench/resample.hpp"
#include "voxbench/simd/kernels.hpp"

namespace voxbench {

ModalityRange default_range(Modality m) {
  if (is_ct_like(m)) return ModalityRange{m, -1024.0, 3000.0, FillRule::foreground_min};
  if (m == Modality::PET) return ModalityRange{m, 0.0, 20.0, FillRule::foreground_min};
  return ModalityRange{m, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                       FillRule::zero};
}

void validate(const ModalityRange& r) {
  if (std::isfinite(r.clip_low) && std::isfinite(r.clip_high) && !(r.clip_low < r.clip_high))
    throw Error(ErrorCode::parameter, "clip_low must be below clip_high");
}

void PipelineConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0.0) || !std::isfinite(target_spacing[a]))
      throw Error(ErrorCode::parameter, "target spacing must be positive");
  }
  if (!std::isfinite(source_threshold) || !std::isfinite(target_threshold))
    throw Error(ErrorCode::parameter, "thresholds must be finite");
  if (pad_multiple < 1) throw Error(ErrorCode::parameter, "pad_multiple must be >= 1");
  if (!patch.positive()) throw Error(ErrorCode::parameter, "patch dims must be positive");
  if (source_range) voxbench::validate(*source_range);
  if (target_range) voxbench::validate(*target_range);
}

float modality_fill(const Volume& vol, const Mask* body, FillRule rule) {
  if (rule == FillRule::zero) return 0.0f;
  const auto v = vol.values();
  float lo = std::numeric_limits<float>::infinity();
  if (body == nullptr) {
    lo = *std::min_element(v.begin(), v.end());
  } else {
    const auto bits = body->values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (bits[i]) lo = std::min(lo, v[i]);
  }
  return lo;
}

namespace {

void check_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) throw Error(ErrorCode::shape, std::string(what) + ": dims " + to_string(a) + " vs " + to_string(b));
}

FillRule default_fill_rule(Modality m) { return default_range(m).fill_rule; }

Volume mask_with_fill(const Volume& vol, const Mask& body, float fill) {
  Grid3<float> out = vol.voxels();
  const auto bits = body.values();
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!bits[i]) v[i] = fill;
  return vol.with_voxels(std::move(out));
}

Volume clip_with(const Volume& vol, double low, double high) {
  Grid3<float> out = vol.voxels();
  simd::active().clamp(out.values().data(), static_cast<float>(low), static_cast<float>(high), out.size());
  return vol.with_voxels(std::move(out));
}

Volume affine(const Volume& vol, double a, double b) {
  Grid3<float> out(vol.dims());
  simd::active().scale_shift(out.values().data(), vol.values().data(), a, b, out.size());
  return vol.with_voxels(std::move(out));
}

Volume normalize_with(const Volume& vol, const NormalizeStep& s) { return affine(vol, 1.0 / s.std, -s.mean / s.std); }

float clip_value(float v, const ClipStep& clip) {
  if (!clip.applied) return v;
  return std::min(std::max(v, static_cast<float>(clip.low)), static_cast<float>(clip.high));
}

}  // namespace

std::pair<Volume, BodyMaskStep> apply_body_mask(const Volume& vol, const Mask& body) {
  return apply_body_mask(vol, body, default_fill_rule(vol.modality()));
}

std::pair<Volume, BodyMaskStep> apply_body_mask(const Volume& vol, const Mask& body, FillRule rule) {
  check_same_dims(vol.dims(), body.dims(), "body mask");
  if (count(body) == 0) throw Error(ErrorCode::degenerate_mask, "body mask is empty");
  const float fill = modality_fill(vol, &body, rule);
  return {mask_with_fill(vol, body, fill), BodyMaskStep{true, fill}};
}

std::pair<Volume, ClipStep> clip_intensities(const Volume& vol, const ModalityRange& range) {
  validate(range);
  if (is_mri(vol.modality()) || !range.clips()) return {vol, ClipStep{false, range.clip_low, range.clip_high}};
  return {clip_with(vol, range.clip_low, range.clip_high), ClipStep{true, range.clip_low, range.clip_high}};
}

std::pair<Volume, NormalizeStep> normalize(const Volume& vol) {
  const auto& k = simd::active();
  const auto v = vol.values();
  const double n = static_cast<double>(v.size());
  const double mean = k.sum(v.data(), v.size()) / n;
  const double var = k.sum_sq_dev(v.data(), mean, v.size()) / n;
  const double sd = std::sqrt(var);
  if (!(sd > 0.0) || !std::isfinite(sd)) throw Error(ErrorCode::degenerate_normalization, "volume has zero variance");
  NormalizeStep step{mean, sd};
  return {normalize_with(vol, step), step};
}

Volume denormalize(const Volume& vol, const NormalizeStep& step) { return affine(vol, step.std, step.mean); }

std::pair<Volume, PadStep> pad_to_multiple(const Volume& vol, int multiple, float fill, Dims min_dims) {
  if (multiple < 1) throw Error(ErrorCode::parameter, "pad multiple must be >= 1");
  PadStep step;
  step.fill = fill;
  std::int64_t before[3], after[3];
  for (int a = 0; a < 3; ++a) {
    const std::int64_t n = vol.dims()[a];
    const std::int64_t floor_size = std::max<std::int64_t>(n, min_dims[a]);
    const std::int64_t target = (floor_size + multiple - 1) / multiple * multiple;
    before[a] = (target - n) / 2;
    after[a] = target - n - before[a];
  }
  step.before = Index3{before[0], before[1], before[2]};
  step.after = Index3{after[0], after[1], after[2]};
  return {apply_padding(vol, step), step};
}

Volume apply_padding(const Volume& vol, const PadStep& step) {
  const Dims& d = vol.dims();
  const Dims out_dims{d.x + step.before.x + step.after.x, d.y + step.before.y + step.after.y,
                      d.z + step.before.z + step.after.z};
  Grid3<float> out(out_dims, step.fill);
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      std::copy_n(vol.voxels().row(y, z).data(), d.x,
                  out.row(y + step.before.y, z + step.before.z).data() + step.before.x);
  Geometry g = vol.geometry();
  g.origin = g.world(Vec3{-static_cast<double>(step.before.x), -static_cast<double>(step.before.y),
                          -static_cast<double>(step.before.z)});
  return Volume(std::move(out), g, vol.modality());
}

Volume crop_padding(const Volume& vol, const PadStep& step) {
  const Dims& d = vol.dims();
  const Dims out_dims{d.x - step.before.x - step.after.x, d.y - step.before.y - step.after.y,
                      d.z - step.before.z - step.after.z};
  if (!out_dims.positive()) throw Error(ErrorCode::corrupted_record, "pad record exceeds volume dims");
  Grid3<float> out(out_dims);
  for (std::int64_t z = 0; z < out_dims.z; ++z)
    for (std::int64_t y = 0; y < out_dims.y; ++y)
      std::copy_n(vol.voxels().row(y + step.before.y, z + step.before.z).data() + step.before.x, out_dims.x,
                  out.row(y, z).data());
  Geometry g = vol.geometry();
  g.origin = g.world(Vec3{static_cast<double>(step.before.x), static_cast<double>(step.before.y),
                          static_cast<double>(step.before.z)});
  return Volume(std::move(out), g, vol.modality());
}

Mask foreground_mask(const Volume& vol, double threshold) {
  Mask m(vol.dims());
  const auto v = vol.values();
  const auto t = static_cast<float>(threshold);
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] > t ? 1 : 0;
  return m;
}

Mask exclude_padding(Mask mask, const PadStep& step) {
  const Dims& d = mask.dims();
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        const bool pad = x < step.before.x || y < step.before.y || z < step.before.z || x >= d.x - step.after.x ||
                         y >= d.y - step.after.y || z >= d.z - step.after.z;
        if (pad) mask(x, y, z) = 0;
      }
  return mask;
}

Mask intersect_masks(const Mask& a, const Mask& b) {
  check_same_dims(a.dims(), b.dims(), "mask intersection");
  Mask out(a.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

Volume preprocess_volume(const Volume& vol, const Mask* body, const ModalityRange& range, const PipelineConfig& cfg,
                         TransformRecord& record) {
  record = TransformRecord{};
  record.modality = vol.modality();

  // 1. body mask
  Volume cur = vol;
  BodyMaskStep mask_step;
  if (body != nullptr) {
    std::tie(cur, mask_step) = apply_body_mask(cur, *body, range.fill_rule);
  } else {
    mask_step = BodyMaskStep{false, modality_fill(vol, nullptr, range.fill_rule)};
  }
  record.steps.emplace_back(mask_step);

  // 2. resample
  ResampleStep rs;
  rs.original = vol.geometry();
  rs.original_dims = vol.dims();
  rs.target_spacing = cfg.target_spacing;
  rs.fill = mask_step.fill;
  rs.output_dims = resampled_dims(cur.dims(), cur.spacing(), cfg.target_spacing);
  cur = resample_to_grid(cur, cfg.target_spacing, rs.output_dims, Boundary::clamp, rs.fill);
  record.steps.emplace_back(rs);

  // 3. clip
  ClipStep clip;
  std::tie(cur, clip) = clip_intensities(cur, range);
  record.steps.emplace_back(clip);

  // 4. normalize
  NormalizeStep norm;
  std::tie(cur, norm) = normalize(cur);
  record.steps.emplace_back(norm);

  // 5. pad with the modality fill carried through clip and normalize
  const float pad_fill =
      static_cast<float>((static_cast<double>(clip_value(mask_step.fill, clip)) - norm.mean) / norm.std);
  PadStep pad;
  std::tie(cur, pad) = pad_to_multiple(cur, cfg.pad_multiple, pad_fill, cfg.patch);
  record.steps.emplace_back(pad);
  return cur;
}

PipelineResult run_pipeline(const Volume& source, const Volume& target, const Mask* body, const PipelineConfig& cfg) {
  cfg.validate();
  check_same_dims(source.dims(), target.dims(), "source/target pair");
  if (body != nullptr) check_same_dims(source.dims(), body->dims(), "body mask");

  const ModalityRange src_range = cfg.source_range.value_or(default_range(source.modality()));
  const ModalityRange tgt_range = cfg.target_range.value_or(default_range(target.modality()));

  PipelineResult r;
  r.pair.source = preprocess_volume(source, body, src_range, cfg, r.source_record);
  r.pair.target = preprocess_volume(target, body, tgt_range, cfg, r.target_record);
  check_same_dims(r.pair.source.dims(), r.pair.target.dims(), "preprocessed pair");

  // 6. foreground masks, 7. intersection
  const PadStep& src_pad = *r.source_record.find<PadStep>();
  const PadStep& tgt_pad = *r.target_record.find<PadStep>();
  const Mask src_fg = exclude_padding(foreground_mask(r.pair.source, cfg.source_threshold), src_pad);
  const Mask tgt_fg = exclude_padding(foreground_mask(r.pair.target, cfg.target_threshold), tgt_pad);
  r.foreground = intersect_masks(src_fg, tgt_fg);
  return r;
}

Volume replay(const TransformRecord& record, const Volume& original, const Mask* body) {
  Volume cur = original;
  for (const TransformStep& step : record.steps) {
    if (const auto* s = std::get_if<BodyMaskStep>(&step)) {
      if (s->applied) {
        if (body == nullptr) throw Error(ErrorCode::parameter, "record applies a body mask but none was supplied");
        check_same_dims(cur.dims(), body->dims(), "body mask");
        cur = mask_with_fill(cur, *body, s->fill);
      }
    } else if (const auto* s = std::get_if<ResampleStep>(&step)) {
      cur = resample_to_grid(cur, s->target_spacing, s->output_dims, Boundary::clamp, s->fill);
    } else if (const auto* s = std::get_if<ClipStep>(&step)) {
      if (s->applied) cur = clip_with(cur, s->low, s->high);
    } else if (const auto* s = std::get_if<NormalizeStep>(&step)) {
      cur = normalize_with(cur, *s);
    } else if (const auto* s = std::get_if<PadStep>(&step)) {
      cur = apply_padding(cur, *s);
    } else if (const auto* s = std::get_if<CropStep>(&step)) {
      cur = apply_crop(cur, *s);
    }
  }
  return cur;
}

Volume apply_crop(const Volume& vol, const CropStep& s) {
  const std::int64_t z0 = s.z_begin, z1 = s.z_end;
  if (z0 < 0 || z1 > vol.dims().z || z0 >= z1) throw Error(ErrorCode::corrupted_record, "crop range outside volume");
  const Dims& d = vol.dims();
  Grid3<float> out(Dims{d.x, d.y, z1 - z0});
  for (std::int64_t z = z0; z < z1; ++z)
    for (std::int64_t y = 0; y < d.y; ++y) std::copy_n(vol.voxels().row(y, z).data(), d.x, out.row(y, z - z0).data());
  Geometry g = vol.geometry();
  g.origin = g.world(Vec3{0.0, 0.0, static_cast<double>(z0)});
  return Volume(std::move(out), g, vol.modality());
}

Volume undo_crop(const Volume& vol, const CropStep& s) {
  const Dims& d = vol.dims();
  if (d.z != s.z_end - s.z_begin)
    throw Error(ErrorCode::corrupted_record, "crop record does not match volume depth");
  Grid3<float> out(Dims{d.x, d.y, s.original_nz}, s.fill);
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y) std::copy_n(vol.voxels().row(y, z).data(), d.x, out.row(y, z + s.z_begin).data());
  Geometry g = vol.geometry();
  g.origin = g.world(Vec3{0.0, 0.0, -static_cast<double>(s.z_begin)});
  return Volume(std::move(out), g, vol.modality());
}

Volume invert_to_original(const Volume& pred, const TransformRecord& record) {
  if (record.steps.empty()) throw Error(ErrorCode::corrupted_record, "record has no steps");
  if (record.find<ResampleStep>() == nullptr) throw Error(ErrorCode::corrupted_record, "record has no resample step");
  Volume cur = pred.with_modality(record.modality);
  for (auto it = record.steps.rbegin(); it != record.steps.rend(); ++it) {
    if (const auto* s = std::get_if<PadStep>(&*it)) {
      cur = crop_padding(cur, *s);
    } else if (const auto* s = std::get_if<NormalizeStep>(&*it)) {
      if (!(s->std > 0.0)) throw Error(ErrorCode::corrupted_record, "normalize step has non-positive std");
      cur = denormalize(cur, *s);
    } else if (const auto* s = std::get_if<ResampleStep>(&*it)) {
      if (!(cur.dims() == s->output_dims))
        throw Error(ErrorCode::corrupted_record,
                    "volume dims " + to_string(cur.dims()) + " do not match recorded " + to_string(s->output_dims));
      cur = resample_to_grid(cur, s->original.spacing, s->original_dims, Boundary::clamp, s->fill);
      cur = cur.with_geometry(s->original);
    } else if (const auto* s = std::get_if<CropStep>(&*it)) {
      cur = undo_crop(cur, *s);
    }
  }
  return cur;
}

}  // namespace voxbench
