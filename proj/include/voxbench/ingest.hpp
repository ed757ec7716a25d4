#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbench/transform_record.hpp"
#include "voxbench/volume.hpp"

namespace voxbench {

enum class District { head_neck, pelvis, lung, brain };
std::string_view to_string(District d);
District parse_district(std::string_view s);

struct SubjectEntry {
  std::string subject_id;
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::optional<std::filesystem::path> body_mask_path;
  std::optional<std::filesystem::path> lesion_mask_path;
  std::optional<double> weight_kg;
  std::optional<double> injected_dose_MBq;
};

struct DatasetManifest {
  std::string dataset_id;
  Modality source_modality = Modality::CT;
  Modality target_modality = Modality::CT;
  District district = District::head_neck;
  std::vector<SubjectEntry> subjects;

  const SubjectEntry& subject(std::string_view id) const;
};

/// Relative paths are resolved against `base_dir`.
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

struct SubjectMetadata {
  double weight_kg = 0.0;
  double injected_dose_MBq = 0.0;
};

/// CSV with columns subject_id, weight_kg, injected_dose_MBq.
std::map<std::string, SubjectMetadata> read_subject_metadata(const std::filesystem::path& path);
void apply_metadata(DatasetManifest& m, const std::map<std::string, SubjectMetadata>& meta);

struct SplitSpec {
  double test_fraction = 0.25;
  int validation_count = 5;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// round-half-up(fraction * n)
std::size_t test_count(std::size_t n, double fraction);

/// Sorted ids are shuffled with the seed; the first test_count() form the
/// test set, the next validation_count the validation set, the rest train.
Split split_subjects(std::vector<std::string> ids, const SplitSpec& spec);
Split split_subjects(const DatasetManifest& m, const SplitSpec& spec);
nlohmann::json to_json(const Split& s);

/// SUV = PET[Bq/mL] * W[kg] * 1000 / (D[MBq] * 1e6)
Volume suv_convert_enhance(const Volume& pet_bq_ml, double weight_kg, double dose_MBq);
/// SUV = r[kBq/mL] / (a'[kBq] * W[kg])
Volume suv_convert_autopet(const Volume& r_kbq_ml, double decay_corrected_activity_kBq, double weight_kg);

/// Axial crop to the lung z-extent plus ceil(margin_mm / sz) slices each
/// side, clamped to the volume. The step re-applies to paired volumes with
/// apply_crop().
std::pair<Volume, CropStep> crop_lung_region(const Volume& vol, const Mask& lung, double margin_mm = 20.0);

struct Task {
  Modality source = Modality::CBCT;
  Modality target = Modality::CT;
};

struct PhantomCase {
  Volume source;
  Volume target;
  Mask body;
  Mask lesions;
};

/// Piecewise-linear tissue-to-intensity knots (u in [0, 1]) per modality.
struct Knot {
  double u;
  double value;
};
const std::vector<Knot>& phantom_knots(Modality m);

/// The documented transform T: target = f_target(f_source^-1(source)).
double phantom_transform(Modality source, Modality target, double source_value);

/// Seeded phantom: ellipsoidal body with internal structures and 1-5
/// lesions. source = f_source(u) and target = T(source) at every voxel.
PhantomCase generate_phantom_pair(std::uint64_t seed, const Dims& dims, const Vec3& spacing, const Task& task);

}  // namespace voxbench
