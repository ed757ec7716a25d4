#include "voxbench/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "voxbench/csv.hpp"
#include "voxbench/preprocess.hpp"
#include "voxbench/random.hpp"

namespace voxbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(District d) {
  switch (d) {
    case District::head_neck: return "head-neck";
    case District::pelvis: return "pelvis";
    case District::lung: return "lung";
    case District::brain: return "brain";
  }
  return "unknown";
}

District parse_district(std::string_view s) {
  for (District d : {District::head_neck, District::pelvis, District::lung, District::brain})
    if (to_string(d) == s) return d;
  throw Error(ErrorCode::configuration, "unknown district: " + std::string(s));
}

const SubjectEntry& DatasetManifest::subject(std::string_view id) const {
  for (const auto& s : subjects)
    if (s.subject_id == id) return s;
  throw Error(ErrorCode::lookup, "unknown subject: " + std::string(id));
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::configuration, where + "." + key + ": missing");
  return j.at(key);
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) throw Error(ErrorCode::configuration, where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::optional<double> optional_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw Error(ErrorCode::configuration, where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

}  // namespace

DatasetManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  DatasetManifest m;
  m.dataset_id = require_string(j, "dataset_id", "manifest");
  const json& task = require(j, "task", "manifest");
  try {
    m.source_modality = parse_modality(require_string(task, "source", "manifest.task"));
    m.target_modality = parse_modality(require_string(task, "target", "manifest.task"));
    m.district = parse_district(require_string(j, "district", "manifest"));
  } catch (const Error& e) {
    throw Error(ErrorCode::configuration, std::string("manifest: ") + e.what());
  }
  const json& subjects = require(j, "subjects", "manifest");
  if (!subjects.is_array()) throw Error(ErrorCode::configuration, "manifest.subjects: expected an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::string where = "manifest.subjects[" + std::to_string(i) + "]";
    const json& s = subjects[i];
    SubjectEntry e;
    e.subject_id = require_string(s, "subject_id", where);
    if (!seen.insert(e.subject_id).second)
      throw Error(ErrorCode::configuration, where + ".subject_id: duplicate '" + e.subject_id + "'");
    e.source_path = resolve(base_dir, require_string(s, "source_path", where));
    e.target_path = resolve(base_dir, require_string(s, "target_path", where));
    if (s.contains("body_mask_path") && !s["body_mask_path"].is_null())
      e.body_mask_path = resolve(base_dir, require_string(s, "body_mask_path", where));
    if (s.contains("lesion_mask_path") && !s["lesion_mask_path"].is_null())
      e.lesion_mask_path = resolve(base_dir, require_string(s, "lesion_mask_path", where));
    e.weight_kg = optional_number(s, "weight_kg", where);
    e.injected_dose_MBq = optional_number(s, "injected_dose_MBq", where);
    m.subjects.push_back(std::move(e));
  }
  return m;
}

json to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = 1;
  j["dataset_id"] = m.dataset_id;
  j["task"] = {{"source", to_string(m.source_modality)}, {"target", to_string(m.target_modality)}};
  j["district"] = to_string(m.district);
  j["subjects"] = json::array();
  for (const auto& s : m.subjects) {
    json e{{"subject_id", s.subject_id}, {"source_path", s.source_path.generic_string()},
           {"target_path", s.target_path.generic_string()}};
    if (s.body_mask_path) e["body_mask_path"] = s.body_mask_path->generic_string();
    if (s.lesion_mask_path) e["lesion_mask_path"] = s.lesion_mask_path->generic_string();
    if (s.weight_kg) e["weight_kg"] = *s.weight_kg;
    if (s.injected_dose_MBq) e["injected_dose_MBq"] = *s.injected_dose_MBq;
    j["subjects"].push_back(std::move(e));
  }
  return j;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::configuration, path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

std::map<std::string, SubjectMetadata> read_subject_metadata(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("subject_id"), w = t.column("weight_kg"), d = t.column("injected_dose_MBq");
  std::map<std::string, SubjectMetadata> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      out[row.at(id)] = SubjectMetadata{std::stod(row.at(w)), std::stod(row.at(d))};
    } catch (const std::exception&) {
      throw Error(ErrorCode::configuration, path.string() + ": bad numeric value on row " + std::to_string(r + 2));
    }
  }
  return out;
}

void apply_metadata(DatasetManifest& m, const std::map<std::string, SubjectMetadata>& meta) {
  for (auto& s : m.subjects) {
    auto it = meta.find(s.subject_id);
    if (it == meta.end()) continue;
    s.weight_kg = it->second.weight_kg;
    s.injected_dose_MBq = it->second.injected_dose_MBq;
  }
}

std::size_t test_count(std::size_t n, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::parameter, "test_fraction must lie in [0, 1]");
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 0.5 + 1e-9));
}

Split split_subjects(std::vector<std::string> ids, const SplitSpec& spec) {
  if (spec.validation_count < 0) throw Error(ErrorCode::parameter, "validation_count must be non-negative");
  const std::size_t n = ids.size();
  const auto nv = static_cast<std::size_t>(spec.validation_count);
  if (n < nv + 2)
    throw Error(ErrorCode::cardinality, "need at least " + std::to_string(nv + 2) + " subjects, got " + std::to_string(n));
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(ErrorCode::configuration, "duplicate subject ids");
  const std::size_t nt = test_count(n, spec.test_fraction);
  if (nt + nv > n) throw Error(ErrorCode::cardinality, "test and validation sets exceed the subject count");
  Rng rng(spec.seed);
  rng.shuffle(ids);
  Split s;
  s.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nt));
  s.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(nt),
                      ids.begin() + static_cast<std::ptrdiff_t>(nt + nv));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(nt + nv), ids.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Split split_subjects(const DatasetManifest& m, const SplitSpec& spec) {
  std::vector<std::string> ids;
  for (const auto& s : m.subjects) ids.push_back(s.subject_id);
  return split_subjects(std::move(ids), spec);
}

json to_json(const Split& s) {
  return json{{"schema_version", 1}, {"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

namespace {

template <typename F>
Volume map_voxels(const Volume& vol, F f) {
  Grid3<float> out(vol.dims());
  const auto in = vol.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>(f(static_cast<double>(in[i])));
  return vol.with_voxels(std::move(out));
}

}  // namespace

Volume suv_convert_enhance(const Volume& pet, double weight_kg, double dose_MBq) {
  if (!(weight_kg > 0.0) || !(dose_MBq > 0.0)) throw Error(ErrorCode::parameter, "weight and dose must be positive");
  const double denom = dose_MBq * 1e6;
  const double num = weight_kg * 1000.0;
  return map_voxels(pet, [&](double v) { return v * num / denom; }).with_modality(Modality::PET);
}

Volume suv_convert_autopet(const Volume& r, double activity_kBq, double weight_kg) {
  if (!(activity_kBq > 0.0) || !(weight_kg > 0.0))
    throw Error(ErrorCode::parameter, "activity and weight must be positive");
  const double denom = activity_kBq * weight_kg;
  return map_voxels(r, [&](double v) { return v / denom; }).with_modality(Modality::PET);
}

std::pair<Volume, CropStep> crop_lung_region(const Volume& vol, const Mask& lung, double margin_mm) {
  if (!(lung.dims() == vol.dims())) throw Error(ErrorCode::shape, "lung mask dims differ from volume");
  if (!(margin_mm >= 0.0)) throw Error(ErrorCode::parameter, "margin must be non-negative");
  const Dims& d = vol.dims();
  std::int64_t first = -1, last = -1;
  for (std::int64_t z = 0; z < d.z; ++z) {
    bool any = false;
    for (std::int64_t y = 0; y < d.y && !any; ++y)
      for (std::int64_t x = 0; x < d.x; ++x)
        if (lung(x, y, z)) {
          any = true;
          break;
        }
    if (any) {
      if (first < 0) first = z;
      last = z;
    }
  }
  if (first < 0) throw Error(ErrorCode::degenerate_mask, "lung mask is empty");
  const auto margin = static_cast<std::int64_t>(std::ceil(margin_mm / vol.spacing()[2] - 1e-9));
  CropStep step;
  step.z_begin = std::max<std::int64_t>(0, first - margin);
  step.z_end = std::min<std::int64_t>(d.z, last + margin + 1);
  step.original_nz = d.z;
  step.fill = modality_fill(vol, nullptr, default_range(vol.modality()).fill_rule);
  return {apply_crop(vol, step), step};
}

}  // namespace voxbench
