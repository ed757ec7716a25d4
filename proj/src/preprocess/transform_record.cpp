#include "voxbench/transform_record.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "voxbench/error.hpp"

namespace voxbench {

using nlohmann::json;

namespace {

template <typename... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json vec(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
json dims(const Dims& d) { return json::array({d.x, d.y, d.z}); }
json index(const Index3& i) { return json::array({i.x, i.y, i.z}); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::corrupted_record, std::string("missing step parameter '") + key + "'");
  return j.at(key);
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not finite");
  return d;
}

std::int64_t integer(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_array() || v.size() != N)
    throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' has the wrong arity");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not numeric");
    out[i] = v[i].get<double>();
  }
  return out;
}

std::array<std::int64_t, 3> integers3(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_array() || v.size() != 3)
    throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' has the wrong arity");
  std::array<std::int64_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number_integer())
      throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not integral");
    out[i] = v[i].get<std::int64_t>();
  }
  return out;
}

bool boolean(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) throw Error(ErrorCode::corrupted_record, std::string("parameter '") + key + "' is not boolean");
  return v.get<bool>();
}

}  // namespace

std::string_view step_kind(const TransformStep& step) {
  return std::visit(overloaded{
                        [](const BodyMaskStep&) { return std::string_view("body-mask"); },
                        [](const ResampleStep&) { return std::string_view("resample"); },
                        [](const ClipStep&) { return std::string_view("clip"); },
                        [](const NormalizeStep&) { return std::string_view("normalize"); },
                        [](const PadStep&) { return std::string_view("pad"); },
                        [](const CropStep&) { return std::string_view("crop"); },
                    },
                    step);
}

json to_json(const TransformRecord& record) {
  json steps = json::array();
  for (const auto& step : record.steps) {
    json params = std::visit(
        overloaded{
            [](const BodyMaskStep& s) { return json{{"applied", s.applied}, {"fill", s.fill}}; },
            [](const ResampleStep& s) {
              return json{{"original_spacing", vec(s.original.spacing)},
                          {"original_origin", vec(s.original.origin)},
                          {"original_direction", s.original.direction},
                          {"original_dims", dims(s.original_dims)},
                          {"target_spacing", vec(s.target_spacing)},
                          {"output_dims", dims(s.output_dims)},
                          {"fill", s.fill}};
            },
            [](const ClipStep& s) { return json{{"applied", s.applied}, {"low", s.low}, {"high", s.high}}; },
            [](const NormalizeStep& s) { return json{{"mean", s.mean}, {"std", s.std}}; },
            [](const PadStep& s) { return json{{"before", index(s.before)}, {"after", index(s.after)}, {"fill", s.fill}}; },
            [](const CropStep& s) {
              return json{{"z_begin", s.z_begin}, {"z_end", s.z_end}, {"original_nz", s.original_nz}, {"fill", s.fill}};
            },
        },
        step);
    steps.push_back(json{{"kind", step_kind(step)}, {"params", std::move(params)}});
  }
  return json{{"schema_version", TransformRecord::kSchemaVersion},
              {"modality", to_string(record.modality)},
              {"steps", std::move(steps)}};
}

TransformRecord record_from_json(const json& j) {
  TransformRecord record;
  if (!j.is_object() || !j.contains("steps") || !j.at("steps").is_array())
    throw Error(ErrorCode::corrupted_record, "record has no step list");
  if (j.contains("modality")) {
    try {
      record.modality = parse_modality(j.at("modality").get<std::string>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::corrupted_record, e.what());
    }
  }
  for (const json& entry : j.at("steps")) {
    const json& kind_j = field(entry, "kind");
    if (!kind_j.is_string()) throw Error(ErrorCode::corrupted_record, "step kind is not a string");
    const std::string kind = kind_j.get<std::string>();
    const json& p = field(entry, "params");
    if (kind == "body-mask") {
      record.steps.emplace_back(BodyMaskStep{boolean(p, "applied"), static_cast<float>(number(p, "fill"))});
    } else if (kind == "resample") {
      ResampleStep s;
      s.original.spacing = numbers<3>(p, "original_spacing");
      s.original.origin = numbers<3>(p, "original_origin");
      s.original.direction = numbers<9>(p, "original_direction");
      const auto od = integers3(p, "original_dims");
      s.original_dims = Dims{od[0], od[1], od[2]};
      s.target_spacing = numbers<3>(p, "target_spacing");
      const auto td = integers3(p, "output_dims");
      s.output_dims = Dims{td[0], td[1], td[2]};
      s.fill = static_cast<float>(number(p, "fill"));
      if (!s.original_dims.positive() || !s.output_dims.positive())
        throw Error(ErrorCode::corrupted_record, "resample step has non-positive dims");
      try {
        validate_geometry(s.original);
      } catch (const Error& e) {
        throw Error(ErrorCode::corrupted_record, e.what());
      }
      record.steps.emplace_back(s);
    } else if (kind == "clip") {
      record.steps.emplace_back(ClipStep{boolean(p, "applied"), number(p, "low"), number(p, "high")});
    } else if (kind == "normalize") {
      NormalizeStep s{number(p, "mean"), number(p, "std")};
      if (!(s.std > 0.0)) throw Error(ErrorCode::corrupted_record, "normalize step has non-positive std");
      record.steps.emplace_back(s);
    } else if (kind == "pad") {
      const auto b = integers3(p, "before");
      const auto a = integers3(p, "after");
      record.steps.emplace_back(
          PadStep{Index3{b[0], b[1], b[2]}, Index3{a[0], a[1], a[2]}, static_cast<float>(number(p, "fill"))});
    } else if (kind == "crop") {
      record.steps.emplace_back(CropStep{integer(p, "z_begin"), integer(p, "z_end"), integer(p, "original_nz"),
                                         static_cast<float>(number(p, "fill"))});
    } else {
      throw Error(ErrorCode::corrupted_record, "unknown step kind '" + kind + "'");
    }
  }
  return record;
}

void write_record(const TransformRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << to_json(record).dump(2) << '\n';
}

TransformRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corrupted_record, std::string("sidecar is not valid JSON: ") + e.what());
  }
  return record_from_json(j);
}

}  // namespace voxbench
