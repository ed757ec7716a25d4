#include <cstdlib>
#include <fstream>

#include "voxbench/bench.hpp"

namespace voxbench::bench {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::configuration, path + ": " + msg);
}

const json* find(const json& j, const char* key) {
  return j.is_object() && j.contains(key) && !j.at(key).is_null() ? &j.at(key) : nullptr;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  Vec3 v;
  for (std::size_t i = 0; i < 3; ++i) v[i] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Dims dims3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 integers");
  std::int64_t d[3];
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<std::int64_t>() < 1)
      fail(path + "[" + std::to_string(i) + "]", "expected a positive integer");
    d[i] = j[i].get<std::int64_t>();
  }
  return Dims{d[0], d[1], d[2]};
}

ModalityRange range_from(const json& j, Modality m, const std::string& path) {
  ModalityRange r = default_range(m);
  if (const json* v = find(j, "clip_low")) r.clip_low = number(*v, path + ".clip_low");
  if (const json* v = find(j, "clip_high")) r.clip_high = number(*v, path + ".clip_high");
  if (const json* v = find(j, "fill_rule")) {
    const std::string s = v->is_string() ? v->get<std::string>() : "";
    if (s == "foreground-min")
      r.fill_rule = FillRule::foreground_min;
    else if (s == "zero")
      r.fill_rule = FillRule::zero;
    else
      fail(path + ".fill_rule", "expected \"foreground-min\" or \"zero\"");
  }
  if (std::isfinite(r.clip_low) && std::isfinite(r.clip_high) && !(r.clip_low < r.clip_high))
    fail(path, "clip_low must be below clip_high");
  return r;
}

json range_json(const ModalityRange& r) {
  json j;
  if (std::isfinite(r.clip_low)) j["clip_low"] = r.clip_low;
  if (std::isfinite(r.clip_high)) j["clip_high"] = r.clip_high;
  j["fill_rule"] = r.fill_rule == FillRule::zero ? "zero" : "foreground-min";
  return j;
}

Modality modality_at(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a modality name");
  try {
    return parse_modality(j.get<std::string>());
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) fail("$", "expected an object");
  ExperimentConfig c;
  auto path_field = [&](const char* key) {
    const json* v = find(j, key);
    if (!v || !v->is_string()) fail(key, "expected a path string");
    fs::path p(v->get<std::string>());
    return p.is_absolute() ? p : base_dir / p;
  };
  c.manifest_path = path_field("manifest");
  c.output_dir = path_field("output_dir");
  if (const json* v = find(j, "seed")) {
    if (!v->is_number_unsigned()) fail("seed", "expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  if (const char* env = std::getenv("BENCH_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long s = std::strtoull(env, &end, 10);
    if (*end != '\0') fail("BENCH_SEED", "expected a non-negative integer");
    c.seed = s;
  }
  c.split.seed = c.seed;
  if (const json* t = find(j, "task")) {
    if (!t->is_object()) fail("task", "expected an object");
    c.task = Task{modality_at(t->value("source", json()), "task.source"),
                  modality_at(t->value("target", json()), "task.target")};
  }
  if (const json* s = find(j, "split")) {
    if (const json* v = find(*s, "test_fraction")) {
      c.split.test_fraction = number(*v, "split.test_fraction");
      if (!(c.split.test_fraction >= 0.0 && c.split.test_fraction < 1.0)) fail("split.test_fraction", "must lie in [0, 1)");
    }
    if (const json* v = find(*s, "validation_count")) {
      if (!v->is_number_integer() || v->get<int>() < 0) fail("split.validation_count", "expected a non-negative integer");
      c.split.validation_count = v->get<int>();
    }
  }
  if (const json* p = find(j, "pipeline")) {
    if (const json* v = find(*p, "target_spacing")) {
      c.pipeline.target_spacing = vec3(*v, "pipeline.target_spacing");
      for (int a = 0; a < 3; ++a)
        if (!(c.pipeline.target_spacing[a] > 0.0))
          fail("pipeline.target_spacing[" + std::to_string(a) + "]", "must be positive");
    }
    if (const json* v = find(*p, "source_threshold")) c.pipeline.source_threshold = number(*v, "pipeline.source_threshold");
    if (const json* v = find(*p, "target_threshold")) c.pipeline.target_threshold = number(*v, "pipeline.target_threshold");
    if (const json* v = find(*p, "pad_multiple")) {
      if (!v->is_number_integer() || v->get<int>() < 1) fail("pipeline.pad_multiple", "expected an integer >= 1");
      c.pipeline.pad_multiple = v->get<int>();
    }
  }
  if (const json* p = find(j, "patch")) {
    if (const json* v = find(*p, "size")) c.patch.size = dims3(*v, "patch.size");
    if (const json* v = find(*p, "overlap")) {
      c.patch.overlap = number(*v, "patch.overlap");
      if (!(c.patch.overlap >= 0.0 && c.patch.overlap < 1.0)) fail("patch.overlap", "must lie in [0, 1)");
    }
    if (const json* v = find(*p, "sigma_scale")) {
      c.patch.sigma_scale = number(*v, "patch.sigma_scale");
      if (!(c.patch.sigma_scale > 0.0)) fail("patch.sigma_scale", "must be positive");
    }
  }
  c.pipeline.patch = c.patch.size;
  if (const json* m = find(j, "model")) {
    if (const json* v = find(*m, "name")) {
      if (!v->is_string() || v->get<std::string>().empty()) fail("model.name", "expected a non-empty string");
      c.model.name = v->get<std::string>();
    }
    if (const json* v = find(*m, "params")) {
      if (!v->is_object()) fail("model.params", "expected an object");
      c.model.params = *v;
    }
  }
  if (const json* v = find(j, "suv_conversion")) {
    const std::string s = v->is_string() ? v->get<std::string>() : "";
    if (s == "none")
      c.suv = SuvConversion::none;
    else if (s == "enhance")
      c.suv = SuvConversion::enhance;
    else
      fail("suv_conversion", "expected \"none\" or \"enhance\"");
  }
  if (const json* e = find(j, "evaluation"))
    if (const json* v = find(*e, "lesions")) {
      if (!v->is_boolean()) fail("evaluation.lesions", "expected a boolean");
      c.lesions = v->get<bool>();
    }
  // Modality ranges need the task; they are resolved against the manifest
  // modalities when only partially given.
  if (const json* p = find(j, "pipeline")) {
    if (const json* r = find(*p, "source_range")) {
      if (!c.task) fail("pipeline.source_range", "requires \"task\"");
      c.pipeline.source_range = range_from(*r, c.task->source, "pipeline.source_range");
    }
    if (const json* r = find(*p, "target_range")) {
      if (!c.task) fail("pipeline.target_range", "requires \"task\"");
      c.pipeline.target_range = range_from(*r, c.task->target, "pipeline.target_range");
    }
  }
  try {
    c.pipeline.validate();
  } catch (const Error& e) {
    fail("pipeline", e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::configuration, path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j, path.parent_path());
  c.config_path = path;
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = 1;
  j["manifest"] = c.manifest_path.generic_string();
  j["output_dir"] = c.output_dir.generic_string();
  j["seed"] = c.seed;
  if (c.task) j["task"] = {{"source", to_string(c.task->source)}, {"target", to_string(c.task->target)}};
  j["split"] = {{"test_fraction", c.split.test_fraction}, {"validation_count", c.split.validation_count}};
  const auto& p = c.pipeline;
  j["pipeline"] = {{"target_spacing", p.target_spacing},
                   {"source_threshold", p.source_threshold},
                   {"target_threshold", p.target_threshold},
                   {"pad_multiple", p.pad_multiple}};
  if (p.source_range) j["pipeline"]["source_range"] = range_json(*p.source_range);
  if (p.target_range) j["pipeline"]["target_range"] = range_json(*p.target_range);
  j["patch"] = {{"size", {c.patch.size.x, c.patch.size.y, c.patch.size.z}},
                {"overlap", c.patch.overlap},
                {"sigma_scale", c.patch.sigma_scale}};
  j["model"] = {{"name", c.model.name}, {"params", c.model.params}};
  j["suv_conversion"] = c.suv == SuvConversion::enhance ? "enhance" : "none";
  j["evaluation"] = {{"lesions", c.lesions}};
  return j;
}

}  // namespace voxbench::bench
