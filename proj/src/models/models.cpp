#include <algorithm>
#include <cmath>

#include "voxbench/models.hpp"

namespace voxbench {

namespace {

class IdentityModel final : public PatchModel {
 public:
  const ModelDescriptor& descriptor() const override { return desc_; }
  Patch translate(const Patch& source, const Index3&) const override { return source; }

 private:
  ModelDescriptor desc_{"identity", ModelFamily::gan_like, OperatesOn::image_patch, true, true};
};

class ConstantModel final : public PatchModel {
 public:
  ConstantModel(std::string name, float value)
      : desc_{std::move(name), ModelFamily::gan_like, OperatesOn::image_patch, true, true}, value_(value) {}
  const ModelDescriptor& descriptor() const override { return desc_; }
  Patch translate(const Patch& source, const Index3&) const override { return Patch(source.dims(), value_); }

 private:
  ModelDescriptor desc_;
  float value_;
};

class OracleLatentModel final : public PatchModel {
 public:
  OracleLatentModel(OracleKind kind, TargetProvider provider, OracleOptions opts)
      : kind_(kind), provider_(std::move(provider)), opts_(opts), ddim_(make_scaled_linear_schedule()),
        bridge_(make_bridge_schedule()) {
    static const char* names[] = {"oracle-ddim", "oracle-bridge", "oracle-flow"};
    desc_ = ModelDescriptor{names[static_cast<int>(kind)], ModelFamily::latent, OperatesOn::latent, true, true};
  }
  const ModelDescriptor& descriptor() const override { return desc_; }

  Patch translate(const Patch& source, const Index3& origin) const override {
    const Patch target = provider_(origin);
    if (!(target.dims() == source.dims())) throw Error(ErrorCode::shape, "target provider returned wrong dims");
    const LatentTensor z_src = toy_encode(source);
    const LatentTensor z_tgt = toy_encode(target);
    // Per-patch seed so results do not depend on evaluation order.
    const std::uint64_t seed = opts_.seed ^ (static_cast<std::uint64_t>(origin.x) * 0x9E3779B97F4A7C15ULL) ^
                               (static_cast<std::uint64_t>(origin.y) * 0xC2B2AE3D27D4EB4FULL) ^
                               (static_cast<std::uint64_t>(origin.z) * 0x165667B19E3779F9ULL);
    LatentTensor z;
    switch (kind_) {
      case OracleKind::ddim:
        z = ddim_sample(z_src, *oracle_noise_predictor(z_tgt, ddim_), ddim_, opts_.ddim_steps, seed);
        break;
      case OracleKind::bridge:
        z = bridge_sample(z_src, *oracle_target_predictor(z_tgt), bridge_, opts_.bridge_steps, seed);
        break;
      case OracleKind::flow: {
        LatentTensor v = flow_matching_target(z_src, z_tgt, 0.0).second;
        z = flow_sample(z_src, *constant_velocity_predictor(std::move(v)), opts_.flow_steps);
        break;
      }
    }
    return toy_decode(z);
  }

 private:
  OracleKind kind_;
  TargetProvider provider_;
  OracleOptions opts_;
  NoiseSchedule ddim_;
  BridgeSchedule bridge_;
  ModelDescriptor desc_;
};

}  // namespace

std::shared_ptr<PatchModel> identity_model() { return std::make_shared<IdentityModel>(); }

float baseline_value(Modality target, const TransformRecord* record) {
  if (record == nullptr) throw Error(ErrorCode::configuration, "baseline model needs the target transform record");
  const NormalizeStep* norm = record->find<NormalizeStep>();
  if (norm == nullptr) throw Error(ErrorCode::configuration, "target record has no normalization step");
  if (!is_ct_like(target)) return 0.0f;
  double water = 0.0;
  if (const ClipStep* clip = record->find<ClipStep>(); clip && clip->applied)
    water = std::clamp(water, clip->low, clip->high);
  return static_cast<float>((water - norm->mean) / norm->std);
}

std::shared_ptr<PatchModel> baseline_model(Modality target, const TransformRecord* record) {
  return std::make_shared<ConstantModel>("baseline", baseline_value(target, record));
}

OracleKind parse_oracle_kind(std::string_view s) {
  if (s == "ddim") return OracleKind::ddim;
  if (s == "bridge") return OracleKind::bridge;
  if (s == "flow") return OracleKind::flow;
  throw Error(ErrorCode::parameter, "unknown oracle kind: " + std::string(s));
}

std::shared_ptr<PatchModel> oracle_latent_model(OracleKind kind, TargetProvider provider, OracleOptions opts) {
  if (!provider) throw Error(ErrorCode::configuration, "oracle model needs a target provider");
  return std::make_shared<OracleLatentModel>(kind, std::move(provider), opts);
}

void ModelRegistry::register_factory(const std::string& name, Factory factory) {
  if (name.empty()) throw Error(ErrorCode::parameter, "model name must not be empty");
  if (!factories_.emplace(name, std::move(factory)).second)
    throw Error(ErrorCode::conflict, "model already registered: " + name);
}

void ModelRegistry::register_model(std::shared_ptr<PatchModel> model) {
  if (!model) throw Error(ErrorCode::parameter, "null model");
  const std::string name = model->descriptor().name;
  register_factory(name, [model = std::move(model)](const ModelContext&) { return model; });
}

std::shared_ptr<PatchModel> ModelRegistry::get(std::string_view name, const ModelContext& ctx) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw Error(ErrorCode::lookup, "unknown model: " + std::string(name));
  return it->second(ctx);
}

bool ModelRegistry::contains(std::string_view name) const { return factories_.find(name) != factories_.end(); }

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

ModelRegistry ModelRegistry::with_builtins() {
  ModelRegistry r;
  r.register_factory("identity", [](const ModelContext&) { return identity_model(); });
  r.register_factory("baseline",
                     [](const ModelContext& c) { return baseline_model(c.target_modality, c.target_record); });
  for (const char* kind : {"ddim", "bridge", "flow"}) {
    r.register_factory(std::string("oracle-") + kind, [kind](const ModelContext& c) {
      OracleOptions o;
      o.ddim_steps = c.params.value("ddim_steps", o.ddim_steps);
      o.bridge_steps = c.params.value("bridge_steps", o.bridge_steps);
      o.flow_steps = c.params.value("flow_steps", o.flow_steps);
      o.seed = c.params.value("seed", o.seed);
      return oracle_latent_model(parse_oracle_kind(kind), c.target_provider, o);
    });
  }
  r.register_factory("external", [](const ModelContext& c) -> std::shared_ptr<PatchModel> {
    if (!c.params.contains("command") || !c.params["command"].is_array() || c.params["command"].empty())
      throw Error(ErrorCode::configuration, "external model needs params.command as a non-empty array");
    return std::make_shared<ExternalProcessModel>(c.params.value("name", std::string("external")),
                                                  c.params["command"].get<std::vector<std::string>>());
  });
  return r;
}

}  // namespace voxbench
