#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbench/genproc.hpp"
#include "voxbench/transform_record.hpp"
#include "voxbench/volume.hpp"

namespace voxbench {

enum class ModelFamily { gan_like, latent };
enum class OperatesOn { image_patch, latent };

struct ModelDescriptor {
  std::string name;
  ModelFamily family = ModelFamily::gan_like;
  OperatesOn operates_on = OperatesOn::image_patch;
  bool deterministic = true;
  bool thread_safe = true;  ///< false: the runner calls translate from one thread
};

/// Translates a source-modality patch into a target-modality patch of the
/// same dims. `origin` is the patch position in the padded volume.
class PatchModel {
 public:
  virtual ~PatchModel() = default;
  virtual const ModelDescriptor& descriptor() const = 0;
  virtual Patch translate(const Patch& source, const Index3& origin) const = 0;
};

std::shared_ptr<PatchModel> identity_model();

/// Constant patches: CT/CBCT targets get 0 HU mapped through the recorded
/// clip and normalization, other targets the normalized training mean (0).
std::shared_ptr<PatchModel> baseline_model(Modality target, const TransformRecord* target_record);
/// The normalized value a baseline model emits.
float baseline_value(Modality target, const TransformRecord* target_record);

enum class OracleKind { ddim, bridge, flow };
OracleKind parse_oracle_kind(std::string_view s);

/// Ground-truth target patch at a given origin.
using TargetProvider = std::function<Patch(const Index3& origin)>;

struct OracleOptions {
  int ddim_steps = 50;
  int bridge_steps = 200;
  int flow_steps = 64;
  std::uint64_t seed = 0;
};

/// encode -> sampler with an analytic oracle predictor -> decode. Recovers
/// toy_decode(toy_encode(target)) up to sampler round-off.
std::shared_ptr<PatchModel> oracle_latent_model(OracleKind kind, TargetProvider provider, OracleOptions opts = {});

/// Subprocess model. Each request and reply is an 8-byte little-endian byte
/// count followed by little-endian float32 voxels in x-fastest order.
class ExternalProcessModel final : public PatchModel {
 public:
  ExternalProcessModel(std::string name, std::vector<std::string> argv);
  ~ExternalProcessModel() override;
  ExternalProcessModel(const ExternalProcessModel&) = delete;
  ExternalProcessModel& operator=(const ExternalProcessModel&) = delete;

  const ModelDescriptor& descriptor() const override { return desc_; }
  Patch translate(const Patch& source, const Index3& origin) const override;

 private:
  ModelDescriptor desc_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::mutex mutex_;
};

struct ModelContext {
  Modality target_modality = Modality::CT;
  const TransformRecord* target_record = nullptr;
  TargetProvider target_provider;
  nlohmann::json params = nlohmann::json::object();
};

class ModelRegistry {
 public:
  using Factory = std::function<std::shared_ptr<PatchModel>(const ModelContext&)>;

  /// Throws conflict when the name is taken.
  void register_factory(const std::string& name, Factory factory);
  /// Registers a ready instance under its descriptor name.
  void register_model(std::shared_ptr<PatchModel> model);
  /// Throws lookup for unknown names.
  std::shared_ptr<PatchModel> get(std::string_view name, const ModelContext& ctx = {}) const;
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;

  /// identity, baseline, oracle-ddim, oracle-bridge, oracle-flow, external.
  static ModelRegistry with_builtins();

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

}  // namespace voxbench
