#include <atomic>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/genproc.hpp"
#include "voxbench/models.hpp"
#include "voxbench/patching.hpp"

using namespace voxbench;
using testutil::error_code_of;

namespace {

TransformRecord record_with(double mean, double std, bool clip) {
  TransformRecord r;
  r.modality = Modality::CT;
  r.steps.emplace_back(ClipStep{clip, -1024, 3000});
  r.steps.emplace_back(NormalizeStep{mean, std});
  return r;
}

class CountingModel final : public PatchModel {
 public:
  const ModelDescriptor& descriptor() const override { return desc_; }
  Patch translate(const Patch& p, const Index3&) const override {
    ++calls;
    return p;
  }
  mutable std::atomic<int> calls{0};

 private:
  ModelDescriptor desc_{"counting"};
};

}  // namespace

TEST_CASE("identity model") {
  const auto m = identity_model();
  const Patch p = testutil::random_grid(Dims{4, 4, 4}, 1);
  CHECK(m->translate(p, {}).vector() == p.vector());
  CHECK(m->descriptor().name == "identity");
  CHECK(m->descriptor().deterministic);
}

TEST_CASE("baseline model emits water or the mean") {
  const TransformRecord rec = record_with(-300.0, 500.0, true);
  CHECK(baseline_value(Modality::CT, &rec) == doctest::Approx(0.6));
  const auto m = baseline_model(Modality::CT, &rec);
  const Patch out = m->translate(Patch(Dims{3, 3, 3}, 9.0f), {});
  for (float v : out.values()) CHECK(v == doctest::Approx(0.6));
  CHECK(baseline_value(Modality::PET, &rec) == 0.0f);
  CHECK(error_code_of([] { (void)baseline_value(Modality::CT, nullptr); }) == ErrorCode::configuration);
  TransformRecord empty;
  CHECK(error_code_of([&] { (void)baseline_value(Modality::CT, &empty); }) == ErrorCode::configuration);
}

TEST_CASE("registry") {
  ModelRegistry r = ModelRegistry::with_builtins();
  for (const char* n : {"identity", "baseline", "oracle-ddim", "oracle-bridge", "oracle-flow", "external"})
    CHECK(r.contains(n));
  CHECK(error_code_of([&] { (void)r.get("nope"); }) == ErrorCode::lookup);
  CHECK(error_code_of([&] { r.register_factory("identity", [](const ModelContext&) { return identity_model(); }); }) ==
        ErrorCode::conflict);
  auto counting = std::make_shared<CountingModel>();
  r.register_model(counting);
  CHECK(r.get("counting").get() == counting.get());
  CHECK(error_code_of([&] { r.register_model(counting); }) == ErrorCode::conflict);
  const auto names = r.names();
  CHECK(std::is_sorted(names.begin(), names.end()));
  CHECK(error_code_of([&] { (void)r.get("external"); }) == ErrorCode::configuration);
  CHECK(parse_oracle_kind("flow") == OracleKind::flow);
  CHECK(error_code_of([] { (void)parse_oracle_kind("gan"); }) == ErrorCode::parameter);
}

TEST_CASE("oracle latent models recover the decoded target") {
  const Dims pd{16, 16, 16};
  const Grid3<float> target_vol = testutil::random_grid(Dims{32, 32, 32}, 21, -1, 1);
  const Grid3<float> source_vol = testutil::random_grid(Dims{32, 32, 32}, 22, -1, 1);
  const TargetProvider provider = [&](const Index3& o) { return extract_patch(target_vol, o, pd); };
  const Index3 origin{16, 0, 8};
  const Patch expect = toy_decode(toy_encode(provider(origin)));
  const Patch src = extract_patch(source_vol, origin, pd);
  struct Case {
    OracleKind kind;
    float tol;
  };
  for (Case c : {Case{OracleKind::ddim, 1e-4f}, Case{OracleKind::bridge, 1e-5f}, Case{OracleKind::flow, 0.0f}}) {
    OracleOptions opts;
    opts.ddim_steps = 20;
    opts.bridge_steps = 40;
    const auto model = oracle_latent_model(c.kind, provider, opts);
    CHECK(model->descriptor().family == ModelFamily::latent);
    const Patch out = model->translate(src, origin);
    float worst = 0;
    for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out[i] - expect[i]));
    CHECK(worst <= c.tol);
    CHECK(model->translate(src, origin).vector() == out.vector());
  }
}

#ifdef VOXBENCH_ECHO_MODEL
TEST_CASE("external process model") {
  ExternalProcessModel m("echo", {VOXBENCH_ECHO_MODEL});
  CHECK_FALSE(m.descriptor().thread_safe);
  const Patch p = testutil::random_grid(Dims{5, 4, 3}, 2);
  for (int round = 0; round < 3; ++round) {
    const Patch out = m.translate(p, {});
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(out[i] == 2.0f * p[i] + 1.0f);
  }
  ModelContext ctx;
  ctx.params = {{"command", {VOXBENCH_ECHO_MODEL}}, {"name", "echo2"}};
  const auto via_registry = ModelRegistry::with_builtins().get("external", ctx);
  CHECK(via_registry->descriptor().name == "echo2");
  CHECK(via_registry->translate(p, {})[0] == 2.0f * p[0] + 1.0f);

  ExternalProcessModel shorty("short", {VOXBENCH_ECHO_MODEL, "short"});
  CHECK(error_code_of([&] { (void)shorty.translate(p, {}); }) == ErrorCode::contract);

  CHECK_THROWS_AS(ExternalProcessModel("missing", {"/nonexistent/model-binary"}).translate(p, {}), Error);
}
#endif
