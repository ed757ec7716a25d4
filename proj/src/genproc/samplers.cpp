#include <cmath>

#include "voxbench/genproc.hpp"
#include "voxbench/random.hpp"

namespace voxbench {

std::string_view to_string(PredictionKind k) {
  switch (k) {
    case PredictionKind::noise: return "noise";
    case PredictionKind::target: return "target";
    case PredictionKind::velocity: return "velocity";
  }
  return "unknown";
}

namespace {

void require_kind(const Predictor& p, PredictionKind want) {
  if (p.kind() != want)
    throw Error(ErrorCode::contract, "sampler needs a " + std::string(to_string(want)) + " predictor, got " +
                                         std::string(to_string(p.kind())));
}

LatentTensor checked_predict(const Predictor& p, const LatentTensor& z, double t, const LatentTensor& cond) {
  LatentTensor out = p.predict(z, t, cond);
  if (!out.same_shape(z)) throw Error(ErrorCode::contract, "predictor changed the latent shape");
  return out;
}

class OracleNoise final : public Predictor {
 public:
  OracleNoise(LatentTensor z0, const NoiseSchedule& s) : z0_(std::move(z0)), abar_(s.alpha_bars) {}
  PredictionKind kind() const override { return PredictionKind::noise; }
  LatentTensor predict(const LatentTensor& z, double t, const LatentTensor&) const override {
    const double ab = abar_.at(static_cast<std::size_t>(t));
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    LatentTensor eps = z;
    for (std::size_t i = 0; i < z.size(); ++i) eps.values[i] = (z.values[i] - a * z0_.values[i]) / b;
    return eps;
  }

 private:
  LatentTensor z0_;
  std::vector<double> abar_;
};

}  // namespace

std::unique_ptr<Predictor> oracle_noise_predictor(LatentTensor z0, const NoiseSchedule& s) {
  return std::make_unique<OracleNoise>(std::move(z0), s);
}

std::unique_ptr<Predictor> oracle_target_predictor(LatentTensor z0) {
  return std::make_unique<FunctionPredictor>(
      PredictionKind::target, [z0 = std::move(z0)](const LatentTensor&, double, const LatentTensor&) { return z0; });
}

std::unique_ptr<Predictor> constant_velocity_predictor(LatentTensor v) {
  return std::make_unique<FunctionPredictor>(
      PredictionKind::velocity, [v = std::move(v)](const LatentTensor&, double, const LatentTensor&) { return v; });
}

std::vector<int> ddim_timesteps(int T, int steps) {
  if (T < 1) throw Error(ErrorCode::parameter, "T must be >= 1");
  if (steps < 1 || steps > T) throw Error(ErrorCode::parameter, "steps must lie in [1, T]");
  if (steps == 1) return {T - 1};
  std::vector<int> ts(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k)
    ts[static_cast<std::size_t>(steps - 1 - k)] =
        static_cast<int>(std::lround(static_cast<double>(k) * (T - 1) / (steps - 1)));
  return ts;
}

LatentTensor ddim_sample(const LatentTensor& condition, const Predictor& predictor, const NoiseSchedule& s, int steps,
                         std::uint64_t seed) {
  require_kind(predictor, PredictionKind::noise);
  const std::vector<int> ts = ddim_timesteps(s.T, steps);
  LatentTensor z = gaussian_latent(condition.spatial, condition.channels, seed);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
    const double ab_prev = k + 1 < ts.size() ? s.alpha_bars[static_cast<std::size_t>(ts[k + 1])] : 1.0;
    const LatentTensor eps = checked_predict(predictor, z, t, condition);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    const double sa_prev = std::sqrt(ab_prev), sb_prev = std::sqrt(1.0 - ab_prev);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double x0 = (z.values[i] - sb * eps.values[i]) / sa;
      z.values[i] = sa_prev * x0 + sb_prev * eps.values[i];
    }
  }
  return z;
}

LatentTensor bridge_sample(const LatentTensor& z_y, const Predictor& predictor, const BridgeSchedule& s, int steps,
                           std::uint64_t seed, bool stochastic, const StepObserver& observer) {
  require_kind(predictor, PredictionKind::target);
  const std::vector<int> ts = ddim_timesteps(s.T, steps);
  Rng rng(seed);
  LatentTensor z = z_y;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (observer) observer(ts[k], z);
    LatentTensor z0_hat = checked_predict(predictor, z, ts[k], z_y);
    if (k + 1 == ts.size()) return z0_hat;
    const auto next = static_cast<std::size_t>(ts[k + 1]);
    if (stochastic) {
      LatentTensor eps(z.spatial, z.channels);
      for (double& v : eps.values) v = rng.normal();
      z = bridge_mix(z0_hat, z_y, s.m[next], std::sqrt(s.sigma2[next]), &eps);
    } else {
      z = bridge_mix(z0_hat, z_y, s.m[next], 0.0, nullptr);
    }
  }
  return z;
}

LatentTensor flow_sample(const LatentTensor& z_src, const Predictor& predictor, int steps) {
  require_kind(predictor, PredictionKind::velocity);
  if (steps < 1) throw Error(ErrorCode::parameter, "flow_sample needs steps >= 1");
  const double dt = 1.0 / steps;
  LatentTensor z = z_src;
  for (int k = 0; k < steps; ++k) {
    const LatentTensor v = checked_predict(predictor, z, static_cast<double>(k) / steps, z_src);
    for (std::size_t i = 0; i < z.size(); ++i) z.values[i] += dt * v.values[i];
  }
  return z;
}

}  // namespace voxbench
