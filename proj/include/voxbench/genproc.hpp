#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "voxbench/volume.hpp"

namespace voxbench {

/// Channel-major latent: value(c, x, y, z) = values[c * spatial.count() + spatial index].
struct LatentTensor {
  Dims spatial;
  int channels = 0;
  std::vector<double> values;

  LatentTensor() = default;
  LatentTensor(Dims spatial_dims, int n_channels, double fill = 0.0);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t channel_size() const noexcept { return spatial.count(); }
  double* channel(int c) noexcept { return values.data() + static_cast<std::size_t>(c) * channel_size(); }
  const double* channel(int c) const noexcept { return values.data() + static_cast<std::size_t>(c) * channel_size(); }
  bool same_shape(const LatentTensor& o) const noexcept { return spatial == o.spatial && channels == o.channels; }
  friend bool operator==(const LatentTensor&, const LatentTensor&) = default;
};

inline constexpr int kLatentFactor = 4;
inline constexpr int kLatentChannels = 3;

/// Stand-in autoencoder: factor^3 average pooling replicated into `channels`.
LatentTensor toy_encode(const Patch& patch, int channels = kLatentChannels, int factor = kLatentFactor);
/// Channel mean, nearest-neighbour upsampled by `factor`.
Patch toy_decode(const LatentTensor& z, int factor = kLatentFactor);
/// Stacks b's channels after a's.
LatentTensor concat_channels(const LatentTensor& a, const LatentTensor& b);

LatentTensor gaussian_latent(const Dims& spatial, int channels, std::uint64_t seed);

struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
};

NoiseSchedule make_scaled_linear_schedule(double beta_start = 0.0015, double beta_end = 0.0205, int T = 1000);

struct BridgeSchedule {
  int T = 0;
  std::vector<double> m;
  std::vector<double> sigma2;
};

BridgeSchedule make_bridge_schedule(int T = 1000, double m_min = 0.001, double m_max = 0.999);

void write_schedule_csv(const NoiseSchedule& s, const std::filesystem::path& path);
void write_schedule_csv(const BridgeSchedule& s, const std::filesystem::path& path);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
LatentTensor ddpm_forward(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& s);
/// z_t = (1 - m_t) z0 + m_t z_y + sigma_t eps
LatentTensor bridge_forward(const LatentTensor& z0, const LatentTensor& z_y, int t, const LatentTensor& eps,
                            const BridgeSchedule& s);
LatentTensor bridge_mix(const LatentTensor& z0, const LatentTensor& z_y, double m, double sigma,
                        const LatentTensor* eps);

/// Straight-path pair: z_t = (1 - t) z_src + t z_tgt, v = z_tgt - z_src.
std::pair<LatentTensor, LatentTensor> flow_matching_target(const LatentTensor& z_src, const LatentTensor& z_tgt,
                                                           double t);

enum class PredictionKind { noise, target, velocity };
std::string_view to_string(PredictionKind k);

/// `t` is a schedule index for noise/target predictors and a time in [0, 1)
/// for velocity predictors.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictionKind kind() const = 0;
  virtual LatentTensor predict(const LatentTensor& z, double t, const LatentTensor& condition) const = 0;
};

using PredictFn = std::function<LatentTensor(const LatentTensor& z, double t, const LatentTensor& condition)>;

class FunctionPredictor final : public Predictor {
 public:
  FunctionPredictor(PredictionKind kind, PredictFn fn) : kind_(kind), fn_(std::move(fn)) {}
  PredictionKind kind() const override { return kind_; }
  LatentTensor predict(const LatentTensor& z, double t, const LatentTensor& c) const override { return fn_(z, t, c); }

 private:
  PredictionKind kind_;
  PredictFn fn_;
};

/// eps_hat(z_t, t) = (z_t - sqrt(abar_t) z0*) / sqrt(1 - abar_t)
std::unique_ptr<Predictor> oracle_noise_predictor(LatentTensor z0, const NoiseSchedule& s);
/// z0_hat = z0*
std::unique_ptr<Predictor> oracle_target_predictor(LatentTensor z0);
/// v_hat = z_tgt - z_src, independent of z and t
std::unique_ptr<Predictor> constant_velocity_predictor(LatentTensor v);

/// Evenly spaced timesteps from T-1 down to 0; a single step is {T-1}.
std::vector<int> ddim_timesteps(int T, int steps);

using StepObserver = std::function<void(int t, const LatentTensor& z)>;

/// Deterministic (eta = 0) DDIM from seeded Gaussian noise shaped like
/// `condition`.
LatentTensor ddim_sample(const LatentTensor& condition, const Predictor& predictor, const NoiseSchedule& s,
                         int steps = 50, std::uint64_t seed = 0);

/// Reverse bridge from z_y: at each step z0_hat is predicted and re-bridged
/// to the next timestep; the final z0_hat is returned. The observer sees the
/// state entering each step.
LatentTensor bridge_sample(const LatentTensor& z_y, const Predictor& predictor, const BridgeSchedule& s,
                           int steps = 200, std::uint64_t seed = 0, bool stochastic = false,
                           const StepObserver& observer = {});

/// Explicit Euler on the predicted velocity field, t_k = k / steps.
LatentTensor flow_sample(const LatentTensor& z_src, const Predictor& predictor, int steps);

}  // namespace voxbench
