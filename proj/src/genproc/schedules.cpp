#include <cmath>
#include <fstream>

#include "voxbench/csv.hpp"
#include "voxbench/genproc.hpp"

namespace voxbench {

NoiseSchedule make_scaled_linear_schedule(double beta_start, double beta_end, int T) {
  if (T < 1) throw Error(ErrorCode::parameter, "T must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0 && beta_end > 0.0 && beta_end < 1.0) ||
      (T > 1 && !(beta_start < beta_end)))
    throw Error(ErrorCode::parameter, "require 0 < beta_start < beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  const double a = std::sqrt(beta_start), b = std::sqrt(beta_end);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    double beta;
    if (t == 0) {
      beta = beta_start;
    } else if (t == T - 1) {
      beta = beta_end;
    } else {
      const double r = a + (static_cast<double>(t) / (T - 1)) * (b - a);
      beta = r * r;
    }
    s.betas[t] = beta;
    s.alphas[t] = 1.0 - beta;
    prod *= s.alphas[t];
    s.alpha_bars[t] = prod;
  }
  return s;
}

BridgeSchedule make_bridge_schedule(int T, double m_min, double m_max) {
  if (T < 2) throw Error(ErrorCode::parameter, "bridge schedule needs T >= 2");
  if (!(m_min >= 0.0 && m_min < m_max && m_max <= 1.0)) throw Error(ErrorCode::parameter, "require 0 <= m_min < m_max <= 1");
  BridgeSchedule s;
  s.T = T;
  s.m.resize(T);
  s.sigma2.resize(T);
  for (int t = 0; t < T; ++t) {
    const double m = m_min + static_cast<double>(t) * (m_max - m_min) / (T - 1);
    s.m[t] = m;
    s.sigma2[t] = 2.0 * (m - m * m);
  }
  return s;
}

void write_schedule_csv(const NoiseSchedule& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "t,beta,alpha_bar\n";
  for (int t = 0; t < s.T; ++t)
    out << csv_line({std::to_string(t), format_double(s.betas[t]), format_double(s.alpha_bars[t])}) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

void write_schedule_csv(const BridgeSchedule& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "t,m,sigma2\n";
  for (int t = 0; t < s.T; ++t)
    out << csv_line({std::to_string(t), format_double(s.m[t]), format_double(s.sigma2[t])}) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

LatentTensor ddpm_forward(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& s) {
  if (t < 0 || t >= s.T) throw Error(ErrorCode::index, "timestep " + std::to_string(t) + " outside schedule");
  if (!z0.same_shape(eps)) throw Error(ErrorCode::shape, "z0 and eps shapes differ");
  const double a = std::sqrt(s.alpha_bars[t]), b = std::sqrt(1.0 - s.alpha_bars[t]);
  LatentTensor out = z0;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = a * z0.values[i] + b * eps.values[i];
  return out;
}

LatentTensor bridge_mix(const LatentTensor& z0, const LatentTensor& z_y, double m, double sigma,
                        const LatentTensor* eps) {
  if (!z0.same_shape(z_y) || (eps && !z0.same_shape(*eps))) throw Error(ErrorCode::shape, "latent shapes differ");
  LatentTensor out = z0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = (1.0 - m) * z0.values[i] + m * z_y.values[i];
    if (eps) v += sigma * eps->values[i];
    out.values[i] = v;
  }
  return out;
}

LatentTensor bridge_forward(const LatentTensor& z0, const LatentTensor& z_y, int t, const LatentTensor& eps,
                            const BridgeSchedule& s) {
  if (t < 0 || t >= s.T) throw Error(ErrorCode::index, "timestep " + std::to_string(t) + " outside schedule");
  return bridge_mix(z0, z_y, s.m[t], std::sqrt(s.sigma2[t]), &eps);
}

}  // namespace voxbench
