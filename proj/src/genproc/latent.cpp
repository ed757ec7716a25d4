#include "voxbench/genproc.hpp"

#include "voxbench/random.hpp"

namespace voxbench {

LatentTensor::LatentTensor(Dims spatial_dims, int n_channels, double fill)
    : spatial(spatial_dims), channels(n_channels) {
  if (!spatial.positive() || n_channels < 1) throw Error(ErrorCode::shape, "latent dims must be positive");
  values.assign(spatial.count() * static_cast<std::size_t>(n_channels), fill);
}

LatentTensor toy_encode(const Patch& patch, int channels, int factor) {
  const Dims& d = patch.dims();
  if (factor < 1 || channels < 1) throw Error(ErrorCode::parameter, "factor and channels must be positive");
  if (d.x % factor || d.y % factor || d.z % factor || !d.positive())
    throw Error(ErrorCode::shape, "patch dims " + to_string(d) + " not divisible by " + std::to_string(factor));
  const Dims ld{d.x / factor, d.y / factor, d.z / factor};
  LatentTensor z(ld, channels);
  const double inv = 1.0 / static_cast<double>(factor * factor * factor);
  Grid3<double> pooled(ld);
  for (std::int64_t zz = 0; zz < d.z; ++zz)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) pooled(x / factor, y / factor, zz / factor) += patch(x, y, zz);
  for (int c = 0; c < channels; ++c) {
    double* dst = z.channel(c);
    for (std::size_t i = 0; i < pooled.size(); ++i) dst[i] = pooled[i] * inv;
  }
  return z;
}

Patch toy_decode(const LatentTensor& z, int factor) {
  if (factor < 1) throw Error(ErrorCode::parameter, "factor must be positive");
  if (z.channels < 1 || z.values.size() != z.channel_size() * static_cast<std::size_t>(z.channels))
    throw Error(ErrorCode::shape, "malformed latent tensor");
  const Dims& ld = z.spatial;
  Grid3<double> mean(ld);
  for (int c = 0; c < z.channels; ++c) {
    const double* src = z.channel(c);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += src[i];
  }
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] /= z.channels;
  Patch out(Dims{ld.x * factor, ld.y * factor, ld.z * factor});
  for (std::int64_t zz = 0; zz < out.dims().z; ++zz)
    for (std::int64_t y = 0; y < out.dims().y; ++y)
      for (std::int64_t x = 0; x < out.dims().x; ++x)
        out(x, y, zz) = static_cast<float>(mean(x / factor, y / factor, zz / factor));
  return out;
}

LatentTensor concat_channels(const LatentTensor& a, const LatentTensor& b) {
  if (!(a.spatial == b.spatial)) throw Error(ErrorCode::shape, "latent spatial dims differ");
  LatentTensor out(a.spatial, a.channels + b.channels);
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.values.size()));
  return out;
}

LatentTensor gaussian_latent(const Dims& spatial, int channels, std::uint64_t seed) {
  LatentTensor z(spatial, channels);
  Rng rng(seed);
  for (double& v : z.values) v = rng.normal();
  return z;
}

std::pair<LatentTensor, LatentTensor> flow_matching_target(const LatentTensor& z_src, const LatentTensor& z_tgt,
                                                           double t) {
  if (!z_src.same_shape(z_tgt)) throw Error(ErrorCode::shape, "latent shapes differ");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::parameter, "t must lie in [0, 1]");
  LatentTensor zt = z_src, v = z_src;
  for (std::size_t i = 0; i < z_src.size(); ++i) {
    v.values[i] = z_tgt.values[i] - z_src.values[i];
    zt.values[i] = (1.0 - t) * z_src.values[i] + t * z_tgt.values[i];
  }
  return {std::move(zt), std::move(v)};
}

}  // namespace voxbench
