#pragma once

namespace voxbench::simd {

// Shared by every variant so the per-voxel SSIM expression has one
// evaluation order.
inline double ssim_value(double mu_a, double mu_b, double e_aa, double e_bb, double e_ab, double c1, double c2) {
  const double var_a = e_aa - mu_a * mu_a;
  const double var_b = e_bb - mu_b * mu_b;
  const double cov = e_ab - mu_a * mu_b;
  const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
  const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
  return num / den;
}

}  // namespace voxbench::simd
