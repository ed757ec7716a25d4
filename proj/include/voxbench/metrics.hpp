#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbench/volume.hpp"

namespace voxbench {

/// CT/CBCT: 4024 (clip width in HU). PET: 20 (SUV clip width).
/// MRI: max - min of the reference.
double data_range_for(Modality m, const Volume& ref);

/// 10 log10(R^2 / MSE); +inf when MSE is 0. With a mask, MSE is taken
/// over the masked voxels only.
double psnr(const Volume& pred, const Volume& ref, double data_range, const Mask* mask = nullptr);

struct SsimOptions {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

std::vector<double> gaussian_taps(int window, double sigma);

/// Valid-mode SSIM map; entry (i, j, k) belongs to voxel (i, j, k) + window/2.
Grid3<double> ssim_map(const Volume& pred, const Volume& ref, double data_range, const SsimOptions& opts = {});
/// Mean of the SSIM map, or its mean over voxels whose mask bit is set.
double ssim3d(const Volume& pred, const Volume& ref, double data_range, const Mask* mask = nullptr,
              const SsimOptions& opts = {});

/// sum (pred - ref)^2 / sum ref^2
double nmse(const Volume& pred, const Volume& ref);

/// pred - ref on pred's geometry.
Volume error_map(const Volume& pred, const Volume& ref);

/// Linear-interpolation quantile of sorted data (p in [0, 1]).
double quantile_sorted(const std::vector<double>& sorted, double p);

struct Summary {
  std::size_t n = 0;         ///< finite values used
  std::size_t excluded = 0;  ///< infinities and NaNs dropped
  double mean = 0.0;
  double std = 0.0;  ///< population
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double iqr() const { return q75 - q25; }
};

/// Throws cardinality when no finite value remains.
Summary summarize(const std::vector<double>& values);
nlohmann::json to_json(const Summary& s);

struct MetricRow {
  std::string subject_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double nmse = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  Summary psnr;
  Summary ssim;
  Summary nmse;
};

MetricRow evaluate_pair(const std::string& subject_id, const Volume& pred, const Volume& ref, double data_range);
/// Sorts rows by subject id and aggregates. A metric with no finite value
/// gets n = 0 and NaN statistics.
MetricReport make_report(std::vector<MetricRow> rows);
std::string metrics_csv(const MetricReport& r);
nlohmann::json aggregate_json(const MetricReport& r);

// Lesion level

struct Components {
  Grid3<std::int32_t> labels;  ///< 0 = background, 1..n in scan order
  std::vector<std::size_t> sizes;  ///< sizes[k] = voxel count of label k + 1
};

/// 26-connected components of a binary mask.
Components connected_components(const Mask& mask);

enum class SizeGroup { small, medium, large };
std::string_view to_string(SizeGroup g);

/// 2 (3V / 4 pi)^(1/3) with V = voxels * sx * sy * sz.
double equivalent_diameter(std::size_t voxels, const Vec3& spacing);

struct Box {
  Index3 lo;  ///< inclusive
  Index3 hi;  ///< inclusive
};

struct LesionRecord {
  std::string subject_id;
  int lesion_id = 0;
  std::size_t voxel_count = 0;
  double diameter_mm = 0.0;
  SizeGroup size_group = SizeGroup::small;
  double psnr_db = 0.0;
  double ssim = 0.0;
  Box box;  ///< one-voxel-dilated bounding box
};

/// Per-component records. PSNR is taken over the dilated bounding box and
/// SSIM averages the whole-volume SSIM map over the same box. Size groups
/// are tertiles within the returned list.
std::vector<LesionRecord> lesion_analysis(const Volume& pred, const Volume& ref, const Mask& lesions,
                                          double data_range, const SsimOptions& opts = {});

/// Tertile cut points of the diameters; d <= q(1/3) small, d <= q(2/3)
/// medium, else large.
void assign_size_groups(std::vector<LesionRecord>& records);
std::string lesions_csv(const std::vector<LesionRecord>& records);

}  // namespace voxbench
