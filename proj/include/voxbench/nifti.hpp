#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxbench/volume.hpp"

namespace voxbench {

/// Reads a single-file NIfTI-1 image (.nii or gzip-compressed .nii.gz).
/// Geometry comes from the sform when sform_code > 0, otherwise the qform,
/// otherwise pixdim with an identity direction. Voxels are converted to
/// float with scl_slope/scl_inter applied. Either header byte order is
/// accepted.
Volume read_nifti(const std::filesystem::path& path, Modality modality = Modality::CT);
Volume decode_nifti(std::span<const std::uint8_t> bytes, Modality modality = Modality::CT);

/// Writes little-endian float32 NIfTI-1; gzip-compressed when the path ends
/// in ".gz". Output is byte-deterministic.
void write_nifti(const Volume& vol, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_nifti(const Volume& vol);

/// Masks are stored as uint8 NIfTI images on the volume's grid.
void write_mask_nifti(const Mask& mask, const Geometry& geometry, const std::filesystem::path& path);
Mask read_mask_nifti(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

}  // namespace voxbench
