#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxbench/error.hpp"

namespace voxbench {

using Vec3 = std::array<double, 3>;
/// Row-major 3x3; column j is the world direction of voxel axis j.
using Mat3 = std::array<double, 9>;

constexpr Mat3 identity_direction() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

struct Dims {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  constexpr std::size_t count() const noexcept {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  constexpr std::int64_t operator[](int axis) const noexcept { return axis == 0 ? x : axis == 1 ? y : z; }
  constexpr bool positive() const noexcept { return x > 0 && y > 0 && z > 0; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  constexpr std::int64_t operator[](int axis) const noexcept { return axis == 0 ? x : axis == 1 ? y : z; }
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
  friend constexpr auto operator<=>(const Index3& a, const Index3& b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.z <=> b.z;
  }
};

std::string to_string(const Dims& d);

/// Dense x-fastest 3D array.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(checked_count(dims), fill) {}
  Grid3(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_count(dims))
      throw Error(ErrorCode::shape, "voxel count " + std::to_string(data_.size()) +
                                        " does not match dims " + to_string(dims));
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_.x) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(z));
  }
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.x && y < dims_.y && z < dims_.z;
  }

  T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) noexcept { return data_[index(x, y, z)]; }
  const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  /// Contiguous x-run starting at (0, y, z).
  std::span<T> row(std::int64_t y, std::int64_t z) noexcept {
    return std::span<T>(data_).subspan(index(0, y, z), static_cast<std::size_t>(dims_.x));
  }
  std::span<const T> row(std::int64_t y, std::int64_t z) const noexcept {
    return std::span<const T>(data_).subspan(index(0, y, z), static_cast<std::size_t>(dims_.x));
  }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  static std::size_t checked_count(const Dims& d) {
    if (d.x < 0 || d.y < 0 || d.z < 0) throw Error(ErrorCode::shape, "negative dims " + to_string(d));
    return d.count();
  }

  Dims dims_{};
  std::vector<T> data_;
};

using Patch = Grid3<float>;
using Mask = Grid3<std::uint8_t>;

std::size_t count(const Mask& mask);
Mask full_mask(Dims dims);
Mask empty_mask(Dims dims);

enum class Modality { CT, CBCT, MRI_T1w, MRI_T2w, MRI_T2f, PET };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);
inline bool is_ct_like(Modality m) { return m == Modality::CT || m == Modality::CBCT; }
inline bool is_mri(Modality m) {
  return m == Modality::MRI_T1w || m == Modality::MRI_T2w || m == Modality::MRI_T2f;
}

struct Geometry {
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  Mat3 direction = identity_direction();

  /// World position (mm) of a continuous voxel index.
  Vec3 world(const Vec3& index) const;
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Checks spacing > 0 and |D*D^T - I|_inf < 1e-6.
void validate_geometry(const Geometry& g);

/// A scalar image with physical geometry. Immutable after construction.
class Volume {
 public:
  Volume() = default;
  Volume(Grid3<float> voxels, Geometry geometry, Modality modality);

  const Dims& dims() const noexcept { return voxels_.dims(); }
  const Geometry& geometry() const noexcept { return geometry_; }
  const Vec3& spacing() const noexcept { return geometry_.spacing; }
  Modality modality() const noexcept { return modality_; }
  const Grid3<float>& voxels() const noexcept { return voxels_; }
  std::span<const float> values() const noexcept { return voxels_.values(); }
  float operator()(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept { return voxels_(x, y, z); }

  Volume with_voxels(Grid3<float> voxels) const;
  Volume with_geometry(Geometry geometry) const;
  Volume with_modality(Modality modality) const;

 private:
  Grid3<float> voxels_;
  Geometry geometry_;
  Modality modality_ = Modality::CT;
};

}  // namespace voxbench
