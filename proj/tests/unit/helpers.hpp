#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "voxbench/random.hpp"
#include "voxbench/volume.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("voxbench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline voxbench::Grid3<float> random_grid(voxbench::Dims d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  voxbench::Rng rng(seed);
  voxbench::Grid3<float> g(d);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(lo + (hi - lo) * rng.uniform());
  return g;
}

inline voxbench::Volume random_volume(voxbench::Dims d, std::uint64_t seed, double lo = 0.0, double hi = 1.0,
                                      voxbench::Modality m = voxbench::Modality::CT) {
  return voxbench::Volume(random_grid(d, seed, lo, hi), voxbench::Geometry{}, m);
}

template <typename F>
voxbench::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const voxbench::Error& e) {
    return e.code();
  }
  throw std::logic_error("expected voxbench::Error");
}

}  // namespace testutil
