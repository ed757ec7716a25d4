#include <algorithm>
#include <cmath>

#include "voxbench/ingest.hpp"
#include "voxbench/random.hpp"

namespace voxbench {

const std::vector<Knot>& phantom_knots(Modality m) {
  static const std::vector<Knot> ct{{0, -1000}, {0.2, -700}, {0.4, -80}, {0.55, 40}, {0.75, 300}, {1, 1500}};
  static const std::vector<Knot> cbct{{0, -950}, {0.2, -650}, {0.4, -100}, {0.55, 10}, {0.75, 250}, {1, 1200}};
  static const std::vector<Knot> t1{{0, 0}, {0.2, 80}, {0.4, 300}, {0.55, 450}, {0.75, 600}, {1, 900}};
  static const std::vector<Knot> t2{{0, 0}, {0.2, 40}, {0.4, 200}, {0.55, 350}, {0.75, 700}, {1, 1100}};
  static const std::vector<Knot> t2f{{0, 0}, {0.2, 50}, {0.4, 250}, {0.55, 300}, {0.75, 500}, {1, 800}};
  static const std::vector<Knot> pet{{0, 0}, {0.2, 0.05}, {0.4, 0.6}, {0.55, 1.2}, {0.75, 2.5}, {1, 15}};
  switch (m) {
    case Modality::CT: return ct;
    case Modality::CBCT: return cbct;
    case Modality::MRI_T1w: return t1;
    case Modality::MRI_T2w: return t2;
    case Modality::MRI_T2f: return t2f;
    case Modality::PET: return pet;
  }
  return ct;
}

namespace {

double forward(const std::vector<Knot>& k, double u) {
  if (u <= k.front().u) return k.front().value;
  for (std::size_t i = 1; i < k.size(); ++i)
    if (u <= k[i].u) {
      const double f = (u - k[i - 1].u) / (k[i].u - k[i - 1].u);
      return k[i - 1].value + f * (k[i].value - k[i - 1].value);
    }
  return k.back().value;
}

double inverse(const std::vector<Knot>& k, double v) {
  if (v <= k.front().value) return k.front().u;
  for (std::size_t i = 1; i < k.size(); ++i)
    if (v <= k[i].value) {
      const double f = (v - k[i - 1].value) / (k[i].value - k[i - 1].value);
      return k[i - 1].u + f * (k[i].u - k[i - 1].u);
    }
  return k.back().u;
}

struct Ellipsoid {
  Vec3 centre;
  Vec3 axes;

  double radius(const Vec3& p) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = (p[a] - centre[a]) / axes[a];
      s += d * d;
    }
    return std::sqrt(s);
  }
  /// Smooth indicator: 1 inside, 0 outside, sigmoid over ~edge_mm.
  double weight(const Vec3& p, double edge_mm) const {
    const double dist = (radius(p) - 1.0) * std::min({axes[0], axes[1], axes[2]});
    return 1.0 / (1.0 + std::exp(dist / edge_mm));
  }
};

}  // namespace

double phantom_transform(Modality source, Modality target, double v) {
  return forward(phantom_knots(target), inverse(phantom_knots(source), v));
}

PhantomCase generate_phantom_pair(std::uint64_t seed, const Dims& dims, const Vec3& spacing, const Task& task) {
  if (!dims.positive()) throw Error(ErrorCode::parameter, "phantom dims must be positive");
  for (double s : spacing)
    if (!(s > 0.0)) throw Error(ErrorCode::parameter, "phantom spacing must be positive");
  Rng rng(seed);
  const Vec3 extent{dims.x * spacing[0], dims.y * spacing[1], dims.z * spacing[2]};
  auto jitter = [&](double scale) { return 1.0 + scale * (rng.uniform() - 0.5); };

  Ellipsoid body;
  for (int a = 0; a < 3; ++a) {
    body.centre[a] = 0.5 * extent[a] * jitter(0.04);
    body.axes[a] = 0.42 * extent[a] * jitter(0.1);
  }
  auto inside_body_point = [&](double max_r) {
    Vec3 p;
    do {
      for (int a = 0; a < 3; ++a) p[a] = body.centre[a] + (2.0 * rng.uniform() - 1.0) * body.axes[a] * max_r;
    } while (body.radius(p) > max_r);
    return p;
  };

  struct Structure {
    Ellipsoid e;
    double level;
  };
  static constexpr double kLevels[] = {0.25, 0.45, 0.65, 0.9};
  std::vector<Structure> structures;
  const int n_structures = 3 + static_cast<int>(rng.below(3));
  for (int i = 0; i < n_structures; ++i) {
    Structure s;
    s.e.centre = inside_body_point(0.45);
    for (int a = 0; a < 3; ++a) s.e.axes[a] = body.axes[a] * (0.15 + 0.2 * rng.uniform());
    s.level = kLevels[rng.below(4)];
    structures.push_back(s);
  }
  std::vector<Ellipsoid> lesions;
  const int n_lesions = 1 + static_cast<int>(rng.below(5));
  const double min_axis = std::min({body.axes[0], body.axes[1], body.axes[2]});
  for (int i = 0; i < n_lesions; ++i) {
    Ellipsoid l;
    l.centre = inside_body_point(0.5);
    const double r = std::min(0.2 * min_axis, 3.0 + 6.0 * rng.uniform());
    for (int a = 0; a < 3; ++a) l.axes[a] = std::max(r * jitter(0.4), 1.5 * spacing[a]);
    lesions.push_back(l);
  }
  const Vec3 wave{2.0 * std::numbers::pi / (8.0 + 8.0 * rng.uniform()), 2.0 * std::numbers::pi / (8.0 + 8.0 * rng.uniform()),
                  2.0 * std::numbers::pi / (8.0 + 8.0 * rng.uniform())};

  const auto& src_knots = phantom_knots(task.source);
  Grid3<float> src(dims), tgt(dims);
  Mask body_mask(dims), lesion_mask(dims);
  for (std::int64_t z = 0; z < dims.z; ++z)
    for (std::int64_t y = 0; y < dims.y; ++y)
      for (std::int64_t x = 0; x < dims.x; ++x) {
        const Vec3 p{(x + 0.5) * spacing[0], (y + 0.5) * spacing[1], (z + 0.5) * spacing[2]};
        const double wb = body.weight(p, 1.0);
        double u = 0.5 + 0.03 * std::sin(wave[0] * p[0]) * std::sin(wave[1] * p[1]) * std::sin(wave[2] * p[2]);
        for (const auto& s : structures) {
          const double w = s.e.weight(p, 1.0);
          u = u * (1.0 - w) + s.level * w;
        }
        bool in_lesion = false;
        for (const auto& l : lesions) {
          const double w = l.weight(p, 0.75);
          u = u * (1.0 - w) + 0.8 * w;
          in_lesion = in_lesion || l.radius(p) <= 1.0;
        }
        u = std::clamp(u * wb, 0.0, 1.0);
        const bool in_body = body.radius(p) <= 1.0;
        body_mask(x, y, z) = in_body ? 1 : 0;
        lesion_mask(x, y, z) = (in_body && in_lesion) ? 1 : 0;
        const float s = static_cast<float>(forward(src_knots, u));
        src(x, y, z) = s;
        tgt(x, y, z) = static_cast<float>(phantom_transform(task.source, task.target, s));
      }

  Geometry g;
  g.spacing = spacing;
  g.origin = {-0.5 * extent[0], -0.5 * extent[1], -0.5 * extent[2]};
  return PhantomCase{Volume(std::move(src), g, task.source), Volume(std::move(tgt), g, task.target),
                     std::move(body_mask), std::move(lesion_mask)};
}

}  // namespace voxbench
