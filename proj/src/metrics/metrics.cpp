#include "voxbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "voxbench/csv.hpp"
#include "voxbench/simd/kernels.hpp"

namespace voxbench {

namespace {

void check_pair(const Volume& a, const Volume& b) {
  if (!(a.dims() == b.dims()))
    throw Error(ErrorCode::shape, "dims differ: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
}

void check_range(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::parameter, "data range must be positive");
}

}  // namespace

double data_range_for(Modality m, const Volume& ref) {
  if (is_ct_like(m)) return 4024.0;
  if (m == Modality::PET) return 20.0;
  const auto v = ref.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double r = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(r > 0.0)) throw Error(ErrorCode::degenerate_reference, "constant MRI reference has no data range");
  return r;
}

double psnr(const Volume& pred, const Volume& ref, double data_range, const Mask* mask) {
  check_pair(pred, ref);
  check_range(data_range);
  double sse = 0.0;
  std::size_t n = 0;
  if (mask == nullptr) {
    sse = simd::active().sum_sq_diff(pred.values().data(), ref.values().data(), pred.values().size());
    n = pred.values().size();
  } else {
    if (!(mask->dims() == pred.dims())) throw Error(ErrorCode::shape, "mask dims differ");
    const auto a = pred.values(), b = ref.values();
    for (std::size_t i = 0; i < a.size(); ++i)
      if ((*mask)[i]) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sse += d * d;
        ++n;
      }
    if (n == 0) throw Error(ErrorCode::degenerate_mask, "PSNR mask is empty");
  }
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

std::vector<double> gaussian_taps(int window, double sigma) {
  if (window < 1 || window % 2 == 0) throw Error(ErrorCode::parameter, "SSIM window must be odd and positive");
  if (!(sigma > 0.0)) throw Error(ErrorCode::parameter, "SSIM sigma must be positive");
  std::vector<double> taps(static_cast<std::size_t>(window));
  const int h = window / 2;
  double total = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - h;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

namespace {

// Streams SSIM map planes: `emit(z_out, plane)` receives each output z-plane
// of (nx - w + 1) * (ny - w + 1) values.
void ssim_planes(const Volume& pred, const Volume& ref, double data_range, const SsimOptions& opts,
                 const std::function<void(std::int64_t, const double*)>& emit) {
  check_pair(pred, ref);
  check_range(data_range);
  const std::int64_t w = opts.window;
  const Dims& d = pred.dims();
  if (d.x < w || d.y < w || d.z < w)
    throw Error(ErrorCode::shape, "volume " + to_string(d) + " smaller than the SSIM window");
  const auto& k = simd::active();
  const std::vector<double> taps = gaussian_taps(opts.window, opts.sigma);
  const double c1 = (opts.k1 * data_range) * (opts.k1 * data_range);
  const double c2 = (opts.k2 * data_range) * (opts.k2 * data_range);
  const std::int64_t ox = d.x - w + 1, oy = d.y - w + 1;
  const std::size_t plane = static_cast<std::size_t>(ox * oy);

  constexpr int kFields = 5;
  // ring[f][slot] holds an x/y-filtered plane of field f.
  std::vector<std::vector<double>> ring(static_cast<std::size_t>(kFields * w), std::vector<double>(plane));
  std::vector<double> raw(static_cast<std::size_t>(d.x) * kFields);
  std::vector<double> xf(static_cast<std::size_t>(ox * d.y) * kFields);
  std::vector<std::vector<double>> out(kFields, std::vector<double>(plane));
  std::vector<double> map(plane);
  const auto& A = pred.voxels();
  const auto& B = ref.voxels();

  for (std::int64_t z = 0; z < d.z; ++z) {
    const auto slot = static_cast<std::size_t>(z % w);
    // x pass
    for (std::int64_t y = 0; y < d.y; ++y) {
      const auto ra = A.row(y, z), rb = B.row(y, z);
      double* f0 = raw.data();
      double* f1 = f0 + d.x;
      double* f2 = f1 + d.x;
      double* f3 = f2 + d.x;
      double* f4 = f3 + d.x;
      for (std::int64_t x = 0; x < d.x; ++x) {
        const double a = ra[static_cast<std::size_t>(x)], b = rb[static_cast<std::size_t>(x)];
        f0[x] = a;
        f1[x] = b;
        f2[x] = a * a;
        f3[x] = b * b;
        f4[x] = a * b;
      }
      for (int f = 0; f < kFields; ++f)
        k.correlate_valid(xf.data() + static_cast<std::size_t>((f * d.y + y) * ox), raw.data() + f * d.x,
                          static_cast<std::size_t>(d.x), taps.data(), taps.size());
    }
    // y pass
    for (int f = 0; f < kFields; ++f) {
      std::vector<double>& dst = ring[static_cast<std::size_t>(f) * static_cast<std::size_t>(w) + slot];
      std::fill(dst.begin(), dst.end(), 0.0);
      for (std::int64_t y = 0; y < oy; ++y)
        for (std::int64_t t = 0; t < w; ++t)
          k.axpy_f64(dst.data() + y * ox, taps[static_cast<std::size_t>(t)],
                     xf.data() + static_cast<std::size_t>((f * d.y + y + t) * ox), static_cast<std::size_t>(ox));
    }
    // z pass
    if (z < w - 1) continue;
    const std::int64_t zo = z - w + 1;
    for (int f = 0; f < kFields; ++f) {
      std::fill(out[f].begin(), out[f].end(), 0.0);
      for (std::int64_t t = 0; t < w; ++t) {
        const auto s = static_cast<std::size_t>((zo + t) % w);
        k.axpy_f64(out[f].data(), taps[static_cast<std::size_t>(t)],
                   ring[static_cast<std::size_t>(f) * static_cast<std::size_t>(w) + s].data(), plane);
      }
    }
    k.ssim_map(map.data(), out[0].data(), out[1].data(), out[2].data(), out[3].data(), out[4].data(), c1, c2, plane);
    emit(zo, map.data());
  }
}

}  // namespace

Grid3<double> ssim_map(const Volume& pred, const Volume& ref, double data_range, const SsimOptions& opts) {
  const std::int64_t w = opts.window;
  const Dims& d = pred.dims();
  const Dims od{d.x - w + 1, d.y - w + 1, d.z - w + 1};
  Grid3<double> out;
  ssim_planes(pred, ref, data_range, opts, [&](std::int64_t z, const double* plane) {
    if (out.empty()) out = Grid3<double>(od);
    std::copy_n(plane, static_cast<std::size_t>(od.x * od.y), out.values().data() + out.index(0, 0, z));
  });
  return out;
}

double ssim3d(const Volume& pred, const Volume& ref, double data_range, const Mask* mask, const SsimOptions& opts) {
  if (mask && !(mask->dims() == pred.dims())) throw Error(ErrorCode::shape, "mask dims differ");
  const std::int64_t w = opts.window, h = w / 2;
  const Dims& d = pred.dims();
  const std::int64_t ox = d.x - w + 1, oy = d.y - w + 1;
  double total = 0.0;
  std::size_t n = 0;
  ssim_planes(pred, ref, data_range, opts, [&](std::int64_t z, const double* plane) {
    for (std::int64_t y = 0; y < oy; ++y)
      for (std::int64_t x = 0; x < ox; ++x) {
        if (mask && !(*mask)(x + h, y + h, z + h)) continue;
        total += plane[y * ox + x];
        ++n;
      }
  });
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(n);
}

double nmse(const Volume& pred, const Volume& ref) {
  check_pair(pred, ref);
  const auto& k = simd::active();
  const double energy = k.sum_sq(ref.values().data(), ref.values().size());
  if (!(energy > 0.0)) throw Error(ErrorCode::degenerate_reference, "reference has zero energy");
  return k.sum_sq_diff(pred.values().data(), ref.values().data(), ref.values().size()) / energy;
}

Volume error_map(const Volume& pred, const Volume& ref) {
  check_pair(pred, ref);
  Grid3<float> out(pred.dims());
  simd::active().axpby(out.values().data(), 1.0f, pred.values().data(), -1.0f, ref.values().data(), out.size());
  return pred.with_voxels(std::move(out));
}

double quantile_sorted(const std::vector<double>& x, double p) {
  if (x.empty()) throw Error(ErrorCode::cardinality, "quantile of an empty sample");
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

Summary summarize(const std::vector<double>& values) {
  std::vector<double> v;
  Summary s;
  for (double x : values) {
    if (std::isfinite(x))
      v.push_back(x);
    else
      ++s.excluded;
  }
  if (v.empty()) throw Error(ErrorCode::cardinality, "no finite values to summarize");
  s.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  std::sort(v.begin(), v.end());
  s.median = quantile_sorted(v, 0.5);
  s.q25 = quantile_sorted(v, 0.25);
  s.q75 = quantile_sorted(v, 0.75);
  return s;
}

nlohmann::json to_json(const Summary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return nlohmann::json{{"n", s.n},           {"excluded", s.excluded}, {"mean", num(s.mean)},
                        {"std", num(s.std)},  {"median", num(s.median)}, {"q25", num(s.q25)},
                        {"q75", num(s.q75)},  {"iqr", num(s.iqr())}};
}

MetricRow evaluate_pair(const std::string& subject_id, const Volume& pred, const Volume& ref, double data_range) {
  return MetricRow{subject_id, psnr(pred, ref, data_range), ssim3d(pred, ref, data_range), nmse(pred, ref)};
}

MetricReport make_report(std::vector<MetricRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::cardinality, "no metric rows");
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) { return a.subject_id < b.subject_id; });
  MetricReport r;
  std::vector<double> p, s, n;
  for (const auto& row : rows) {
    p.push_back(row.psnr_db);
    s.push_back(row.ssim);
    n.push_back(row.nmse);
  }
  r.rows = std::move(rows);
  // A column with no finite value (e.g. every PSNR infinite) yields n = 0.
  auto lenient = [](const std::vector<double>& v) {
    Summary out;
    if (std::any_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) return summarize(v);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.excluded = v.size();
    out.mean = out.std = out.median = out.q25 = out.q75 = nan;
    return out;
  };
  r.psnr = lenient(p);
  r.ssim = lenient(s);
  r.nmse = lenient(n);
  return r;
}

std::string metrics_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "subject_id,psnr_db,ssim,nmse\n";
  for (const auto& row : r.rows)
    out << csv_line({row.subject_id, format_double(row.psnr_db), format_double(row.ssim), format_double(row.nmse)})
        << '\n';
  return out.str();
}

nlohmann::json aggregate_json(const MetricReport& r) {
  return nlohmann::json{{"schema_version", 1},
                        {"subjects", r.rows.size()},
                        {"psnr_db", to_json(r.psnr)},
                        {"ssim", to_json(r.ssim)},
                        {"nmse", to_json(r.nmse)}};
}

}  // namespace voxbench
