#include <algorithm>
#include <cmath>
#include <cstdint>

#include "voxbench/error.hpp"
#include "voxbench/stats.hpp"

namespace voxbench {

namespace {

struct Ranked {
  std::vector<double> abs_ranks;
  std::vector<bool> positive;
};

Ranked rank_nonzero(const std::vector<double>& diffs) {
  std::vector<double> abs;
  Ranked r;
  for (double d : diffs) {
    if (!std::isfinite(d)) throw Error(ErrorCode::parameter, "non-finite difference");
    if (d == 0.0) continue;
    abs.push_back(std::fabs(d));
    r.positive.push_back(d > 0.0);
  }
  if (abs.empty()) throw Error(ErrorCode::undefined_test, "all differences are zero");
  r.abs_ranks = tie_averaged_ranks(abs, false);
  return r;
}

}  // namespace

double signed_rank_statistic(const std::vector<double>& diffs) {
  const Ranked r = rank_nonzero(diffs);
  double w = 0.0;
  for (std::size_t i = 0; i < r.abs_ranks.size(); ++i)
    if (r.positive[i]) w += r.abs_ranks[i];
  return w;
}

double wilcoxon_one_tailed(const std::vector<double>& diffs) {
  const Ranked r = rank_nonzero(diffs);
  const std::size_t n = r.abs_ranks.size();
  if (n <= 20) {
    // Tie-averaged ranks are multiples of 1/2, so doubled ranks are integers.
    std::vector<std::size_t> doubled(n);
    std::size_t total = 0, observed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<std::size_t>(std::llround(2.0 * r.abs_ranks[i]));
      total += doubled[i];
      if (r.positive[i]) observed += doubled[i];
    }
    // counts[s] = number of sign assignments whose positive doubled ranks sum to s.
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    for (std::size_t v : doubled)
      for (std::size_t s = total; s >= v; --s) {
        counts[s] += counts[s - v];
        if (s == v) break;
      }
    std::uint64_t tail = 0;
    for (std::size_t s = observed; s <= total; ++s) tail += counts[s];
    return static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n));
  }
  const double nn = static_cast<double>(n);
  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (r.positive[i]) w += r.abs_ranks[i];
  // Tie correction from groups of equal ranks.
  std::vector<double> sorted = r.abs_ranks;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (w - mean - 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace voxbench
