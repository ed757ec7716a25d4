#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "voxbench/error.hpp"
#include "voxbench/stats.hpp"

namespace voxbench {

MetricTable metric_table_from_csv(const CsvTable& csv, const std::string& metric) {
  const std::size_t ti = csv.column("task"), mi = csv.column("model"), vi = csv.column(metric);
  MetricTable t;
  auto index_of = [](std::vector<std::string>& list, const std::string& key) {
    auto it = std::find(list.begin(), list.end(), key);
    if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
    list.push_back(key);
    return list.size() - 1;
  };
  struct Cell {
    std::size_t task, model;
    double value;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    double v;
    try {
      v = std::stod(row.at(vi));
    } catch (const std::exception&) {
      throw Error(ErrorCode::configuration, "row " + std::to_string(r + 2) + ": bad value for " + metric);
    }
    cells.push_back({index_of(t.tasks, row.at(ti)), index_of(t.models, row.at(mi)), v});
  }
  t.values.assign(t.tasks.size(), std::vector<double>(t.models.size(), std::numeric_limits<double>::quiet_NaN()));
  for (const auto& c : cells) {
    if (!std::isnan(t.values[c.task][c.model]))
      throw Error(ErrorCode::conflict, "duplicate cell " + t.tasks[c.task] + "/" + t.models[c.model]);
    t.values[c.task][c.model] = c.value;
  }
  return t;
}

std::vector<double> tie_averaged_ranks(const std::vector<double>& values, bool higher_is_better) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

RankTable rank_models(const MetricTable& table, bool higher_is_better) {
  RankTable r{table.tasks, table.models, {}};
  for (std::size_t t = 0; t < table.tasks.size(); ++t) {
    const auto& row = table.values.at(t);
    if (row.size() != table.models.size()) throw Error(ErrorCode::completeness, "ragged metric table");
    for (std::size_t m = 0; m < row.size(); ++m)
      if (!std::isfinite(row[m]))
        throw Error(ErrorCode::completeness, "missing value for task " + table.tasks[t] + ", model " + table.models[m]);
    r.ranks.push_back(tie_averaged_ranks(row, higher_is_better));
  }
  return r;
}

std::vector<std::vector<WilcoxonResult>> pairwise_table(const RankTable& ranks, double alpha) {
  const std::size_t m = ranks.models.size();
  if (m < 2) throw Error(ErrorCode::alignment, "pairwise comparison needs at least two models");
  if (ranks.tasks.empty()) throw Error(ErrorCode::alignment, "pairwise comparison needs at least one task");
  std::vector<std::vector<WilcoxonResult>> out(m, std::vector<WilcoxonResult>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      WilcoxonResult& c = out[i][j];
      c.row = ranks.models[i];
      c.col = ranks.models[j];
      if (i == j) continue;
      std::vector<double> diffs;
      for (const auto& task : ranks.ranks) {
        const double d = task[j] - task[i];
        diffs.push_back(d);
        if (d > 0) ++c.n_dominated;
        if (d == 0) ++c.n_ties;
      }
      if (c.n_ties < static_cast<int>(diffs.size())) {
        c.p = wilcoxon_one_tailed(diffs);
        c.significant = *c.p < alpha;
      }
    }
  return out;
}

std::string pairwise_csv(const std::vector<std::vector<WilcoxonResult>>& table, const std::vector<std::string>& models) {
  std::ostringstream out;
  std::vector<std::string> header{"model"};
  header.insert(header.end(), models.begin(), models.end());
  out << csv_line(header) << '\n';
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::vector<std::string> row{models[i]};
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (i == j) {
        row.emplace_back("-");
        continue;
      }
      const auto& c = table[i][j];
      row.push_back(std::to_string(c.n_dominated) + (c.significant ? "*" : ""));
    }
    out << csv_line(row) << '\n';
  }
  return out.str();
}

std::string rank_table_csv(const RankTable& ranks) {
  std::ostringstream out;
  std::vector<std::string> header{"task"};
  header.insert(header.end(), ranks.models.begin(), ranks.models.end());
  out << csv_line(header) << '\n';
  for (std::size_t t = 0; t < ranks.tasks.size(); ++t) {
    std::vector<std::string> row{ranks.tasks[t]};
    for (double r : ranks.ranks[t]) row.push_back(format_double(r));
    out << csv_line(row) << '\n';
  }
  return out.str();
}

}  // namespace voxbench
