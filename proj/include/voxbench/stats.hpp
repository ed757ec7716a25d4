#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbench/csv.hpp"

namespace voxbench {

/// values[task][model]; NaN marks a missing cell.
struct MetricTable {
  std::vector<std::string> tasks;
  std::vector<std::string> models;
  std::vector<std::vector<double>> values;
};

/// Long-format CSV with columns task, model and `metric`. Task and model
/// order follow first appearance.
MetricTable metric_table_from_csv(const CsvTable& csv, const std::string& metric);

struct RankTable {
  std::vector<std::string> tasks;
  std::vector<std::string> models;
  std::vector<std::vector<double>> ranks;  ///< [task][model], 1 = best
};

/// Ranks with ties sharing the mean of their positions. Rank 1 goes to the
/// largest value when higher_is_better, else to the smallest.
std::vector<double> tie_averaged_ranks(const std::vector<double>& values, bool higher_is_better);

/// Throws completeness when a cell is missing.
RankTable rank_models(const MetricTable& table, bool higher_is_better);

/// One-tailed signed-rank p-value for the alternative "differences are
/// positive". Zeros are dropped; |d| ranks are tie-averaged. Exact for
/// n <= 20, normal approximation with continuity and tie correction above.
/// Throws undefined_test when every difference is zero.
double wilcoxon_one_tailed(const std::vector<double>& diffs);
/// Sum of the ranks of the positive differences after dropping zeros.
double signed_rank_statistic(const std::vector<double>& diffs);

struct WilcoxonResult {
  std::string row;
  std::string col;
  int n_dominated = 0;  ///< tasks where row ranks better
  int n_ties = 0;
  std::optional<double> p;  ///< absent when every difference is zero
  bool significant = false;
};

/// Cell (i, j) tests row model i against column model j with
/// diffs = rank(col) - rank(row). Diagonal cells are left default.
std::vector<std::vector<WilcoxonResult>> pairwise_table(const RankTable& ranks, double alpha = 0.05);
/// Square layout: header row of models, cells "N" or "N*", "-" on the diagonal.
std::string pairwise_csv(const std::vector<std::vector<WilcoxonResult>>& table, const std::vector<std::string>& models);
std::string rank_table_csv(const RankTable& ranks);

// Visual Turing test

struct StudyVolume {
  std::string id;
  std::filesystem::path path;
  std::string patient_id;
  std::string modality;
  std::string source;  ///< "real" or the generating model name
};

struct StudyQuestion {
  std::string question_id;
  int part = 1;
  std::vector<std::string> volume_ids;
  std::string task;
  bool is_sanity = false;
};

struct StudyConfig {
  std::string study_id;
  std::vector<StudyVolume> volumes;
  std::vector<StudyQuestion> questions;

  const StudyVolume& volume(std::string_view id) const;
  const StudyQuestion& question(std::string_view id) const;
};

/// Volume paths are resolved against `base_dir`.
StudyConfig study_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
StudyConfig read_study(const std::filesystem::path& path);
/// The participant view: no sources, sanity flags or paths.
nlohmann::json public_study_json(const StudyConfig& s);

/// Structural checks; throws validation with the offending question id:
/// unique ids, known volumes, 1/2/3 volumes for parts 1/2/3, one patient per
/// part-2/3 question, sanity pairs showing one source twice, sanity triplets
/// with one real and two outputs of the same model.
void validate_study(const StudyConfig& s);
/// 15 part-1 questions (7 real, 8 synthetic), 18 part-2 (3 sanity),
/// 17 part-3 (2 sanity).
void validate_reference_layout(const StudyConfig& s);

struct TuringResponse {
  std::string participant_id;
  std::string question_id;
  int part = 1;
  std::string answer;  ///< "real"/"synthetic", "A"/"B"/"none", or "r1;r2;r3"
  bool is_sanity = false;
  std::string timestamp;
};

std::vector<TuringResponse> responses_from_csv(const CsvTable& csv);
std::vector<TuringResponse> read_responses(const std::filesystem::path& path);
inline constexpr const char* kResponseHeader = "participant_id,question_id,part,answer,is_sanity,timestamp";
std::string response_csv_line(const TuringResponse& r);

/// Parses "r1;r2;r3"; throws validation unless it is a permutation of 1..3.
std::array<int, 3> parse_rank_answer(std::string_view answer);

struct Tally {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct ParticipantAccuracy {
  std::string participant_id;
  Tally overall;
  Tally real;
  Tally synthetic;
  double balanced_accuracy() const { return 0.5 * (real.accuracy() + synthetic.accuracy()); }
};

struct Part1Summary {
  Tally overall;
  Tally real;       ///< real images labelled real
  Tally synthetic;  ///< synthetic images labelled synthetic
  std::map<std::string, Tally> per_modality;
  std::vector<ParticipantAccuracy> participants;  ///< sorted by id
  std::string best_participant;   ///< highest balanced accuracy, ties to the smaller id
  std::string worst_participant;  ///< lowest balanced accuracy, ties to the smaller id
};

struct PairPreference {
  std::string task;
  std::string model_a;  ///< lexicographically smaller source
  std::string model_b;
  std::size_t n = 0;
  std::size_t prefer_a = 0;
  std::size_t prefer_b = 0;
  std::size_t no_difference = 0;
  double pct_a() const { return n ? 100.0 * static_cast<double>(prefer_a) / static_cast<double>(n) : 0.0; }
  double pct_b() const { return n ? 100.0 * static_cast<double>(prefer_b) / static_cast<double>(n) : 0.0; }
  double pct_none() const { return n ? 100.0 * static_cast<double>(no_difference) / static_cast<double>(n) : 0.0; }
};

struct Part2Summary {
  std::vector<PairPreference> pairs;  ///< sorted by (task, model_a, model_b)
  std::size_t sanity_n = 0;
  std::size_t sanity_violations = 0;  ///< sanity pairs answered with a preference
  double sanity_violation_rate() const {
    return sanity_n ? static_cast<double>(sanity_violations) / static_cast<double>(sanity_n) : 0.0;
  }
};

struct RankDistribution {
  std::string source;
  std::array<std::size_t, 3> counts{};
  std::size_t n() const { return counts[0] + counts[1] + counts[2]; }
  double pct(int rank) const {
    return n() ? 100.0 * static_cast<double>(counts[static_cast<std::size_t>(rank - 1)]) / static_cast<double>(n()) : 0.0;
  }
};

struct SanityTriplet {
  std::string participant_id;
  std::string question_id;
  int rank_a = 0;
  int rank_b = 0;
  bool violation = false;  ///< |rank_a - rank_b| > 1
};

struct Part3Summary {
  std::vector<RankDistribution> per_source;  ///< non-sanity triplets, sorted by source
  std::size_t triplets = 0;
  std::vector<SanityTriplet> sanity;
  std::size_t sanity_violations() const;
};

Part1Summary turing_part1_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses);
Part2Summary turing_part2_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses);
Part3Summary turing_part3_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses);

std::string part1_csv(const Part1Summary& s);
std::string part2_csv(const Part2Summary& s);
std::string part3_csv(const Part3Summary& s);

}  // namespace voxbench
