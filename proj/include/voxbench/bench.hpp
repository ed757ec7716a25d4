#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbench/ingest.hpp"
#include "voxbench/patching.hpp"
#include "voxbench/preprocess.hpp"
#include "voxbench/stats.hpp"

namespace voxbench::bench {

namespace fs = std::filesystem;

struct PatchSettings {
  Dims size = kDefaultPatch;
  double overlap = kDefaultOverlap;
  double sigma_scale = kDefaultSigmaScale;
};

struct ModelSettings {
  std::string name = "identity";
  nlohmann::json params = nlohmann::json::object();
};

enum class SuvConversion { none, enhance };

struct ExperimentConfig {
  fs::path config_path;
  fs::path manifest_path;
  fs::path output_dir;
  std::uint64_t seed = 0;
  std::optional<Task> task;  ///< must match the manifest when given
  SplitSpec split;
  PipelineConfig pipeline;
  PatchSettings patch;
  ModelSettings model;
  SuvConversion suv = SuvConversion::none;
  bool lesions = true;
};

/// Paths are resolved against `base_dir`. Field errors name the JSON path.
/// BENCH_SEED, when set, overrides "seed".
ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir);
ExperimentConfig load_config(const fs::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// Outcome of a per-subject command.
struct RunReport {
  std::vector<std::string> succeeded;
  std::vector<std::pair<std::string, std::string>> failed;  ///< (subject, message)
  int exit_code() const { return failed.empty() ? 0 : 1; }
};

struct Layout {
  fs::path root;
  fs::path preprocessed() const { return root / "preprocessed"; }
  fs::path split() const { return preprocessed() / "split.json"; }
  fs::path source(const std::string& sid) const { return preprocessed() / (sid + "_source.nii.gz"); }
  fs::path target(const std::string& sid) const { return preprocessed() / (sid + "_target.nii.gz"); }
  fs::path source_record(const std::string& sid) const { return preprocessed() / (sid + "_source.json"); }
  fs::path target_record(const std::string& sid) const { return preprocessed() / (sid + "_target.json"); }
  fs::path foreground(const std::string& sid) const { return preprocessed() / (sid + "_fg.nii.gz"); }
  fs::path predictions(const std::string& model) const { return root / "predictions" / model; }
  fs::path prediction(const std::string& model, const std::string& sid) const {
    return predictions(model) / (sid + ".nii.gz");
  }
  fs::path evaluation(const std::string& model) const { return root / "evaluation" / model; }
};

/// Checks the config, the manifest and that every referenced file exists.
void cmd_validate(const ExperimentConfig& cfg);
RunReport cmd_preprocess(const ExperimentConfig& cfg, int jobs, std::ostream& log);
RunReport cmd_infer(const ExperimentConfig& cfg, int jobs, std::ostream& log);
RunReport cmd_evaluate(const ExperimentConfig& cfg, int jobs, std::ostream& log);

struct RankOptions {
  std::vector<fs::path> result_dirs;  ///< evaluation/<model> directories
  std::optional<fs::path> table;      ///< long-format means CSV instead of result dirs
  std::string metric = "psnr_db";
  bool higher_is_better = true;
  double alpha = 0.05;
  fs::path output_dir;
};

/// Writes ranks.csv and pairwise.csv into output_dir.
void cmd_rank(const RankOptions& opts);

struct PhantomOptions {
  fs::path output_dir;
  int subjects = 8;
  Dims dims{64, 64, 48};
  Vec3 spacing{1.5, 1.5, 2.0};
  Task task;
  std::uint64_t seed = 0;
  int validation_count = 1;
};

/// Writes phantom volumes, masks, manifest.json and config.json.
void cmd_phantom(const PhantomOptions& opts);

/// Runs the three part summaries; writes part1.csv, part2.csv, part3.csv and
/// summary.json.
void cmd_turing_analyze(const StudyConfig& study, const fs::path& responses, const fs::path& output_dir);
nlohmann::json turing_summary_json(const Part1Summary& p1, const Part2Summary& p2, const Part3Summary& p3);

/// Builds a small study over phantom volumes in `dir` (for demos and tests):
/// two part-1 questions, two part-2 pairs (one sanity) and one part-3 triplet.
StudyConfig make_demo_study(const fs::path& dir, std::uint64_t seed);
nlohmann::json study_to_json(const StudyConfig& s, const fs::path& base_dir);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 picks a free port
  fs::path responses_csv;
  std::optional<fs::path> static_dir;
};

/// HTTP endpoint for the reader study:
///   GET /study          participant view of the study
///   GET /volumes/{id}   NIfTI bytes
///   POST /responses     JSON {participant_id, question_id, part, answer}
class TuringServer {
 public:
  TuringServer(StudyConfig study, ServerOptions opts);
  ~TuringServer();
  TuringServer(const TuringServer&) = delete;
  TuringServer& operator=(const TuringServer&) = delete;

  /// Binds the socket; throws io when the port is busy. Returns the port.
  int bind();
  /// Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Validates a POST body against the study; returns the CSV row on success
/// and throws validation otherwise.
TuringResponse parse_response_body(const StudyConfig& study, const std::string& body, const std::string& timestamp);
std::string iso_timestamp_utc();

}  // namespace voxbench::bench
