#include <fstream>

#include "voxbench/bench.hpp"
#include "voxbench/nifti.hpp"
#include "voxbench/random.hpp"

namespace voxbench::bench {

using nlohmann::json;

namespace {

json tally_json(const Tally& t) { return {{"n", t.n}, {"correct", t.correct}, {"accuracy", t.accuracy()}}; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

}  // namespace

json turing_summary_json(const Part1Summary& p1, const Part2Summary& p2, const Part3Summary& p3) {
  json part1{{"overall", tally_json(p1.overall)},
             {"real", tally_json(p1.real)},
             {"synthetic", tally_json(p1.synthetic)},
             {"best_participant", p1.best_participant},
             {"worst_participant", p1.worst_participant}};
  part1["per_modality"] = json::object();
  for (const auto& [m, t] : p1.per_modality) part1["per_modality"][m] = tally_json(t);
  part1["participants"] = json::array();
  for (const auto& p : p1.participants)
    part1["participants"].push_back({{"participant_id", p.participant_id},
                                     {"accuracy", p.overall.accuracy()},
                                     {"balanced_accuracy", p.balanced_accuracy()},
                                     {"n", p.overall.n}});

  json part2{{"sanity_n", p2.sanity_n},
             {"sanity_violations", p2.sanity_violations},
             {"sanity_violation_rate", p2.sanity_violation_rate()}};
  part2["pairs"] = json::array();
  for (const auto& p : p2.pairs)
    part2["pairs"].push_back({{"task", p.task},
                              {"model_a", p.model_a},
                              {"model_b", p.model_b},
                              {"n", p.n},
                              {"pct_a", p.pct_a()},
                              {"pct_b", p.pct_b()},
                              {"pct_none", p.pct_none()}});

  json part3{{"triplets", p3.triplets}, {"sanity_n", p3.sanity.size()}, {"sanity_violations", p3.sanity_violations()}};
  part3["per_source"] = json::array();
  for (const auto& d : p3.per_source)
    part3["per_source"].push_back(
        {{"source", d.source}, {"n", d.n()}, {"pct_rank1", d.pct(1)}, {"pct_rank2", d.pct(2)}, {"pct_rank3", d.pct(3)}});
  return {{"schema_version", 1}, {"part1", part1}, {"part2", part2}, {"part3", part3}};
}

void cmd_turing_analyze(const StudyConfig& study, const fs::path& responses, const fs::path& output_dir) {
  validate_study(study);
  const auto rs = read_responses(responses);
  const auto p1 = turing_part1_summary(study, rs);
  const auto p2 = turing_part2_summary(study, rs);
  const auto p3 = turing_part3_summary(study, rs);
  fs::create_directories(output_dir);
  write_file(output_dir / "part1.csv", part1_csv(p1));
  write_file(output_dir / "part2.csv", part2_csv(p2));
  write_file(output_dir / "part3.csv", part3_csv(p3));
  write_file(output_dir / "summary.json", turing_summary_json(p1, p2, p3).dump(2) + "\n");
}

StudyConfig make_demo_study(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir / "volumes");
  const PhantomCase c = generate_phantom_pair(seed, Dims{24, 24, 16}, Vec3{2.0, 2.0, 2.0}, Task{});
  const Volume& real = c.target;
  Rng rng(seed ^ 0x5eedULL);
  Grid3<float> noisy = real.voxels(), biased = real.voxels();
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    noisy[i] += static_cast<float>(25.0 * rng.normal());
    biased[i] = biased[i] * 0.95f + 20.0f;
  }
  const std::vector<std::pair<std::string, Volume>> vols = {
      {"real", real},
      {"model-a", Volume(std::move(noisy), real.geometry(), real.modality())},
      {"model-b", Volume(std::move(biased), real.geometry(), real.modality())}};

  StudyConfig s;
  s.study_id = "demo";
  for (std::size_t i = 0; i < vols.size(); ++i) {
    const auto& [source, v] = vols[i];
    const std::string id = "v" + std::to_string(i + 1);
    const fs::path path = dir / "volumes" / (id + ".nii.gz");
    write_nifti(v, path);
    s.volumes.push_back({id, path, "p1", std::string(to_string(v.modality())), source});
  }
  const std::string task = "CBCT->CT";
  // v1 real, v2 model-a, v3 model-b
  s.questions = {{"q1", 1, {"v1"}, task, false},
                 {"q2", 1, {"v2"}, task, false},
                 {"q3", 2, {"v2", "v3"}, task, false},
                 {"q4", 2, {"v3", "v3"}, task, true},
                 {"q5", 3, {"v1", "v2", "v3"}, task, false}};
  validate_study(s);
  return s;
}

json study_to_json(const StudyConfig& s, const fs::path& base_dir) {
  json j{{"study_id", s.study_id}, {"volumes", json::array()}, {"questions", json::array()}};
  for (const auto& v : s.volumes) {
    const fs::path p = base_dir.empty() ? v.path : v.path.lexically_relative(base_dir);
    j["volumes"].push_back({{"id", v.id},
                            {"path", p.generic_string()},
                            {"patient_id", v.patient_id},
                            {"modality", v.modality},
                            {"source", v.source}});
  }
  for (const auto& q : s.questions)
    j["questions"].push_back({{"question_id", q.question_id},
                              {"part", q.part},
                              {"volume_ids", q.volume_ids},
                              {"task", q.task},
                              {"is_sanity", q.is_sanity}});
  return j;
}

}  // namespace voxbench::bench
