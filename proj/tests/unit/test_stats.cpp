#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "voxbench/stats.hpp"

using namespace voxbench;
using testutil::error_code_of;

namespace {

/// P(W+ >= observed) by listing all 2^n sign assignments of the tie-averaged |d| ranks.
double enumerate_p(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0) d.push_back(x);
  const std::size_t n = d.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    ranks[i] = less + (equal + 1) / 2;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w += ranks[i];
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += ranks[i];
    if (s >= w - 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(1ULL << n);
}

StudyConfig small_study() {
  StudyConfig s;
  s.study_id = "t";
  s.volumes = {{"r1", "r1.nii", "p1", "CT", "real"},     {"a1", "a1.nii", "p1", "CT", "m-a"},
               {"b1", "b1.nii", "p1", "CT", "m-b"},      {"a1b", "a1b.nii", "p1", "CT", "m-a"},
               {"r2", "r2.nii", "p2", "MRI_T2f", "real"}, {"a2", "a2.nii", "p2", "MRI_T2f", "m-a"}};
  s.questions = {{"q1", 1, {"r1"}, "cbct", false},          {"q2", 1, {"a1"}, "cbct", false},
                 {"q3", 1, {"r2"}, "t2", false},            {"q4", 2, {"b1", "a1"}, "cbct", false},
                 {"q5", 2, {"a1", "a1"}, "cbct", true},     {"q6", 3, {"r1", "a1", "b1"}, "cbct", false},
                 {"q7", 3, {"a1", "r1", "a1b"}, "cbct", true}};
  return s;
}

TuringResponse resp(std::string p, std::string q, int part, std::string a, bool sanity = false) {
  return TuringResponse{std::move(p), std::move(q), part, std::move(a), sanity, "2026-01-01T00:00:00Z"};
}

}  // namespace

TEST_CASE("tie-averaged ranks") {
  CHECK(tie_averaged_ranks({3, 1, 3}, true) == std::vector<double>{1.5, 3, 1.5});
  CHECK(tie_averaged_ranks({3, 1, 3}, false) == std::vector<double>{2.5, 1, 2.5});
  CHECK(tie_averaged_ranks({5, 5, 5, 5}, true) == std::vector<double>{2.5, 2.5, 2.5, 2.5});
}

TEST_CASE("metric table from long csv") {
  const CsvTable csv = parse_csv("task,model,psnr_db\nt1,A,30\nt1,B,31\nt2,A,29\nt2,B,28\n");
  const MetricTable t = metric_table_from_csv(csv, "psnr_db");
  CHECK(t.tasks == std::vector<std::string>{"t1", "t2"});
  CHECK(t.models == std::vector<std::string>{"A", "B"});
  const RankTable r = rank_models(t, true);
  CHECK(r.ranks[0] == std::vector<double>{2, 1});
  CHECK(r.ranks[1] == std::vector<double>{1, 2});
  const CsvTable dup = parse_csv("task,model,psnr_db\nt1,A,30\nt1,A,31\n");
  CHECK(error_code_of([&] { (void)metric_table_from_csv(dup, "psnr_db"); }) == ErrorCode::conflict);
  const CsvTable gap = parse_csv("task,model,psnr_db\nt1,A,30\nt1,B,31\nt2,A,29\n");
  const MetricTable g = metric_table_from_csv(gap, "psnr_db");
  CHECK(std::isnan(g.values[1][1]));
  CHECK(error_code_of([&] { (void)rank_models(g, true); }) == ErrorCode::completeness);
  CHECK(error_code_of([&] { (void)metric_table_from_csv(csv, "ssim"); }) == ErrorCode::configuration);
}

TEST_CASE("exact wilcoxon equals full enumeration") {
  Rng rng(2024);
  for (int n = 1; n <= 12; ++n)
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> d(static_cast<std::size_t>(n));
      for (auto& x : d) x = static_cast<double>(static_cast<int>(rng.below(9)) - 4) * 0.5;
      bool any = false;
      for (double x : d) any |= x != 0;
      if (!any) continue;
      CAPTURE(n);
      REQUIRE(wilcoxon_one_tailed(d) == enumerate_p(d));
    }
}

TEST_CASE("wilcoxon reference cases") {
  CHECK(wilcoxon_one_tailed(std::vector<double>(11, 1.0)) == 1.0 / 2048);
  CHECK(wilcoxon_one_tailed({1.0}) == 0.5);
  CHECK(wilcoxon_one_tailed({-1.0}) == 1.0);
  CHECK(wilcoxon_one_tailed({1.0, -1.0}) == 0.75);
  CHECK(wilcoxon_one_tailed({2.0, -1.0}) == 0.5);
  CHECK(wilcoxon_one_tailed({0.0, 3.0, 0.0}) == 0.5);
  CHECK(signed_rank_statistic({2.0, -1.0, 0.0, 3.0}) == 5.0);
  CHECK(error_code_of([] { (void)wilcoxon_one_tailed({0.0, 0.0}); }) == ErrorCode::undefined_test);

  std::vector<double> d;
  for (int i = 1; i <= 25; ++i) d.push_back((i % 3 == 0 ? -1 : 1) * (i % 7 + 1));
  CHECK(wilcoxon_one_tailed(d) == doctest::Approx(0.067214873854083).epsilon(1e-9));
  std::vector<double> e;
  for (int i = 1; i <= 23; ++i) e.push_back(i == 4 || i == 19 ? -i : i);
  CHECK(wilcoxon_one_tailed(e) == doctest::Approx(0.00024836634391866706).epsilon(1e-9));
}

TEST_CASE("pairwise table") {
  RankTable one{{"t"}, {"A", "B"}, {{1, 2}}};
  const auto p = pairwise_table(one);
  CHECK(p[0][1].n_dominated == 1);
  CHECK(p[1][0].n_dominated == 0);
  CHECK(*p[0][1].p == 0.5);
  CHECK_FALSE(p[0][1].significant);
  CHECK(*p[1][0].p == 1.0);
  RankTable tied{{"t"}, {"A", "B"}, {{1.5, 1.5}}};
  const auto q = pairwise_table(tied);
  CHECK_FALSE(q[0][1].p.has_value());
  CHECK(q[0][1].n_ties == 1);
  CHECK(error_code_of([] { (void)pairwise_table(RankTable{{"t"}, {"A"}, {{1}}}); }) == ErrorCode::alignment);
  CHECK(error_code_of([] { (void)pairwise_table(RankTable{{}, {"A", "B"}, {}}); }) == ErrorCode::alignment);

  RankTable eleven;
  eleven.models = {"A", "B"};
  for (int t = 0; t < 11; ++t) {
    eleven.tasks.push_back("t" + std::to_string(t));
    eleven.ranks.push_back({1, 2});
  }
  const auto e = pairwise_table(eleven);
  CHECK(*e[0][1].p == 1.0 / 2048);
  CHECK(e[0][1].significant);
  const std::string csv = pairwise_csv(e, eleven.models);
  CHECK(csv == "model,A,B\nA,-,11*\nB,0,-\n");
  CHECK(rank_table_csv(eleven).rfind("task,A,B\n", 0) == 0);
}

TEST_CASE("study validation") {
  const StudyConfig s = small_study();
  CHECK_NOTHROW(validate_study(s));
  auto cross = s;
  cross.questions[3].volume_ids = {"b1", "a2"};
  CHECK(error_code_of([&] { validate_study(cross); }) == ErrorCode::validation);
  auto bad_sanity = s;
  bad_sanity.questions[4].volume_ids = {"a1", "b1"};
  CHECK(error_code_of([&] { validate_study(bad_sanity); }) == ErrorCode::validation);
  auto bad_triplet = s;
  bad_triplet.questions[6].volume_ids = {"a1", "b1", "a1b"};
  CHECK(error_code_of([&] { validate_study(bad_triplet); }) == ErrorCode::validation);
  auto dup = s;
  dup.questions[1].question_id = "q1";
  CHECK(error_code_of([&] { validate_study(dup); }) == ErrorCode::validation);
  auto unknown = s;
  unknown.questions[0].volume_ids = {"zz"};
  CHECK(error_code_of([&] { validate_study(unknown); }) == ErrorCode::validation);
  CHECK(error_code_of([&] { validate_reference_layout(s); }) == ErrorCode::validation);
}

TEST_CASE("reference study layout") {
  StudyConfig s;
  s.volumes = {{"r", "r.nii", "p", "CT", "real"}, {"x", "x.nii", "p", "CT", "mx"}, {"y", "y.nii", "p", "CT", "my"},
               {"x2", "x2.nii", "p", "CT", "mx"}};
  int q = 0;
  auto add = [&](int part, std::vector<std::string> v, bool sanity) {
    s.questions.push_back({"q" + std::to_string(++q), part, std::move(v), "t", sanity});
  };
  for (int i = 0; i < 7; ++i) add(1, {"r"}, false);
  for (int i = 0; i < 8; ++i) add(1, {"x"}, false);
  for (int i = 0; i < 15; ++i) add(2, {"x", "y"}, false);
  for (int i = 0; i < 3; ++i) add(2, {"x", "x"}, true);
  for (int i = 0; i < 15; ++i) add(3, {"r", "x", "y"}, false);
  for (int i = 0; i < 2; ++i) add(3, {"r", "x", "x2"}, true);
  CHECK(s.questions.size() == 50);
  CHECK_NOTHROW(validate_study(s));
  CHECK_NOTHROW(validate_reference_layout(s));
  s.questions.pop_back();
  CHECK(error_code_of([&] { validate_reference_layout(s); }) == ErrorCode::validation);
}

TEST_CASE("study json and public view") {
  const nlohmann::json j = {
      {"study_id", "s"},
      {"volumes", {{{"id", "v1"}, {"path", "vols/v1.nii.gz"}, {"patient_id", "p"}, {"modality", "CT"},
                    {"source", "real"}}}},
      {"questions", {{{"question_id", "q1"}, {"part", 1}, {"volume_ids", {"v1"}}, {"is_sanity", false}}}}};
  const StudyConfig s = study_from_json(j, "/base");
  CHECK(s.volumes[0].path == "/base/vols/v1.nii.gz");
  const auto pub = public_study_json(s);
  const std::string text = pub.dump();
  CHECK_FALSE(pub["volumes"][0].contains("source"));
  CHECK(text.find("patient") == std::string::npos);
  CHECK(text.find("is_sanity") == std::string::npos);
  CHECK(text.find("vols/") == std::string::npos);
  CHECK(pub["volumes"][0]["url"] == "/volumes/v1");
  CHECK(pub["questions"][0]["options"] == nlohmann::json({"real", "synthetic"}));
  auto bad = j;
  bad["questions"][0]["part"] = "one";
  CHECK(error_code_of([&] { (void)study_from_json(bad); }) == ErrorCode::configuration);
}

TEST_CASE("response csv round trip and rank parsing") {
  const TuringResponse r = resp("anon_1", "q6", 3, "2;1;3");
  const CsvTable t = parse_csv(std::string(kResponseHeader) + "\n" + response_csv_line(r) + "\n");
  const auto back = responses_from_csv(t);
  REQUIRE(back.size() == 1);
  CHECK(back[0].answer == "2;1;3");
  CHECK(back[0].part == 3);
  CHECK(parse_rank_answer("3;1;2") == std::array<int, 3>{3, 1, 2});
  for (const char* bad : {"1;1;2", "1;2", "1;2;3;", "0;1;2", "a;b;c", ""})
    CHECK(error_code_of([&] { (void)parse_rank_answer(bad); }) == ErrorCode::validation);
}

TEST_CASE("turing summaries on a scripted fixture") {
  const StudyConfig s = small_study();
  const std::vector<TuringResponse> rs = {
      resp("p1", "q1", 1, "real"),  resp("p1", "q2", 1, "synthetic"), resp("p1", "q3", 1, "real"),
      resp("p2", "q1", 1, "synthetic"), resp("p2", "q2", 1, "real"), resp("p2", "q3", 1, "real"),
      resp("p1", "q4", 2, "A"),     resp("p2", "q4", 2, "none"),      resp("p1", "q5", 2, "none", true),
      resp("p2", "q5", 2, "B", true), resp("p1", "q6", 3, "1;2;3"),   resp("p2", "q6", 3, "2;1;3"),
      resp("p1", "q7", 3, "2;1;3", true), resp("p2", "q7", 3, "1;2;3", true)};

  const Part1Summary p1 = turing_part1_summary(s, rs);
  CHECK(p1.overall.n == 6);
  CHECK(p1.overall.correct == 4);
  CHECK(p1.real.n == 4);
  CHECK(p1.real.correct == 3);
  CHECK(p1.synthetic.correct == 1);
  CHECK(p1.per_modality.at("MRI_T2f").accuracy() == 1.0);
  CHECK(p1.best_participant == "p1");
  CHECK(p1.worst_participant == "p2");
  CHECK(p1.participants[1].balanced_accuracy() == doctest::Approx(0.25));

  const Part2Summary p2 = turing_part2_summary(s, rs);
  REQUIRE(p2.pairs.size() == 1);
  CHECK(p2.pairs[0].model_a == "m-a");
  CHECK(p2.pairs[0].model_b == "m-b");
  CHECK(p2.pairs[0].prefer_b == 1);
  CHECK(p2.pairs[0].no_difference == 1);
  CHECK(p2.pairs[0].pct_b() == 50.0);
  CHECK(p2.sanity_n == 2);
  CHECK(p2.sanity_violations == 1);
  CHECK(p2.sanity_violation_rate() == 0.5);

  const Part3Summary p3 = turing_part3_summary(s, rs);
  CHECK(p3.triplets == 2);
  REQUIRE(p3.per_source.size() == 3);
  CHECK(p3.per_source[0].source == "m-a");
  CHECK(p3.per_source[0].pct(1) == 50.0);
  CHECK(p3.per_source[0].pct(2) == 50.0);
  CHECK(p3.per_source[2].source == "real");
  CHECK(p3.per_source[2].counts[0] == 1);
  REQUIRE(p3.sanity.size() == 2);
  CHECK(p3.sanity[0].violation == false);
  CHECK(p3.sanity[1].rank_a == 1);
  CHECK(p3.sanity[1].rank_b == 3);
  CHECK(p3.sanity[1].violation);
  CHECK(p3.sanity_violations() == 1);

  CHECK(part1_csv(p1).rfind("group,key,n,correct,accuracy\n", 0) == 0);
  CHECK(part2_csv(p2).find("m-a") != std::string::npos);
  CHECK(part3_csv(p3).find("real") != std::string::npos);

  const std::vector<TuringResponse> wrong = {resp("p1", "q4", 1, "real")};
  CHECK(error_code_of([&] { (void)turing_part1_summary(s, wrong); }) == ErrorCode::validation);
}
