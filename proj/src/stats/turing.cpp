#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "voxbench/error.hpp"
#include "voxbench/stats.hpp"

namespace voxbench {

namespace fs = std::filesystem;
using nlohmann::json;

const StudyVolume& StudyConfig::volume(std::string_view id) const {
  for (const auto& v : volumes)
    if (v.id == id) return v;
  throw Error(ErrorCode::lookup, "unknown volume: " + std::string(id));
}

const StudyQuestion& StudyConfig::question(std::string_view id) const {
  for (const auto& q : questions)
    if (q.question_id == id) return q;
  throw Error(ErrorCode::lookup, "unknown question: " + std::string(id));
}

namespace {

std::string str_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string())
    throw Error(ErrorCode::configuration, where + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

}  // namespace

StudyConfig study_from_json(const json& j, const fs::path& base_dir) {
  StudyConfig s;
  s.study_id = str_field(j, "study_id", "study");
  if (!j.contains("volumes") || !j["volumes"].is_array())
    throw Error(ErrorCode::configuration, "study.volumes: expected an array");
  if (!j.contains("questions") || !j["questions"].is_array())
    throw Error(ErrorCode::configuration, "study.questions: expected an array");
  for (std::size_t i = 0; i < j["volumes"].size(); ++i) {
    const json& v = j["volumes"][i];
    const std::string where = "study.volumes[" + std::to_string(i) + "]";
    StudyVolume sv;
    sv.id = str_field(v, "id", where);
    fs::path p(str_field(v, "path", where));
    sv.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    sv.patient_id = str_field(v, "patient_id", where);
    sv.modality = str_field(v, "modality", where);
    sv.source = str_field(v, "source", where);
    s.volumes.push_back(std::move(sv));
  }
  for (std::size_t i = 0; i < j["questions"].size(); ++i) {
    const json& q = j["questions"][i];
    const std::string where = "study.questions[" + std::to_string(i) + "]";
    StudyQuestion sq;
    sq.question_id = str_field(q, "question_id", where);
    if (!q.contains("part") || !q["part"].is_number_integer())
      throw Error(ErrorCode::configuration, where + ".part: expected an integer");
    sq.part = q["part"].get<int>();
    if (!q.contains("volume_ids") || !q["volume_ids"].is_array())
      throw Error(ErrorCode::configuration, where + ".volume_ids: expected an array");
    for (const auto& id : q["volume_ids"]) {
      if (!id.is_string()) throw Error(ErrorCode::configuration, where + ".volume_ids: expected strings");
      sq.volume_ids.push_back(id.get<std::string>());
    }
    sq.task = q.value("task", std::string());
    sq.is_sanity = q.value("is_sanity", false);
    s.questions.push_back(std::move(sq));
  }
  return s;
}

StudyConfig read_study(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read study " + path.string());
  try {
    return study_from_json(json::parse(in), path.parent_path());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::configuration, path.string() + ": " + e.what());
  }
}

json public_study_json(const StudyConfig& s) {
  json j;
  j["study_id"] = s.study_id;
  j["volumes"] = json::array();
  for (const auto& v : s.volumes)
    j["volumes"].push_back({{"id", v.id}, {"modality", v.modality}, {"url", "/volumes/" + v.id}});
  j["questions"] = json::array();
  for (const auto& q : s.questions) {
    json e{{"question_id", q.question_id}, {"part", q.part}, {"volume_ids", q.volume_ids}};
    if (!q.task.empty()) e["task"] = q.task;
    if (q.part == 1) e["options"] = {"real", "synthetic"};
    if (q.part == 2) e["options"] = {"A", "B", "none"};
    if (q.part == 3) e["options"] = {1, 2, 3};
    j["questions"].push_back(std::move(e));
  }
  return j;
}

void validate_study(const StudyConfig& s) {
  std::set<std::string> vol_ids, q_ids;
  for (const auto& v : s.volumes)
    if (!vol_ids.insert(v.id).second) throw Error(ErrorCode::validation, "duplicate volume id " + v.id);
  for (const auto& q : s.questions) {
    const std::string& id = q.question_id;
    if (!q_ids.insert(id).second) throw Error(ErrorCode::validation, "duplicate question id " + id);
    if (q.part < 1 || q.part > 3) throw Error(ErrorCode::validation, id + ": part must be 1, 2 or 3");
    if (q.volume_ids.size() != static_cast<std::size_t>(q.part))
      throw Error(ErrorCode::validation, id + ": part " + std::to_string(q.part) + " needs " + std::to_string(q.part) +
                                             " volumes");
    std::vector<const StudyVolume*> vols;
    for (const auto& vid : q.volume_ids) {
      if (!vol_ids.count(vid)) throw Error(ErrorCode::validation, id + ": unknown volume " + vid);
      vols.push_back(&s.volume(vid));
    }
    for (const auto* v : vols)
      if (v->patient_id != vols.front()->patient_id)
        throw Error(ErrorCode::validation, id + ": volumes come from different patients");
    if (q.part == 1 && q.is_sanity) throw Error(ErrorCode::validation, id + ": part 1 has no sanity questions");
    if (q.part == 2) {
      const bool identical = vols[0]->source == vols[1]->source && vols[0]->path == vols[1]->path;
      if (q.is_sanity && !identical) throw Error(ErrorCode::validation, id + ": sanity pair must show one image twice");
      if (!q.is_sanity && vols[0]->source == vols[1]->source)
        throw Error(ErrorCode::validation, id + ": pair compares a source with itself");
    }
    if (q.part == 3) {
      std::map<std::string, int> counts;
      for (const auto* v : vols) ++counts[v->source];
      if (q.is_sanity) {
        const bool ok = counts.size() == 2 && counts.count("real") && counts["real"] == 1;
        if (!ok) throw Error(ErrorCode::validation, id + ": sanity triplet needs one real and two same-model outputs");
      } else if (counts.size() != 3) {
        throw Error(ErrorCode::validation, id + ": triplet sources must be distinct");
      }
    }
  }
}

void validate_reference_layout(const StudyConfig& s) {
  int n[4] = {0, 0, 0, 0}, sanity[4] = {0, 0, 0, 0}, real = 0, synthetic = 0;
  for (const auto& q : s.questions) {
    if (q.part < 1 || q.part > 3) throw Error(ErrorCode::validation, q.question_id + ": bad part");
    ++n[q.part];
    if (q.is_sanity) ++sanity[q.part];
    if (q.part == 1) (s.volume(q.volume_ids.at(0)).source == "real" ? real : synthetic)++;
  }
  auto expect = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::validation, what);
  };
  expect(n[1] == 15, "part 1 needs 15 questions, has " + std::to_string(n[1]));
  expect(real == 7 && synthetic == 8, "part 1 needs 7 real and 8 synthetic images");
  expect(n[2] == 18 && sanity[2] == 3, "part 2 needs 18 questions including 3 sanity checks");
  expect(n[3] == 17 && sanity[3] == 2, "part 3 needs 17 questions including 2 sanity checks");
}

std::vector<TuringResponse> responses_from_csv(const CsvTable& csv) {
  const std::size_t pi = csv.column("participant_id"), qi = csv.column("question_id"), pa = csv.column("part"),
                    ai = csv.column("answer"), si = csv.column("is_sanity"), ti = csv.column("timestamp");
  std::vector<TuringResponse> out;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    TuringResponse t;
    t.participant_id = row.at(pi);
    t.question_id = row.at(qi);
    const std::string& part = row.at(pa);
    if (part != "1" && part != "2" && part != "3")
      throw Error(ErrorCode::validation, "row " + std::to_string(r + 2) + ": bad part '" + part + "'");
    t.part = part[0] - '0';
    t.answer = row.at(ai);
    t.is_sanity = row.at(si) == "true" || row.at(si) == "1";
    t.timestamp = row.at(ti);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TuringResponse> read_responses(const fs::path& path) { return responses_from_csv(read_csv(path)); }

std::string response_csv_line(const TuringResponse& r) {
  return csv_line({r.participant_id, r.question_id, std::to_string(r.part), r.answer, r.is_sanity ? "true" : "false",
                   r.timestamp});
}

std::array<int, 3> parse_rank_answer(std::string_view answer) {
  std::array<int, 3> ranks{};
  std::size_t k = 0;
  std::string cur;
  auto flush = [&] {
    if (k >= 3 || cur.size() != 1 || cur[0] < '1' || cur[0] > '3')
      throw Error(ErrorCode::validation, "rank answer must be three ranks 1-3: '" + std::string(answer) + "'");
    ranks[k++] = cur[0] - '0';
    cur.clear();
  };
  for (char c : answer) {
    if (c == ';')
      flush();
    else
      cur.push_back(c);
  }
  flush();
  if (k != 3) throw Error(ErrorCode::validation, "rank answer needs three entries");
  std::array<int, 3> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<int, 3>{1, 2, 3})
    throw Error(ErrorCode::validation, "rank answer is not a permutation: '" + std::string(answer) + "'");
  return ranks;
}

Part1Summary turing_part1_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses) {
  Part1Summary s;
  std::map<std::string, ParticipantAccuracy> per;
  for (const auto& r : responses) {
    if (r.part != 1) continue;
    const StudyQuestion& q = study.question(r.question_id);
    if (q.part != 1) throw Error(ErrorCode::validation, r.question_id + " is not a part-1 question");
    if (r.answer != "real" && r.answer != "synthetic")
      throw Error(ErrorCode::validation, r.question_id + ": part-1 answer must be real or synthetic");
    const StudyVolume& v = study.volume(q.volume_ids.at(0));
    const bool is_real = v.source == "real";
    const bool correct = (r.answer == "real") == is_real;
    auto bump = [&](Tally& t) {
      ++t.n;
      t.correct += correct ? 1 : 0;
    };
    bump(s.overall);
    bump(is_real ? s.real : s.synthetic);
    bump(s.per_modality[v.modality]);
    ParticipantAccuracy& p = per[r.participant_id];
    p.participant_id = r.participant_id;
    bump(p.overall);
    bump(is_real ? p.real : p.synthetic);
  }
  for (auto& [id, p] : per) s.participants.push_back(p);
  if (!s.participants.empty()) {
    const ParticipantAccuracy* best = &s.participants.front();
    const ParticipantAccuracy* worst = best;
    for (const auto& p : s.participants) {
      if (p.balanced_accuracy() > best->balanced_accuracy()) best = &p;
      if (p.balanced_accuracy() < worst->balanced_accuracy()) worst = &p;
    }
    s.best_participant = best->participant_id;
    s.worst_participant = worst->participant_id;
  }
  return s;
}

Part2Summary turing_part2_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses) {
  Part2Summary s;
  std::map<std::tuple<std::string, std::string, std::string>, PairPreference> pairs;
  for (const auto& r : responses) {
    if (r.part != 2) continue;
    const StudyQuestion& q = study.question(r.question_id);
    if (q.part != 2) throw Error(ErrorCode::validation, r.question_id + " is not a part-2 question");
    if (r.answer != "A" && r.answer != "B" && r.answer != "none")
      throw Error(ErrorCode::validation, r.question_id + ": part-2 answer must be A, B or none");
    if (q.is_sanity) {
      ++s.sanity_n;
      if (r.answer != "none") ++s.sanity_violations;
      continue;
    }
    std::string a = study.volume(q.volume_ids[0]).source, b = study.volume(q.volume_ids[1]).source;
    std::string answer = r.answer;
    if (b < a) {
      std::swap(a, b);
      if (answer == "A")
        answer = "B";
      else if (answer == "B")
        answer = "A";
    }
    PairPreference& p = pairs[{q.task, a, b}];
    p.task = q.task;
    p.model_a = a;
    p.model_b = b;
    ++p.n;
    if (answer == "A")
      ++p.prefer_a;
    else if (answer == "B")
      ++p.prefer_b;
    else
      ++p.no_difference;
  }
  for (auto& [k, p] : pairs) s.pairs.push_back(p);
  return s;
}

std::size_t Part3Summary::sanity_violations() const {
  return static_cast<std::size_t>(std::count_if(sanity.begin(), sanity.end(), [](const SanityTriplet& t) { return t.violation; }));
}

Part3Summary turing_part3_summary(const StudyConfig& study, const std::vector<TuringResponse>& responses) {
  Part3Summary s;
  std::map<std::string, RankDistribution> dist;
  for (const auto& r : responses) {
    if (r.part != 3) continue;
    const StudyQuestion& q = study.question(r.question_id);
    if (q.part != 3) throw Error(ErrorCode::validation, r.question_id + " is not a part-3 question");
    const std::array<int, 3> ranks = parse_rank_answer(r.answer);
    std::array<std::string, 3> sources;
    for (std::size_t i = 0; i < 3; ++i) sources[i] = study.volume(q.volume_ids.at(i)).source;
    if (q.is_sanity) {
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
          if (sources[i] == sources[j]) {
            SanityTriplet t{r.participant_id, r.question_id, ranks[i], ranks[j], std::abs(ranks[i] - ranks[j]) > 1};
            s.sanity.push_back(t);
          }
      continue;
    }
    ++s.triplets;
    for (std::size_t i = 0; i < 3; ++i) {
      RankDistribution& d = dist[sources[i]];
      d.source = sources[i];
      ++d.counts[static_cast<std::size_t>(ranks[i] - 1)];
    }
  }
  for (auto& [k, d] : dist) s.per_source.push_back(d);
  return s;
}

std::string part1_csv(const Part1Summary& s) {
  std::ostringstream out;
  out << "group,key,n,correct,accuracy\n";
  auto row = [&](const std::string& g, const std::string& k, const Tally& t) {
    out << csv_line({g, k, std::to_string(t.n), std::to_string(t.correct), format_double(t.accuracy())}) << '\n';
  };
  row("overall", "all", s.overall);
  row("class", "real", s.real);
  row("class", "synthetic", s.synthetic);
  for (const auto& [m, t] : s.per_modality) row("modality", m, t);
  for (const auto& p : s.participants) row("participant", p.participant_id, p.overall);
  for (const auto& p : s.participants)
    out << csv_line({"participant_balanced", p.participant_id, std::to_string(p.overall.n),
                     std::to_string(p.overall.correct), format_double(p.balanced_accuracy())})
        << '\n';
  return out.str();
}

std::string part2_csv(const Part2Summary& s) {
  std::ostringstream out;
  out << "task,model_a,model_b,n,pct_a,pct_b,pct_none\n";
  for (const auto& p : s.pairs)
    out << csv_line({p.task, p.model_a, p.model_b, std::to_string(p.n), format_double(p.pct_a()),
                     format_double(p.pct_b()), format_double(p.pct_none())})
        << '\n';
  return out.str();
}

std::string part3_csv(const Part3Summary& s) {
  std::ostringstream out;
  out << "source,n,pct_rank1,pct_rank2,pct_rank3\n";
  for (const auto& d : s.per_source)
    out << csv_line({d.source, std::to_string(d.n()), format_double(d.pct(1)), format_double(d.pct(2)),
                     format_double(d.pct(3))})
        << '\n';
  return out.str();
}

}  // namespace voxbench
