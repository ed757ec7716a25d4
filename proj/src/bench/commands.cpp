#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "voxbench/bench.hpp"
#include "voxbench/metrics.hpp"
#include "voxbench/models.hpp"
#include "voxbench/nifti.hpp"

namespace voxbench::bench {

using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::format, path.string() + ": " + e.what());
  }
}

std::string task_label(const DatasetManifest& m) {
  return std::string(to_string(m.source_modality)) + "->" + std::string(to_string(m.target_modality));
}

DatasetManifest load_manifest(const ExperimentConfig& cfg) {
  DatasetManifest m = read_manifest(cfg.manifest_path);
  if (cfg.task && (cfg.task->source != m.source_modality || cfg.task->target != m.target_modality))
    throw Error(ErrorCode::configuration, "task: config task does not match manifest task " + task_label(m));
  return m;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; per-index errors are
/// captured as messages.
std::vector<std::string> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), std::max<std::size_t>(n, 1));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return errors;
}

RunReport collect(const std::vector<std::string>& ids, const std::vector<std::string>& errors, std::ostream& log,
                  const char* verb) {
  RunReport r;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) {
      r.succeeded.push_back(ids[i]);
      log << verb << ' ' << ids[i] << '\n';
    } else {
      r.failed.emplace_back(ids[i], errors[i]);
    }
  }
  for (const auto& [id, msg] : r.failed) std::cerr << "FAILED " << id << ": " << msg << '\n';
  return r;
}

Volume load_volume(const ExperimentConfig& cfg, const SubjectEntry& s, const fs::path& path, Modality m) {
  Volume v = read_nifti(path, m);
  if (cfg.suv == SuvConversion::enhance && m == Modality::PET) {
    if (!s.weight_kg || !s.injected_dose_MBq)
      throw Error(ErrorCode::configuration, s.subject_id + ": SUV conversion needs weight_kg and injected_dose_MBq");
    v = suv_convert_enhance(v, *s.weight_kg, *s.injected_dose_MBq);
  }
  return v;
}

std::vector<std::string> test_subjects(const ExperimentConfig& cfg) {
  const Layout layout{cfg.output_dir};
  if (!fs::exists(layout.split()))
    throw Error(ErrorCode::completeness, "missing " + layout.split().string() + "; run preprocess first");
  return read_json(layout.split()).at("test").get<std::vector<std::string>>();
}

}  // namespace

void cmd_validate(const ExperimentConfig& cfg) {
  const DatasetManifest m = load_manifest(cfg);
  for (const auto& s : m.subjects) {
    for (const fs::path* p : {&s.source_path, &s.target_path})
      if (!fs::exists(*p)) throw Error(ErrorCode::configuration, s.subject_id + ": missing file " + p->string());
    for (const auto* p : {&s.body_mask_path, &s.lesion_mask_path})
      if (*p && !fs::exists(**p)) throw Error(ErrorCode::configuration, s.subject_id + ": missing file " + (*p)->string());
  }
  (void)split_subjects(m, cfg.split);
  if (!ModelRegistry::with_builtins().contains(cfg.model.name))
    throw Error(ErrorCode::configuration, "model.name: unknown model '" + cfg.model.name + "'");
}

RunReport cmd_preprocess(const ExperimentConfig& cfg, int jobs, std::ostream& log) {
  const DatasetManifest m = load_manifest(cfg);
  const Layout layout{cfg.output_dir};
  fs::create_directories(layout.preprocessed());
  const Split split = split_subjects(m, cfg.split);
  write_text(layout.split(), to_json(split).dump(2) + "\n");

  std::vector<std::string> ids;
  for (const auto& s : m.subjects) ids.push_back(s.subject_id);
  const auto errors = parallel_for(m.subjects.size(), jobs, [&](std::size_t i) {
    const SubjectEntry& s = m.subjects[i];
    const Volume src = load_volume(cfg, s, s.source_path, m.source_modality);
    const Volume tgt = load_volume(cfg, s, s.target_path, m.target_modality);
    std::optional<Mask> body;
    if (s.body_mask_path) body = read_mask_nifti(*s.body_mask_path);
    const PipelineResult r = run_pipeline(src, tgt, body ? &*body : nullptr, cfg.pipeline);
    write_nifti(r.pair.source, layout.source(s.subject_id));
    write_nifti(r.pair.target, layout.target(s.subject_id));
    write_record(r.source_record, layout.source_record(s.subject_id));
    write_record(r.target_record, layout.target_record(s.subject_id));
    write_mask_nifti(r.foreground, r.pair.source.geometry(), layout.foreground(s.subject_id));
  });
  return collect(ids, errors, log, "preprocessed");
}

RunReport cmd_infer(const ExperimentConfig& cfg, int jobs, std::ostream& log) {
  const DatasetManifest m = load_manifest(cfg);
  const Layout layout{cfg.output_dir};
  const std::vector<std::string> ids = test_subjects(cfg);
  const ModelRegistry registry = ModelRegistry::with_builtins();
  if (!registry.contains(cfg.model.name)) throw Error(ErrorCode::lookup, "unknown model: " + cfg.model.name);
  fs::create_directories(layout.predictions(cfg.model.name));
  const Patch importance = gaussian_importance(cfg.patch.size, cfg.patch.sigma_scale);

  // Subjects run one at a time; patches inside a subject use the jobs.
  std::vector<std::string> errors(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& sid = ids[i];
    try {
      const Volume src = read_nifti(layout.source(sid), m.source_modality);
      const Volume tgt = read_nifti(layout.target(sid), m.target_modality);
      const TransformRecord target_record = read_record(layout.target_record(sid));
      if (!(src.dims() == tgt.dims())) throw Error(ErrorCode::shape, "preprocessed source/target dims differ");
      const PatchGrid grid = build_patch_grid(src.dims(), cfg.patch.size, cfg.patch.overlap);

      ModelContext ctx;
      ctx.target_modality = m.target_modality;
      ctx.target_record = &target_record;
      ctx.target_provider = [&](const Index3& o) { return extract_patch(tgt.voxels(), o, cfg.patch.size); };
      ctx.params = cfg.model.params;
      if (!ctx.params.contains("seed")) ctx.params["seed"] = cfg.seed;
      const auto model = registry.get(cfg.model.name, ctx);
      const int patch_jobs = model->descriptor().thread_safe ? jobs : 1;

      Grid3<float> out = sliding_window_infer(
          src.voxels(), grid, importance, [&](const Patch& p, const Index3& o) { return model->translate(p, o); },
          patch_jobs);
      const Volume pred(std::move(out), src.geometry(), m.target_modality);
      write_nifti(invert_to_original(pred, target_record), layout.prediction(cfg.model.name, sid));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  return collect(ids, errors, log, "inferred");
}

RunReport cmd_evaluate(const ExperimentConfig& cfg, int jobs, std::ostream& log) {
  const DatasetManifest m = load_manifest(cfg);
  const Layout layout{cfg.output_dir};
  const std::vector<std::string> ids = test_subjects(cfg);
  for (const auto& sid : ids)
    if (!fs::exists(layout.prediction(cfg.model.name, sid)))
      throw Error(ErrorCode::completeness, "missing prediction for " + sid + " (" +
                                               layout.prediction(cfg.model.name, sid).string() + ")");

  std::vector<MetricRow> rows(ids.size());
  std::vector<std::vector<LesionRecord>> lesions(ids.size());
  const auto errors = parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const SubjectEntry& s = m.subject(ids[i]);
    const Volume pred = read_nifti(layout.prediction(cfg.model.name, ids[i]), m.target_modality);
    const Volume ref = load_volume(cfg, s, s.target_path, m.target_modality);
    if (!(pred.dims() == ref.dims()))
      throw Error(ErrorCode::shape, "prediction dims " + to_string(pred.dims()) + " differ from reference " +
                                        to_string(ref.dims()));
    const double range = data_range_for(m.target_modality, ref);
    rows[i] = evaluate_pair(ids[i], pred, ref, range);
    if (cfg.lesions && s.lesion_mask_path) {
      lesions[i] = lesion_analysis(pred, ref, read_mask_nifti(*s.lesion_mask_path), range);
      for (auto& l : lesions[i]) l.subject_id = ids[i];
    }
  });
  RunReport report = collect(ids, errors, log, "evaluated");

  std::vector<MetricRow> ok_rows;
  std::vector<LesionRecord> all_lesions;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!errors[i].empty()) continue;
    ok_rows.push_back(rows[i]);
    all_lesions.insert(all_lesions.end(), lesions[i].begin(), lesions[i].end());
  }
  if (ok_rows.empty()) return report;
  const MetricReport r = make_report(std::move(ok_rows));
  if (r.psnr.excluded > 0)
    log << "warning: " << r.psnr.excluded << " infinite PSNR value(s) excluded from the aggregate\n";
  const fs::path dir = layout.evaluation(cfg.model.name);
  write_text(dir / "metrics.csv", metrics_csv(r));
  json agg = aggregate_json(r);
  agg["model"] = cfg.model.name;
  agg["dataset_id"] = m.dataset_id;
  agg["task"] = task_label(m);
  write_text(dir / "aggregate.json", agg.dump(2) + "\n");
  assign_size_groups(all_lesions);
  if (!all_lesions.empty()) write_text(dir / "lesions.csv", lesions_csv(all_lesions));
  return report;
}

void cmd_rank(const RankOptions& opts) {
  MetricTable table;
  if (opts.table) {
    table = metric_table_from_csv(read_csv(*opts.table), opts.metric);
    for (std::size_t t = 0; t < table.tasks.size(); ++t)
      for (std::size_t j = 0; j < table.models.size(); ++j)
        if (std::isnan(table.values[t][j]))
          throw Error(ErrorCode::alignment, "model " + table.models[j] + " has no result for task " + table.tasks[t]);
  } else {
    std::map<std::string, std::map<std::string, double>> by_model;  // model -> task -> mean
    for (const auto& dir : opts.result_dirs) {
      const json agg = read_json(dir / "aggregate.json");
      const std::string model = agg.at("model").get<std::string>();
      const std::string task = agg.at("dataset_id").get<std::string>() + ":" + agg.at("task").get<std::string>();
      if (!agg.contains(opts.metric)) throw Error(ErrorCode::configuration, "unknown metric " + opts.metric);
      const json& mean = agg.at(opts.metric).at("mean");
      if (!mean.is_number())
        throw Error(ErrorCode::completeness, dir.string() + ": no finite " + opts.metric + " mean");
      if (!by_model[model].emplace(task, mean.get<double>()).second)
        throw Error(ErrorCode::conflict, "duplicate result for " + model + " on " + task);
    }
    std::set<std::string> tasks;
    for (const auto& [model, t] : by_model)
      for (const auto& [task, v] : t) tasks.insert(task);
    for (const auto& [model, t] : by_model) {
      if (t.size() != tasks.size()) throw Error(ErrorCode::alignment, "model " + model + " does not cover every task");
      table.models.push_back(model);
    }
    table.tasks.assign(tasks.begin(), tasks.end());
    for (const auto& task : table.tasks) {
      std::vector<double> row;
      for (const auto& model : table.models) row.push_back(by_model[model][task]);
      table.values.push_back(std::move(row));
    }
  }
  if (table.models.size() < 2) throw Error(ErrorCode::alignment, "ranking needs at least two models");
  if (table.tasks.empty()) throw Error(ErrorCode::alignment, "ranking needs at least one shared task");
  const RankTable ranks = rank_models(table, opts.higher_is_better);
  const auto pairs = pairwise_table(ranks, opts.alpha);
  write_text(opts.output_dir / "ranks.csv", rank_table_csv(ranks));
  write_text(opts.output_dir / "pairwise.csv", pairwise_csv(pairs, ranks.models));
  json pj = json::array();
  for (const auto& row : pairs)
    for (const auto& c : row) {
      if (c.row == c.col) continue;
      pj.push_back({{"row", c.row},
                    {"col", c.col},
                    {"n_dominated", c.n_dominated},
                    {"n_ties", c.n_ties},
                    {"p_one_tailed", c.p ? json(*c.p) : json(nullptr)},
                    {"significant", c.significant}});
    }
  write_text(opts.output_dir / "pairwise.json",
             json{{"schema_version", 1}, {"metric", opts.metric}, {"alpha", opts.alpha}, {"tasks", ranks.tasks}, {"cells", pj}}.dump(2) + "\n");
}

void cmd_phantom(const PhantomOptions& opts) {
  if (opts.subjects < 1) throw Error(ErrorCode::parameter, "need at least one subject");
  fs::create_directories(opts.output_dir / "volumes");
  DatasetManifest m;
  m.dataset_id = "phantom";
  m.source_modality = opts.task.source;
  m.target_modality = opts.task.target;
  m.district = District::head_neck;
  for (int i = 0; i < opts.subjects; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "phantom_%03d", i);
    const std::string sid = buf;
    const PhantomCase c =
        generate_phantom_pair(opts.seed * 1000003ULL + static_cast<std::uint64_t>(i), opts.dims, opts.spacing, opts.task);
    const fs::path rel = fs::path("volumes");
    write_nifti(c.source, opts.output_dir / rel / (sid + "_source.nii.gz"));
    write_nifti(c.target, opts.output_dir / rel / (sid + "_target.nii.gz"));
    write_mask_nifti(c.body, c.source.geometry(), opts.output_dir / rel / (sid + "_body.nii.gz"));
    write_mask_nifti(c.lesions, c.source.geometry(), opts.output_dir / rel / (sid + "_lesions.nii.gz"));
    SubjectEntry e;
    e.subject_id = sid;
    e.source_path = rel / (sid + "_source.nii.gz");
    e.target_path = rel / (sid + "_target.nii.gz");
    e.body_mask_path = rel / (sid + "_body.nii.gz");
    e.lesion_mask_path = rel / (sid + "_lesions.nii.gz");
    m.subjects.push_back(std::move(e));
  }
  write_manifest(m, opts.output_dir / "manifest.json");
  const json cfg{{"schema_version", 1},
                 {"manifest", "manifest.json"},
                 {"output_dir", "out"},
                 {"seed", opts.seed},
                 {"task", {{"source", to_string(opts.task.source)}, {"target", to_string(opts.task.target)}}},
                 {"split", {{"test_fraction", 0.25}, {"validation_count", opts.validation_count}}},
                 {"pipeline",
                  {{"target_spacing", {1.0, 1.0, 1.0}},
                   {"source_threshold", 0.1},
                   {"target_threshold", 0.1},
                   {"pad_multiple", 96}}},
                 {"patch", {{"size", {96, 96, 96}}, {"overlap", 0.625}, {"sigma_scale", 0.125}}},
                 {"model", {{"name", "identity"}, {"params", json::object()}}},
                 {"evaluation", {{"lesions", true}}}};
  write_text(opts.output_dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace voxbench::bench
