#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "voxbench/bench.hpp"

namespace vb = voxbench;
namespace bench = voxbench::bench;

namespace {

bench::TuringServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

vb::Task parse_task(const std::string& s) {
  const auto arrow = s.find("->");
  if (arrow == std::string::npos) throw vb::Error(vb::ErrorCode::parameter, "task must look like CBCT->CT");
  return {vb::parse_modality(s.substr(0, arrow)), vb::parse_modality(s.substr(arrow + 2))};
}

int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxbench: volumetric image-to-image translation benchmark"};
  app.require_subcommand(1);
  int jobs = default_jobs();
  app.add_option("-j,--jobs", jobs, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);

  std::string config;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config, "Experiment config JSON")->required(); };

  auto* validate = app.add_subcommand("validate", "Check a config and its manifest");
  add_config(validate);
  auto* preprocess = app.add_subcommand("preprocess", "Preprocess every subject");
  add_config(preprocess);
  auto* infer = app.add_subcommand("infer", "Run the configured model on the test split");
  add_config(infer);
  std::string model_override;
  infer->add_option("-m,--model", model_override, "Override model.name");
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against references");
  add_config(evaluate);
  evaluate->add_option("-m,--model", model_override, "Override model.name");

  bench::RankOptions rank_opts;
  std::vector<std::string> result_dirs;
  std::string table_path;
  std::string direction = "auto";
  auto* rank = app.add_subcommand("rank", "Rank models and run pairwise Wilcoxon tests");
  rank->add_option("results", result_dirs, "evaluation/<model> directories");
  rank->add_option("--table", table_path, "Long-format CSV (task,model,<metric>) instead of result directories");
  rank->add_option("--metric", rank_opts.metric, "Metric column")->capture_default_str();
  rank->add_option("--direction", direction, "higher, lower or auto")
      ->check(CLI::IsMember({"auto", "higher", "lower"}))
      ->capture_default_str();
  rank->add_option("--alpha", rank_opts.alpha, "Significance level")->capture_default_str();
  std::string rank_out;
  rank->add_option("-o,--out", rank_out, "Output directory")->required();

  bench::PhantomOptions ph;
  std::string ph_out, ph_task = "CBCT->CT";
  std::vector<std::int64_t> ph_dims;
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic phantom dataset with manifest and config");
  phantom->add_option("-o,--out", ph_out, "Output directory")->required();
  phantom->add_option("-n,--subjects", ph.subjects, "Number of subjects")->capture_default_str();
  phantom->add_option("--dims", ph_dims, "Volume dims x y z")->expected(3);
  phantom->add_option("--task", ph_task, "Task as SOURCE->TARGET")->capture_default_str();
  phantom->add_option("--seed", ph.seed, "Seed")->capture_default_str();
  phantom->add_option("--validation-count", ph.validation_count, "Validation subjects in the emitted config")
      ->capture_default_str();

  std::string study_path, responses_path, static_dir, out_dir;
  bench::ServerOptions srv;
  auto* serve = app.add_subcommand("turing-serve", "Serve a reader study");
  serve->add_option("-s,--study", study_path, "Study JSON")->required();
  serve->add_option("-r,--responses", responses_path, "Responses CSV (appended)")->required();
  serve->add_option("--host", srv.host)->capture_default_str();
  serve->add_option("-p,--port", srv.port)->capture_default_str();
  serve->add_option("--static", static_dir, "Directory with client assets");
  auto* analyze = app.add_subcommand("turing-analyze", "Summarize reader-study responses");
  analyze->add_option("-s,--study", study_path, "Study JSON")->required();
  analyze->add_option("-r,--responses", responses_path, "Responses CSV")->required();
  analyze->add_option("-o,--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto load = [&] {
      bench::ExperimentConfig cfg = bench::load_config(config);
      if (!model_override.empty()) cfg.model.name = model_override;
      return cfg;
    };
    bench::RunReport report;
    if (*validate) {
      bench::cmd_validate(load());
      std::cout << "config ok\n";
      return 0;
    } else if (*preprocess) {
      report = bench::cmd_preprocess(load(), jobs, std::cout);
    } else if (*infer) {
      report = bench::cmd_infer(load(), jobs, std::cout);
    } else if (*evaluate) {
      report = bench::cmd_evaluate(load(), jobs, std::cout);
    } else if (*rank) {
      for (const auto& d : result_dirs) rank_opts.result_dirs.emplace_back(d);
      if (!table_path.empty()) rank_opts.table = table_path;
      if (rank_opts.result_dirs.empty() == !rank_opts.table)
        throw vb::Error(vb::ErrorCode::parameter, "give either result directories or --table");
      rank_opts.higher_is_better = direction == "auto" ? rank_opts.metric != "nmse" : direction == "higher";
      rank_opts.output_dir = rank_out;
      bench::cmd_rank(rank_opts);
      return 0;
    } else if (*phantom) {
      ph.output_dir = ph_out;
      ph.task = parse_task(ph_task);
      if (!ph_dims.empty()) ph.dims = vb::Dims{ph_dims[0], ph_dims[1], ph_dims[2]};
      bench::cmd_phantom(ph);
      return 0;
    } else if (*serve) {
      srv.responses_csv = responses_path;
      if (!static_dir.empty()) srv.static_dir = static_dir;
      bench::TuringServer server(vb::read_study(study_path), srv);
      const int port = server.bind();
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << srv.host << ":" << port << std::endl;
      server.serve();
      g_server = nullptr;
      return 0;
    } else if (*analyze) {
      bench::cmd_turing_analyze(vb::read_study(study_path), responses_path, out_dir);
      return 0;
    }
    return report.exit_code();
  } catch (const vb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
