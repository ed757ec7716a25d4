#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <regex>

#include "httplib.h"
#include "voxbench/bench.hpp"

namespace voxbench::bench {

using nlohmann::json;

namespace {

const std::regex kToken("[A-Za-z0-9_-]{1,64}");

std::string token_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorCode::validation, std::string(key) + ": expected a string");
  std::string v = j[key].get<std::string>();
  if (!std::regex_match(v, kToken))
    throw Error(ErrorCode::validation, std::string(key) + ": must match [A-Za-z0-9_-]{1,64}");
  return v;
}

std::string rank_answer(const json& a) {
  std::string s;
  if (a.is_string()) {
    s = a.get<std::string>();
  } else if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_integer()) throw Error(ErrorCode::validation, "answer: ranks must be integers");
      s += (i ? ";" : "") + std::to_string(a[i].get<int>());
    }
  } else {
    throw Error(ErrorCode::validation, "answer: expected a rank array or string");
  }
  (void)parse_rank_answer(s);
  return s;
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"error", msg}}.dump(), "application/json");
}

}  // namespace

std::string iso_timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

TuringResponse parse_response_body(const StudyConfig& study, const std::string& body, const std::string& timestamp) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::validation, "body is not valid JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::validation, "body must be a JSON object");
  TuringResponse r;
  r.participant_id = token_field(j, "participant_id");
  r.question_id = token_field(j, "question_id");
  const StudyQuestion* q = nullptr;
  for (const auto& cand : study.questions)
    if (cand.question_id == r.question_id) q = &cand;
  if (!q) throw Error(ErrorCode::validation, "unknown question " + r.question_id);
  if (!j.contains("part") || !j["part"].is_number_integer() || j["part"].get<int>() != q->part)
    throw Error(ErrorCode::validation, "part: expected " + std::to_string(q->part));
  r.part = q->part;
  if (!j.contains("answer")) throw Error(ErrorCode::validation, "answer: missing");
  const json& a = j["answer"];
  if (q->part == 3) {
    r.answer = rank_answer(a);
  } else {
    if (!a.is_string()) throw Error(ErrorCode::validation, "answer: expected a string");
    r.answer = a.get<std::string>();
    const bool ok = q->part == 1 ? (r.answer == "real" || r.answer == "synthetic")
                                 : (r.answer == "A" || r.answer == "B" || r.answer == "none");
    if (!ok) throw Error(ErrorCode::validation, "answer: '" + r.answer + "' is not a valid option");
  }
  r.is_sanity = q->is_sanity;
  r.timestamp = timestamp;
  return r;
}

struct TuringServer::Impl {
  StudyConfig study;
  ServerOptions opts;
  httplib::Server server;
  std::mutex write_mutex;
  int port = -1;

  void append(const TuringResponse& r) {
    std::lock_guard lock(write_mutex);
    const bool fresh = !fs::exists(opts.responses_csv) || fs::file_size(opts.responses_csv) == 0;
    if (opts.responses_csv.has_parent_path()) fs::create_directories(opts.responses_csv.parent_path());
    std::ofstream out(opts.responses_csv, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot append to " + opts.responses_csv.string());
    if (fresh) out << kResponseHeader << '\n';
    out << response_csv_line(r) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::io, "write failed: " + opts.responses_csv.string());
  }

  void routes() {
    const json public_view = public_study_json(study);
    server.Get("/study", [public_view](const httplib::Request&, httplib::Response& res) {
      res.set_content(public_view.dump(), "application/json");
    });
    server.Get(R"(/volumes/([A-Za-z0-9_.-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const StudyVolume* v = nullptr;
      for (const auto& cand : study.volumes)
        if (cand.id == id) v = &cand;
      if (!v) return send_error(res, 404, "unknown volume " + id);
      std::ifstream in(v->path, std::ios::binary);
      if (!in) return send_error(res, 500, "volume file unavailable");
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.set_content(std::move(bytes), "application/octet-stream");
    });
    server.Post("/responses", [this](const httplib::Request& req, httplib::Response& res) {
      TuringResponse r;
      try {
        r = parse_response_body(study, req.body, iso_timestamp_utc());
      } catch (const Error& e) {
        return send_error(res, 400, e.what());
      }
      try {
        append(r);
      } catch (const std::exception& e) {
        return send_error(res, 500, e.what());
      }
      res.status = 201;
      res.set_content(json{{"status", "ok"}}.dump(), "application/json");
    });
    if (opts.static_dir && !server.set_mount_point("/", opts.static_dir->string()))
      throw Error(ErrorCode::configuration, "static directory not found: " + opts.static_dir->string());
  }
};

TuringServer::TuringServer(StudyConfig study, ServerOptions opts) : impl_(std::make_unique<Impl>()) {
  validate_study(study);
  if (opts.responses_csv.empty()) throw Error(ErrorCode::configuration, "responses CSV path is required");
  impl_->study = std::move(study);
  impl_->opts = std::move(opts);
  impl_->routes();
  // Without SO_REUSEPORT a second server on the same port fails to bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

TuringServer::~TuringServer() { stop(); }

int TuringServer::bind() {
  if (impl_->opts.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->opts.host);
    if (impl_->port < 0) throw Error(ErrorCode::io, "cannot bind " + impl_->opts.host);
  } else {
    if (!impl_->server.bind_to_port(impl_->opts.host, impl_->opts.port))
      throw Error(ErrorCode::io, "cannot bind " + impl_->opts.host + ":" + std::to_string(impl_->opts.port) +
                                     " (port busy?)");
    impl_->port = impl_->opts.port;
  }
  return impl_->port;
}

void TuringServer::serve() {
  if (impl_->port < 0) throw Error(ErrorCode::contract, "serve() called before bind()");
  impl_->server.listen_after_bind();
}

void TuringServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace voxbench::bench
