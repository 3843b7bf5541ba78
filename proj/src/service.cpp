#include "wba/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "wba/analytics.hpp"
#include "wba/report.hpp"
#include "wba/serialize.hpp"

namespace wba {

using nlohmann::json;
namespace fs = std::filesystem;

// --- state ---------------------------------------------------------------------

namespace {

QuestionStatsTable rebuild_stats(const Registry& registry, std::span<const QuestionAttempt> attempts) {
  QuestionStatsTable t(registry);
  for (const auto& a : attempts)
    if (registry.question(a.question_id)) t.record(a.question_id, a.correct);
  return t;
}

}  // namespace

void ServiceState::apply(const EventRecord& record) {
  const json& p = record.payload;
  switch (record.kind) {
    case EventKind::registry_loaded: {
      auto next = std::make_shared<const Registry>(Registry::load(p));
      store.revalidate(*next);
      auto next_mapping = MappingSet::from_registry(*next);
      auto next_stats = rebuild_stats(*next, attempts);
      registry = std::move(next);
      mapping = std::move(next_mapping);
      question_stats = std::move(next_stats);
      break;
    }
    case EventKind::batch_applied:
      store.apply(parse_batch(p.at("batch")), *registry, record.receipt);
      break;
    case EventKind::question_result: {
      auto id = required<std::string>(p, "question_id");
      bool correct = required<bool>(p, "correct");
      question_stats.record(id, correct);
      attempts.push_back({id, correct, record.receipt});
      break;
    }
    case EventKind::plan_created:
      plans[required<std::string>(p, "plan_id")] = p;
      break;
  }
}

json ServiceState::to_json() const {
  json a = json::array();
  for (const auto& at : attempts)
    a.push_back({{"question_id", at.question_id}, {"correct", at.correct}, {"at", format_instant(at.at)}});
  json pl = json::object();
  for (const auto& [id, plan] : plans) pl[id] = plan;
  return {{"registry", registry->to_json()}, {"store", store.to_json()}, {"attempts", a}, {"plans", pl}};
}

ServiceState ServiceState::from_json(const json& j) {
  return parse_guard([&] {
    ServiceState s;
    s.registry = std::make_shared<const Registry>(Registry::load(j.at("registry")));
    s.mapping = MappingSet::from_registry(*s.registry);
    s.store = Store::from_json(j.at("store"));
    for (const auto& a : j.at("attempts"))
      s.attempts.push_back({a.at("question_id").get<std::string>(), a.at("correct").get<bool>(),
                            parse_instant(a.at("at").get<std::string>())});
    s.question_stats = rebuild_stats(*s.registry, s.attempts);
    for (const auto& [id, plan] : j.at("plans").items()) s.plans[id] = plan;
    return s;
  });
}

// --- service -------------------------------------------------------------------

fs::path Service::events_path(const fs::path& dir) { return dir / "events.jsonl"; }
fs::path Service::snapshot_dir(const fs::path& dir) { return dir / "snapshots"; }

namespace {

std::optional<std::uint64_t> snapshot_seq(const fs::path& file) {
  std::string name = file.filename().string();
  constexpr std::string_view prefix = "state-", suffix = ".json";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix))
    return std::nullopt;
  std::string_view digits(name.data() + prefix.size(), name.size() - prefix.size() - suffix.size());
  std::uint64_t seq = 0;
  auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seq);
  if (ec != std::errc{} || end != digits.data() + digits.size()) return std::nullopt;
  return seq;
}

// Written to a temporary name and renamed so a crash never leaves a partial
// snapshot under the final name.
void write_snapshot_file(const fs::path& dir, std::uint64_t seq, const ServiceState& state) {
  json doc = {{"seq", seq}, {"state", state.to_json()}};
  fs::path final_path = dir / ("state-" + std::to_string(seq) + ".json");
  fs::path tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump();
    if (!out) throw Error(Errc::io_error, "cannot write snapshot " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

}  // namespace

Service::Service(fs::path data_dir, ServiceOptions options)
    : data_dir_(std::move(data_dir)), options_(options) {
  std::error_code ec;
  fs::create_directories(snapshot_dir(data_dir_), ec);
  fs::create_directories(data_dir_ / "imports", ec);
  if (ec) throw Error(Errc::io_error, "cannot create data directory " + data_dir_.string());

  events_ = std::make_unique<EventLog>(events_path(data_dir_));

  // Newest usable snapshot first; a damaged one falls back to an older one.
  std::vector<std::pair<std::uint64_t, fs::path>> snapshots;
  for (const auto& entry : fs::directory_iterator(snapshot_dir(data_dir_)))
    if (auto seq = snapshot_seq(entry.path()); seq && *seq <= events_->last_seq())
      snapshots.emplace_back(*seq, entry.path());
  std::sort(snapshots.rbegin(), snapshots.rend());
  for (const auto& [seq, path] : snapshots) {
    try {
      std::ifstream in(path);
      state_ = ServiceState::from_json(json::parse(in).at("state"));
      last_snapshot_seq_ = seq;
      break;
    } catch (const std::exception&) {
      state_ = ServiceState{};
    }
  }

  EventLog::replay(events_path(data_dir_), [&](EventRecord&& r) {
    if (r.seq <= last_snapshot_seq_) return;
    try {
      state_.apply(r);
    } catch (const Error& e) {
      throw CorruptLog(r.seq - 1, "event " + std::to_string(r.seq) + " does not apply: " + e.what());
    }
  });
}

std::uint64_t Service::last_seq() const {
  std::shared_lock lock(mutex_);
  return events_->last_seq();
}

std::shared_ptr<const ObservationLog> Service::current_log() const {
  std::lock_guard lock(log_cache_mutex_);
  if (!log_cache_) log_cache_ = std::make_shared<const ObservationLog>(state_.store.log());
  return log_cache_;
}

// Caller holds the write lock. The event is applied first (each apply is
// atomic and throws without side effects) and only then made durable.
EventRecord Service::commit(EventKind kind, json payload) {
  EventRecord r{events_->last_seq() + 1, kind, now_utc(), std::move(payload)};
  state_.apply(r);
  {
    std::lock_guard lock(log_cache_mutex_);
    log_cache_.reset();
  }
  events_->append(r.kind, r.receipt, r.payload);
  if (options_.snapshot_every > 0 && r.seq - last_snapshot_seq_ >= options_.snapshot_every) {
    write_snapshot_file(snapshot_dir(data_dir_), r.seq, state_);
    last_snapshot_seq_ = r.seq;
  }
  return r;
}

void Service::write_snapshot() {
  std::unique_lock lock(mutex_);
  write_snapshot_file(snapshot_dir(data_dir_), events_->last_seq(), state_);
  last_snapshot_seq_ = events_->last_seq();
}

json Service::load_registry(const json& document) {
  std::unique_lock lock(mutex_);
  // Normalize before logging so replay sees the canonical form.
  json canonical = Registry::load(document).to_json();
  auto r = commit(EventKind::registry_loaded, std::move(canonical));
  const Registry& reg = *state_.registry;
  return {{"seq", r.seq},
          {"outcomes", reg.outcomes().size()},
          {"items", reg.items().size()},
          {"procedures", reg.procedures().size()},
          {"staff", reg.staff().size()},
          {"students", reg.students().size()},
          {"locations", reg.locations().size()},
          {"questions", reg.questions().size()},
          {"teaching_units", reg.teaching_units().size()},
          {"slots", reg.slots().size()}};
}

ApplyResult Service::sync(const CaptureBatch& batch) {
  std::unique_lock lock(mutex_);
  if (const auto* stored = state_.store.batch(batch.batch_id)) {
    if (stored->content_hash == content_hash(batch))
      return {ApplyResult::Status::duplicate, batch.batch_id, batch.observations.size()};
  }
  commit(EventKind::batch_applied, {{"batch", batch}});
  return {ApplyResult::Status::applied, batch.batch_id, batch.observations.size()};
}

QuestionPerformance Service::record_question_result(const Id& question_id, bool correct) {
  std::unique_lock lock(mutex_);
  commit(EventKind::question_result, {{"question_id", question_id}, {"correct", correct}});
  return state_.question_stats.performance(question_id);
}

namespace {

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return parse_guard([&] { return j.at(key).get<T>(); });
}

PlanConfig parse_plan_config(const json& j) {
  PlanConfig c;
  if (j.is_null()) return c;
  c.hold_consistency = value_or(j, "hold_consistency", c.hold_consistency);
  c.hold_min_experience = value_or(j, "hold_min_experience", c.hold_min_experience);
  c.min_experience = value_or(j, "min_experience", c.min_experience);
  c.consistency_weight = value_or(j, "consistency_weight", c.consistency_weight);
  c.experience_weight = value_or(j, "experience_weight", c.experience_weight);
  return c;
}

std::vector<BlueprintConstraint> parse_constraints(const json& j) {
  std::vector<BlueprintConstraint> out;
  if (j.is_null()) return out;
  parse_guard([&] {
    for (const auto& c : j) {
      BlueprintConstraint bc{c.at("outcome_id").get<std::string>(), value_or(c, "min", 0), std::nullopt};
      if (c.contains("max") && !c.at("max").is_null()) bc.max_questions = c.at("max").get<int>();
      out.push_back(std::move(bc));
    }
  });
  return out;
}

}  // namespace

json Service::create_plan(const json& request) {
  std::unique_lock lock(mutex_);
  const Registry& reg = *state_.registry;
  PlanRequest req;
  req.students = value_or(request, "students", std::vector<Id>{});
  if (req.students.empty())
    for (const auto& [id, s] : reg.students()) req.students.push_back(id);
  for (const auto& s : req.students)
    if (!reg.student(s)) throw Error(Errc::unknown_reference, "unknown student '" + s + "'");
  req.procedures = value_or(request, "procedures", std::vector<Id>{});
  for (const auto& p : req.procedures)
    if (!reg.procedure(p)) throw Error(Errc::unknown_reference, "unknown procedure '" + p + "'");
  if (request.contains("slots")) {
    req.slots = parse_guard([&] { return request.at("slots").get<std::vector<PatientSlot>>(); });
  } else {
    for (const auto& [id, s] : reg.slots()) req.slots.push_back(s);
  }
  PlanConfig config = parse_plan_config(request.value("config", json()));
  int threshold = value_or(request, "threshold", kDefaultThreshold);
  if (threshold < Indicator::kMin || threshold > Indicator::kMax)
    throw Error(Errc::scale_violation, "threshold must be in 1-6");

  auto progress = ProgressSnapshot::from_log(*current_log(), reg, threshold);
  json plan = report::plan_json(wba::plan(req, progress, config));
  Id plan_id = "plan-" + std::to_string(events_->last_seq() + 1);
  auto r = commit(EventKind::plan_created, {{"plan_id", plan_id}, {"request", request}, {"plan", plan}});
  return {{"plan_id", plan_id}, {"seq", r.seq}, {"plan", plan}};
}

json Service::generate_exam(const json& request) const {
  std::shared_lock lock(mutex_);
  ExamRequest req;
  req.bank = value_or(request, "bank", std::vector<Id>{});
  req.constraints = parse_constraints(request.value("constraints", json()));
  req.size_limit = value_or(request, "size_limit", 0);
  if (request.contains("history")) {
    req.history = parse_guard([&] { return request.at("history").get<std::map<Id, std::int64_t, std::less<>>>(); });
  } else {
    req.history = state_.question_stats.usage_history();
  }
  auto exam = wba::generate_exam(*state_.registry, state_.mapping, req);
  auto check = verify_blueprint(*state_.registry, state_.mapping, exam, req.constraints);
  return {{"questions", exam}, {"blueprint", report::blueprint_json(check)}};
}

std::string Service::export_report(std::string_view name) const {
  return read([&](const ServiceState& s, const ObservationLog& log) -> std::string {
    if (name == "coverage")
      return report::coverage_csv(coverage_report(*s.registry, s.mapping, log, s.attempts));
    if (name == "consistency") return report::consistency_csv(log, *s.registry);
    if (name == "calibration") return report::calibration_csv(calibration_report(log, *s.registry));
    if (name == "portfolio") return report::portfolio_csv(log, *s.registry);
    throw Error(Errc::unknown_kind, "unknown report '" + std::string(name) + "'");
  });
}

// --- routing -------------------------------------------------------------------

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::unknown_question:
      return 404;
    case Errc::batch_conflict:
    case Errc::session_conflict:
    case Errc::duplicate_id:
      return 409;
    case Errc::infeasible:
      return 422;
    case Errc::io_error:
    case Errc::corrupt_log:
      return 500;
    default:
      return 400;
  }
}

ApiResponse json_response(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

ApiResponse error_response(const Error& e) {
  json body = {{"error", e.code_name()}, {"message", e.what()}};
  if (const auto* inf = dynamic_cast<const InfeasibleExam*>(&e)) {
    const auto& w = inf->witness();
    body["witness"] = {{"outcome_id", w.outcome_id}, {"min", w.min_questions}, {"covered", inf->covered()}};
    if (w.max_questions) body["witness"]["max"] = *w.max_questions;
  }
  return json_response(body, status_for(e.code()));
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

const std::string* param(const ApiRequest& r, const std::string& key) {
  auto it = r.query.find(key);
  return it == r.query.end() ? nullptr : &it->second;
}

int int_param(const ApiRequest& r, const std::string& key, int fallback) {
  const std::string* v = param(r, key);
  if (!v) return fallback;
  int out = 0;
  auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size())
    throw Error(Errc::invalid_argument, "query parameter '" + key + "' must be an integer");
  return out;
}

double double_param(const ApiRequest& r, const std::string& key, double fallback) {
  const std::string* v = param(r, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(Errc::invalid_argument, "query parameter '" + key + "' must be a number");
}

std::optional<Instant> instant_param(const ApiRequest& r, const std::string& key) {
  const std::string* v = param(r, key);
  if (!v) return std::nullopt;
  if (v->size() == 10) return start_of(parse_date(*v));
  return parse_instant(*v);
}

ConsistencyQuery consistency_query(const ApiRequest& r, const std::string& student) {
  ConsistencyQuery q;
  q.student_id = student;
  if (const auto* s = param(r, "scope")) q.scope = Scope::parse(*s);
  q.threshold = int_param(r, "threshold", kDefaultThreshold);
  q.window.from = instant_param(r, "from");
  q.window.to = instant_param(r, "to");
  if (param(r, "last")) q.window.last_sessions = int_param(r, "last", 0);
  q.validate();
  return q;
}

json parse_body(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::parse_error, "request body is not valid JSON");
  return j;
}

ApiResponse not_found(std::string_view what) {
  return json_response({{"error", "not-found"}, {"message", std::string(what)}}, 404);
}

}  // namespace

ApiResponse Service::handle(const ApiRequest& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return json_response({{"error", "internal"}, {"message", e.what()}}, 500);
  }
}

ApiResponse Service::route(const ApiRequest& request) {
  auto parts = split_path(request.path);
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  auto n = parts.size();
  auto at = [&](std::size_t i, std::string_view s) { return i < n && parts[i] == s; };

  if (post) {
    if (n == 1 && at(0, "registry")) return json_response(load_registry(parse_body(request.body)));
    if (n == 1 && at(0, "sync")) {
      auto result = sync(parse_batch(parse_body(request.body)));
      return json_response({{"status", to_string(result.status)},
                            {"batch_id", result.batch_id},
                            {"observations", result.observations},
                            {"seq", last_seq()}});
    }
    if (n == 2 && at(0, "exams") && at(1, "generate")) return json_response(generate_exam(parse_body(request.body)));
    if (n == 1 && at(0, "plans")) return json_response(create_plan(parse_body(request.body)));
    if (n == 3 && at(0, "questions") && at(2, "results")) {
      json body = parse_body(request.body);
      bool correct = parse_guard([&] { return body.at("correct").get<bool>(); });
      auto perf = record_question_result(parts[1], correct);
      return json_response({{"question_id", perf.question_id},
                            {"attempts", perf.attempts},
                            {"correct", perf.correct},
                            {"difficulty", perf.difficulty ? json(*perf.difficulty) : json(nullptr)}});
    }
  }
  if (!get) {
    if (post || request.method.empty()) return not_found("no such endpoint");
    return json_response({{"error", "method-not-allowed"}, {"message", request.method}}, 405);
  }

  return read([&](const ServiceState& s, const ObservationLog& log) -> ApiResponse {
    const Registry& reg = *s.registry;
    if (n == 1 && at(0, "health"))
      return json_response({{"status", "ok"}, {"seq", events_->last_seq()}});
    if (n == 1 && at(0, "students")) {
      json ids = json::array();
      for (const auto& [id, st] : reg.students()) ids.push_back(id);
      return json_response(ids);
    }
    if (n == 3 && at(0, "students")) {
      const Id& student = parts[1];
      if (!reg.student(student)) return not_found("unknown student '" + student + "'");
      if (parts[2] == "consistency") {
        auto q = consistency_query(request, student);
        return json_response(report::consistency_json(q, sessional_consistency(log, q, &s.mapping)));
      }
      if (parts[2] == "barcode") {
        auto q = consistency_query(request, student);
        return json_response(report::barcode_json(q, barcode(log, q, &s.mapping)));
      }
      if (parts[2] == "portfolio") {
        PortfolioConfig c;
        c.min_experience = int_param(request, "min_experience", c.min_experience);
        c.sufficiency_threshold = double_param(request, "sufficiency", c.sufficiency_threshold);
        c.indicator_threshold = int_param(request, "threshold", c.indicator_threshold);
        c.validate();
        return json_response(report::portfolio_json(student, c, portfolio(log, reg, student, c)));
      }
    }
    if (n == 3 && at(0, "staff") && at(2, "calibration")) {
      if (!reg.staff_member(parts[1])) return not_found("unknown staff member '" + parts[1] + "'");
      for (const auto& c : calibration_report(log, reg))
        if (c.staff_id == parts[1]) return json_response(report::calibration_json(c));
    }
    if (n == 1 && at(0, "coverage")) {
      CoverageFilter f;
      if (const auto* kinds = param(request, "kinds")) {
        std::stringstream ss(*kinds);
        for (std::string k; std::getline(ss, k, ',');)
          if (!k.empty()) f.kinds.insert(parse_source_kind(k));
      }
      f.from = instant_param(request, "from");
      f.to = instant_param(request, "to");
      return json_response(report::coverage_json(coverage_report(reg, s.mapping, log, s.attempts, f)));
    }
    if (n == 1 && at(0, "sessions")) {
      json out = json::array();
      for (const auto& id : s.store.session_ids()) out.push_back(*s.store.session(id));
      return json_response(out);
    }
    if (n == 2 && at(0, "sessions")) {
      const auto* session = s.store.session(parts[1]);
      if (!session) return not_found("unknown session '" + parts[1] + "'");
      return json_response(report::session_json(*s.store.batch_for_session(parts[1])));
    }
    if (n == 3 && at(0, "questions") && at(2, "performance")) {
      auto perf = s.question_stats.performance(parts[1]);
      return json_response({{"question_id", perf.question_id},
                            {"attempts", perf.attempts},
                            {"correct", perf.correct},
                            {"difficulty", perf.difficulty ? json(*perf.difficulty) : json(nullptr)}});
    }
    if (n == 2 && at(0, "plans")) {
      auto it = s.plans.find(parts[1]);
      if (it == s.plans.end()) return not_found("unknown plan '" + parts[1] + "'");
      return json_response(it->second);
    }
    if (n == 2 && at(0, "reports")) {
      // Same bytes as the CLI's export-report. The read lock is already
      // held, so render here instead of calling export_report().
      const auto& name = parts[1];
      std::string csv;
      if (name == "coverage")
        csv = report::coverage_csv(coverage_report(reg, s.mapping, log, s.attempts));
      else if (name == "consistency")
        csv = report::consistency_csv(log, reg);
      else if (name == "calibration")
        csv = report::calibration_csv(calibration_report(log, reg));
      else if (name == "portfolio")
        csv = report::portfolio_csv(log, reg);
      else
        return not_found("unknown report '" + name + "'");
      return {200, "text/csv", csv};
    }
    return not_found("no such endpoint");
  });
}

// --- HTTP ----------------------------------------------------------------------

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) api.query.emplace(k, v);
    ApiResponse out = impl_->service.handle(api);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(Errc::port_in_use, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(Errc::port_in_use, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }

}  // namespace wba
