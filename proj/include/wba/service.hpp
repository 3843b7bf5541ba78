#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "wba/capture.hpp"
#include "wba/event_log.hpp"
#include "wba/mapping.hpp"
#include "wba/observation_log.hpp"
#include "wba/registry.hpp"
#include "wba/scheduler.hpp"

namespace wba {

/// Everything the service knows, rebuilt by replaying events in order.
struct ServiceState {
  RegistryPtr registry = std::make_shared<const Registry>();
  MappingSet mapping;
  Store store;
  QuestionStatsTable question_stats;
  std::vector<QuestionAttempt> attempts;
  std::map<Id, nlohmann::json, std::less<>> plans;

  /// Applies one event. Throws the fronted operation's error if the event is
  /// not applicable, leaving the state unchanged.
  void apply(const EventRecord& record);

  nlohmann::json to_json() const;
  static ServiceState from_json(const nlohmann::json& j);
};

struct ApiRequest {
  std::string method;  // "GET" | "POST"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  /// Write a snapshot after this many events since the last one; 0 disables.
  std::uint64_t snapshot_every = 1000;
};

/// File-backed platform service.
///
/// Data directory layout:
///   events.jsonl              append-only event log (source of truth)
///   snapshots/state-<seq>.json  periodic full-state snapshots
///   imports/                  copies of documents imported by the CLI
///
/// Startup loads the newest readable snapshot and replays later events.
/// Writers are serialized; readers share a lock.
class Service {
 public:
  /// Throws CorruptLog if the event file cannot be replayed.
  explicit Service(std::filesystem::path data_dir, ServiceOptions options = {});

  // Writes. Each is validated against current state, appended to the event
  // log, then applied.
  nlohmann::json load_registry(const nlohmann::json& document);
  ApplyResult sync(const CaptureBatch& batch);
  QuestionPerformance record_question_result(const Id& question_id, bool correct);
  nlohmann::json create_plan(const nlohmann::json& request);

  // Reads.
  /// Body: {"bank":[ids], "constraints":[{"outcome_id","min","max"}],
  /// "size_limit":N}. Throws InfeasibleExam.
  nlohmann::json generate_exam(const nlohmann::json& request) const;
  /// CSV table for "coverage", "consistency", "calibration" or "portfolio".
  std::string export_report(std::string_view name) const;

  /// Routes one API call; errors become 4xx responses with
  /// {"error": code, "message": text}.
  ApiResponse handle(const ApiRequest& request);

  void write_snapshot();

  /// Runs `fn(state, log)` under the read lock.
  template <class Fn>
  decltype(auto) read(Fn&& fn) const {
    std::shared_lock lock(mutex_);
    return fn(state_, *current_log());
  }

  std::uint64_t last_seq() const;
  const std::filesystem::path& data_dir() const { return data_dir_; }

  static std::filesystem::path events_path(const std::filesystem::path& dir);
  static std::filesystem::path snapshot_dir(const std::filesystem::path& dir);

 private:
  EventRecord commit(EventKind kind, nlohmann::json payload);
  std::shared_ptr<const ObservationLog> current_log() const;
  ApiResponse route(const ApiRequest& request);

  std::filesystem::path data_dir_;
  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  ServiceState state_;
  std::unique_ptr<EventLog> events_;
  std::uint64_t last_snapshot_seq_ = 0;

  mutable std::mutex log_cache_mutex_;
  mutable std::shared_ptr<const ObservationLog> log_cache_;
};

/// HTTP front end over Service::handle.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Throws Errc::port_in_use.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wba
