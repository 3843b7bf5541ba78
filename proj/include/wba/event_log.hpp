#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wba/error.hpp"
#include "wba/time.hpp"

namespace wba {

enum class EventKind { registry_loaded, batch_applied, question_result, plan_created };

std::string_view to_string(EventKind k) noexcept;
EventKind parse_event_kind(std::string_view text);

struct EventRecord {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::batch_applied;
  Instant receipt{};
  nlohmann::json payload;
};

/// Raised when the event file cannot be replayed. last_valid_seq is the
/// sequence number of the last record that parsed (0 if none).
class CorruptLog : public Error {
 public:
  CorruptLog(std::uint64_t last_valid_seq, const std::string& detail);
  std::uint64_t last_valid_seq() const noexcept { return last_valid_seq_; }

 private:
  std::uint64_t last_valid_seq_;
};

/// Append-only JSON-lines file, one record per line:
///   {"seq":N,"kind":"batch-applied","receipt":"...Z","payload":{...}}
/// Sequence numbers start at 1 and increase by one. Each record is handed to
/// the OS as a single write, so a killed process leaves whole lines.
class EventLog {
 public:
  /// Checks existing records (throws CorruptLog) and opens for appending.
  explicit EventLog(std::filesystem::path file);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  /// Streams every record to `sink` in file order and returns the last
  /// sequence number. A missing file is an empty log.
  static std::uint64_t replay(const std::filesystem::path& file,
                              const std::function<void(EventRecord&&)>& sink);
  static std::vector<EventRecord> read(const std::filesystem::path& file);

  EventRecord append(EventKind kind, Instant receipt, nlohmann::json payload);

  std::uint64_t last_seq() const { return last_seq_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::uint64_t last_seq_ = 0;
  int fd_ = -1;
};

}  // namespace wba
