#include "wba/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <fstream>

namespace wba {

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::registry_loaded: return "registry-loaded";
    case EventKind::batch_applied: return "batch-applied";
    case EventKind::question_result: return "question-result";
    case EventKind::plan_created: return "plan-created";
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::registry_loaded, EventKind::batch_applied, EventKind::question_result,
                 EventKind::plan_created})
    if (to_string(k) == text) return k;
  throw Error(Errc::unknown_kind, "unknown event kind '" + std::string(text) + "'");
}

CorruptLog::CorruptLog(std::uint64_t last_valid_seq, const std::string& detail)
    : Error(Errc::corrupt_log, detail + " (last valid seq " + std::to_string(last_valid_seq) + ")"),
      last_valid_seq_(last_valid_seq) {}

namespace {

EventRecord parse_record(const std::string& line, std::uint64_t expected) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw CorruptLog(expected - 1, "unparseable event record");
  try {
    EventRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.kind = parse_event_kind(j.at("kind").get<std::string>());
    r.receipt = parse_instant(j.at("receipt").get<std::string>());
    r.payload = j.at("payload");
    if (r.seq != expected)
      throw CorruptLog(expected - 1, "sequence gap: expected " + std::to_string(expected) + ", found " +
                                         std::to_string(r.seq));
    return r;
  } catch (const CorruptLog&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptLog(expected - 1, std::string("invalid event record: ") + e.what());
  }
}

}  // namespace

std::uint64_t EventLog::replay(const std::filesystem::path& file,
                               const std::function<void(EventRecord&&)>& sink) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    if (std::filesystem::exists(file)) throw Error(Errc::io_error, "cannot read " + file.string());
    return 0;
  }
  std::uint64_t seq = 0;
  std::string line;
  while (std::getline(in, line)) {
    // A record is complete only once its newline is written.
    if (in.eof()) throw CorruptLog(seq, "truncated final event record");
    if (line.empty()) throw CorruptLog(seq, "empty event record");
    EventRecord r = parse_record(line, seq + 1);
    seq = r.seq;
    sink(std::move(r));
  }
  return seq;
}

std::vector<EventRecord> EventLog::read(const std::filesystem::path& file) {
  std::vector<EventRecord> out;
  replay(file, [&](EventRecord&& r) { out.push_back(std::move(r)); });
  return out;
}

EventLog::EventLog(std::filesystem::path file) : path_(std::move(file)) {
  last_seq_ = replay(path_, [](EventRecord&&) {});
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::io_error, "cannot open " + path_.string() + " for appending");
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

EventRecord EventLog::append(EventKind kind, Instant receipt, nlohmann::json payload) {
  EventRecord r{last_seq_ + 1, kind, receipt, std::move(payload)};
  nlohmann::json j = {{"seq", r.seq},
                      {"kind", std::string(to_string(kind))},
                      {"receipt", format_instant(receipt)},
                      {"payload", r.payload}};
  std::string line = j.dump();
  line += '\n';
  std::size_t done = 0;
  while (done < line.size()) {
    ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(Errc::io_error, "write to " + path_.string() + " failed");
    done += static_cast<std::size_t>(n);
  }
  last_seq_ = r.seq;
  return r;
}

}  // namespace wba
