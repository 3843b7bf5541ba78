#pragma once

#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wba/domain.hpp"

namespace wba {

/// Immutable, indexed view over committed sessions and their observations.
/// Construction order does not matter: all per-student views are sorted
/// chronologically (observations by timestamp then id, sessions by open time
/// then id). Every observation must belong to a listed session its student
/// attended (Errc::unknown_reference / Errc::not_in_attendance otherwise).
class ObservationLog {
 public:
  ObservationLog() = default;
  ObservationLog(std::vector<Session> sessions, std::vector<Observation> observations);

  std::span<const Session> sessions() const { return sessions_; }
  std::span<const Observation> observations() const { return observations_; }

  const Session* session(std::string_view id) const;

  /// One student's observations in chronological order (indices into
  /// observations()).
  std::span<const std::size_t> student_observations(std::string_view student) const;

  /// Sessions the student attended, ordered by (opened_at, id), each with
  /// the student's observations from that session (chronological).
  struct StudentSession {
    std::size_t session;                    // index into sessions()
    std::vector<std::size_t> observations;  // indices into observations()
  };
  std::span<const StudentSession> student_sessions(std::string_view student) const;

  std::size_t size() const { return observations_.size(); }

 private:
  struct StudentIndex {
    std::vector<std::size_t> observations;
    std::vector<StudentSession> sessions;
  };

  std::vector<Session> sessions_;
  std::vector<Observation> observations_;
  std::unordered_map<std::string, std::size_t> session_index_;
  std::unordered_map<std::string, StudentIndex> students_;
};

}  // namespace wba
