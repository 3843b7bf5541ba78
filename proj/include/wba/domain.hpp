#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wba/time.hpp"

namespace wba {

/// Opaque, case-sensitive identifier of at most kMaxIdBytes bytes.
using Id = std::string;

inline constexpr std::size_t kMaxIdBytes = 64;
inline constexpr std::size_t kMaxCommentChars = 2000;

bool is_valid_id(std::string_view id) noexcept;
/// Throws Errc::parse_error naming `what` when the id is malformed.
void require_valid_id(std::string_view id, std::string_view what);

/// One point on the 6-point developmental scale. Only the ordinal value is
/// stored; display labels live in indicator_label().
class Indicator {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 6;

  /// Throws Errc::scale_violation outside [kMin, kMax].
  explicit Indicator(int value);

  int value() const noexcept { return value_; }
  auto operator<=>(const Indicator&) const = default;

 private:
  int value_;
};

std::string_view indicator_label(Indicator i) noexcept;

enum class Authority { internal, external_stakeholder };

struct LearningOutcome {
  Id id;
  std::string label;
  Authority authority = Authority::internal;

  bool operator==(const LearningOutcome&) const = default;
};

/// A single observable step. Its position is given by the workflow of each
/// procedure that lists it; an item may appear in more than one procedure.
struct WorkflowItem {
  Id id;
  std::string label;
  std::vector<Id> outcomes;

  bool operator==(const WorkflowItem&) const = default;
};

struct Procedure {
  Id id;
  std::string label;
  std::vector<Id> workflow;

  /// 0-based position of `item` in the workflow, or nullopt.
  std::optional<std::size_t> position_of(std::string_view item) const;
  bool operator==(const Procedure&) const = default;
};

struct Student {
  Id id;
  std::string cohort;
  Date enrollment_date{};

  bool operator==(const Student&) const = default;
};

struct StaffMember {
  Id id;
  std::string name;

  bool operator==(const StaffMember&) const = default;
};

struct Location {
  Id id;
  std::string name;
  std::vector<Id> available_procedures;  // sorted, unique

  bool operator==(const Location&) const = default;
};

struct TeachingUnit {
  Id id;
  std::string label;
  std::vector<Id> outcomes;

  bool operator==(const TeachingUnit&) const = default;
};

struct QuestionStats {
  std::int64_t attempts = 0;
  std::int64_t correct = 0;

  bool operator==(const QuestionStats&) const = default;
};

struct ExamQuestion {
  Id id;
  std::string text;
  std::vector<Id> outcomes;  // sorted, unique, non-empty
  QuestionStats usage;

  bool operator==(const ExamQuestion&) const = default;
};

struct PatientSlot {
  Id id;
  Id procedure_id;
  Date date{};
  int capacity = 1;

  bool operator==(const PatientSlot&) const = default;
};

struct Observation {
  Id id;  // global idempotency key
  Id session_id;
  Id student_id;
  Id staff_id;
  Id item_id;
  Id procedure_id;
  Indicator indicator{Indicator::kMin};
  Instant timestamp{};
  std::optional<std::string> comment;

  bool operator==(const Observation&) const = default;
};

/// Chronological order used everywhere: timestamp, then id.
inline bool chronological(const Observation& a, const Observation& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.id < b.id;
}

enum class StudentState { open, signed_out };
enum class SessionState { active, committed };

struct Attendance {
  Id student_id;
  StudentState state = StudentState::open;
  std::optional<Instant> signed_out_at;

  bool operator==(const Attendance&) const = default;
};

struct Session {
  Id id;
  Id location_id;
  Id staff_id;
  std::vector<Attendance> students;
  Instant opened_at{};
  std::optional<Instant> closed_at;
  SessionState state = SessionState::active;

  const Attendance* attendance(std::string_view student) const;
  Attendance* attendance(std::string_view student);
  bool operator==(const Session&) const = default;
};

std::string_view to_string(Authority a) noexcept;
std::string_view to_string(StudentState s) noexcept;
std::string_view to_string(SessionState s) noexcept;

}  // namespace wba
