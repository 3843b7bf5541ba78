#include "wba/error.hpp"

namespace wba {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::parse_error: return "parse-error";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::dangling_reference: return "dangling-reference";
    case Errc::unknown_reference: return "unknown-reference";
    case Errc::scale_violation: return "scale-violation";
    case Errc::item_procedure_mismatch: return "item-procedure-mismatch";
    case Errc::locked_record: return "locked-record";
    case Errc::timestamp_out_of_session: return "timestamp-out-of-session";
    case Errc::session_mismatch: return "session-mismatch";
    case Errc::dangling_edge: return "dangling-edge";
    case Errc::infeasible: return "infeasible";
    case Errc::unknown_question: return "unknown-question";
    case Errc::unknown_location: return "unknown-location";
    case Errc::empty_student_set: return "empty-student-set";
    case Errc::not_in_attendance: return "not-in-attendance";
    case Errc::item_not_in_location_workflows: return "item-not-in-location-workflows";
    case Errc::already_signed_out: return "already-signed-out";
    case Errc::students_still_open: return "students-still-open";
    case Errc::already_committed: return "already-committed";
    case Errc::malformed_batch: return "malformed-batch";
    case Errc::batch_conflict: return "batch-conflict";
    case Errc::session_conflict: return "session-conflict";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_config: return "invalid-config";
    case Errc::unknown_kind: return "unknown-kind";
    case Errc::corrupt_log: return "corrupt-log";
    case Errc::io_error: return "io-error";
    case Errc::not_found: return "not-found";
    case Errc::port_in_use: return "port-in-use";
  }
  return "unknown";
}

}  // namespace wba
