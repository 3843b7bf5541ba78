#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wba {

/// Machine-readable error codes. The string form (see to_string) is what the
/// CLI and HTTP service emit, so existing spellings must not change.
enum class Errc {
  parse_error,
  duplicate_id,
  dangling_reference,
  unknown_reference,
  scale_violation,
  item_procedure_mismatch,
  locked_record,
  timestamp_out_of_session,
  session_mismatch,
  dangling_edge,
  infeasible,
  unknown_question,
  unknown_location,
  empty_student_set,
  not_in_attendance,
  item_not_in_location_workflows,
  already_signed_out,
  students_still_open,
  already_committed,
  malformed_batch,
  batch_conflict,
  session_conflict,
  invalid_argument,
  invalid_config,
  unknown_kind,
  corrupt_log,
  io_error,
  not_found,
  port_in_use,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return to_string(code_); }

 private:
  Errc code_;
};

}  // namespace wba
