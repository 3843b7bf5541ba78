#include "wba/domain.hpp"

#include <algorithm>

#include "wba/error.hpp"

namespace wba {

bool is_valid_id(std::string_view id) noexcept {
  return !id.empty() && id.size() <= kMaxIdBytes;
}

void require_valid_id(std::string_view id, std::string_view what) {
  if (!is_valid_id(id)) {
    throw Error(Errc::parse_error, std::string(what) + " id must be 1-" +
                                       std::to_string(kMaxIdBytes) + " bytes, got '" +
                                       std::string(id) + "'");
  }
}

Indicator::Indicator(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    throw Error(Errc::scale_violation,
                "indicator " + std::to_string(value) + " outside the 1-6 scale");
  }
}

std::string_view indicator_label(Indicator i) noexcept {
  static constexpr std::string_view labels[] = {
      "1: unable to perform without extensive guidance",
      "2: needs substantial guidance",
      "3: needs some guidance",
      "4: performs independently with minor prompting",
      "5: performs independently",
      "6: performs independently at an advanced level",
  };
  return labels[i.value() - 1];
}

std::optional<std::size_t> Procedure::position_of(std::string_view item) const {
  auto it = std::find(workflow.begin(), workflow.end(), item);
  if (it == workflow.end()) return std::nullopt;
  return static_cast<std::size_t>(it - workflow.begin());
}

const Attendance* Session::attendance(std::string_view student) const {
  for (const auto& a : students)
    if (a.student_id == student) return &a;
  return nullptr;
}

Attendance* Session::attendance(std::string_view student) {
  for (auto& a : students)
    if (a.student_id == student) return &a;
  return nullptr;
}

std::string_view to_string(Authority a) noexcept {
  return a == Authority::internal ? "internal" : "external-stakeholder";
}

std::string_view to_string(StudentState s) noexcept {
  return s == StudentState::open ? "open" : "student_signed_out";
}

std::string_view to_string(SessionState s) noexcept {
  return s == SessionState::active ? "active" : "committed";
}

}  // namespace wba
