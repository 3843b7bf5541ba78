#include "wba/serialize.hpp"

#include "wba/error.hpp"
#include "wba/time.hpp"

namespace wba {

using nlohmann::json;



void to_json(json& j, const Observation& v) {
  j = json{{"id", v.id},
           {"session_id", v.session_id},
           {"student_id", v.student_id},
           {"staff_id", v.staff_id},
           {"item_id", v.item_id},
           {"procedure_id", v.procedure_id},
           {"indicator", v.indicator},
           {"timestamp", format_instant(v.timestamp)}};
  if (v.comment) j["comment"] = *v.comment;
}

void from_json(const json& j, Observation& v) {
  v.id = required<std::string>(j, "id");
  v.session_id = required<std::string>(j, "session_id");
  v.student_id = required<std::string>(j, "student_id");
  v.staff_id = required<std::string>(j, "staff_id");
  v.item_id = required<std::string>(j, "item_id");
  v.procedure_id = required<std::string>(j, "procedure_id");
  if (!j.contains("indicator")) throw Error(Errc::parse_error, "missing field 'indicator'");
  v.indicator = j.at("indicator").get<Indicator>();
  v.timestamp = parse_instant(required<std::string>(j, "timestamp"));
  if (auto it = j.find("comment"); it != j.end() && !it->is_null()) {
    v.comment = parse_guard([&] { return it->get<std::string>(); });
  } else {
    v.comment.reset();
  }
  require_valid_id(v.id, "observation");
}

void to_json(json& j, const Attendance& v) {
  j = json{{"student_id", v.student_id}, {"state", to_string(v.state)}};
  if (v.signed_out_at) j["signed_out_at"] = format_instant(*v.signed_out_at);
}

void from_json(const json& j, Attendance& v) {
  v.student_id = required<std::string>(j, "student_id");
  auto state = required<std::string>(j, "state");
  if (state == "open") {
    v.state = StudentState::open;
  } else if (state == "student_signed_out") {
    v.state = StudentState::signed_out;
  } else {
    throw Error(Errc::parse_error, "unknown student state '" + state + "'");
  }
  if (auto it = j.find("signed_out_at"); it != j.end() && !it->is_null()) {
    v.signed_out_at = parse_instant(parse_guard([&] { return it->get<std::string>(); }));
  } else {
    v.signed_out_at.reset();
  }
}

void to_json(json& j, const Session& v) {
  j = json{{"id", v.id},
           {"location_id", v.location_id},
           {"staff_id", v.staff_id},
           {"students", v.students},
           {"opened_at", format_instant(v.opened_at)},
           {"state", to_string(v.state)}};
  if (v.closed_at) j["closed_at"] = format_instant(*v.closed_at);
}

void from_json(const json& j, Session& v) {
  v.id = required<std::string>(j, "id");
  v.location_id = required<std::string>(j, "location_id");
  v.staff_id = required<std::string>(j, "staff_id");
  v.students = required<std::vector<Attendance>>(j, "students");
  v.opened_at = parse_instant(required<std::string>(j, "opened_at"));
  auto state = required<std::string>(j, "state");
  if (state == "active") {
    v.state = SessionState::active;
  } else if (state == "committed") {
    v.state = SessionState::committed;
  } else {
    throw Error(Errc::parse_error, "unknown session state '" + state + "'");
  }
  if (auto it = j.find("closed_at"); it != j.end() && !it->is_null()) {
    v.closed_at = parse_instant(parse_guard([&] { return it->get<std::string>(); }));
  } else {
    v.closed_at.reset();
  }
  require_valid_id(v.id, "session");
}

void to_json(json& j, const PatientSlot& v) {
  j = json{{"id", v.id},
           {"procedure", v.procedure_id},
           {"date", format_date(v.date)},
           {"capacity", v.capacity}};
}

void from_json(const json& j, PatientSlot& v) {
  v.id = required<std::string>(j, "id");
  v.procedure_id = required<std::string>(j, "procedure");
  v.date = parse_date(required<std::string>(j, "date"));
  v.capacity = required<int>(j, "capacity");
  require_valid_id(v.id, "slot");
  if (v.capacity < 1) throw Error(Errc::parse_error, "slot " + v.id + ": capacity must be >= 1");
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace wba

wba::Indicator nlohmann::adl_serializer<wba::Indicator>::from_json(const json& j) {
  if (!j.is_number_integer()) throw wba::Error(wba::Errc::parse_error, "indicator must be an integer");
  return wba::Indicator(j.get<int>());
}
