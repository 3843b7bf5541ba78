#include "wba/registry.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "wba/error.hpp"
#include "wba/serialize.hpp"

namespace wba {

using nlohmann::json;

namespace {

std::vector<Id> sorted_unique(std::vector<Id> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

template <class T>
void insert_unique(Registry::Table<T>& table, T value, std::string_view kind) {
  require_valid_id(value.id, kind);
  Id key = value.id;
  if (!table.emplace(key, std::move(value)).second) {
    throw Error(Errc::duplicate_id, "duplicate " + std::string(kind) + " id '" + key + "'");
  }
}

template <class T>
void require_ref(const Registry::Table<T>& table, const Id& ref, std::string_view from,
                 std::string_view kind) {
  if (!table.contains(ref)) {
    throw Error(Errc::dangling_reference,
                std::string(from) + " references undefined " + std::string(kind) + " '" + ref + "'");
  }
}

std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(Errc::parse_error, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<Id> optional_ids(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  return parse_guard([&] { return it->get<std::vector<Id>>(); });
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

const json& section(const json& doc, const char* name) {
  static const json empty = json::array();
  auto it = doc.find(name);
  if (it == doc.end() || it->is_null()) return empty;
  if (!it->is_array()) throw Error(Errc::parse_error, std::string("section '") + name + "' must be an array");
  return *it;
}

}  // namespace

bool Registry::empty() const {
  return outcomes_.empty() && items_.empty() && procedures_.empty() && staff_.empty() &&
         students_.empty() && locations_.empty() && questions_.empty() &&
         teaching_units_.empty() && slots_.empty();
}

Registry Registry::load(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::parse_error, "entity document must be an object");
  Builder b;
  for (const auto& e : section(doc, "outcomes")) {
    LearningOutcome o{required<std::string>(e, "id"), optional_string(e, "label")};
    auto authority = optional_string(e, "authority");
    if (authority.empty() || authority == "internal") {
      o.authority = Authority::internal;
    } else if (authority == "external-stakeholder") {
      o.authority = Authority::external_stakeholder;
    } else {
      throw Error(Errc::parse_error, "outcome " + o.id + ": unknown authority '" + authority + "'");
    }
    b.add(std::move(o));
  }
  for (const auto& e : section(doc, "items")) {
    b.add(WorkflowItem{required<std::string>(e, "id"), optional_string(e, "label"),
                       optional_ids(e, "outcomes")});
  }
  for (const auto& e : section(doc, "procedures")) {
    b.add(Procedure{required<std::string>(e, "id"), optional_string(e, "label"),
                    required<std::vector<Id>>(e, "workflow")});
  }
  for (const auto& e : section(doc, "staff")) {
    b.add(StaffMember{required<std::string>(e, "id"), optional_string(e, "name")});
  }
  for (const auto& e : section(doc, "students")) {
    b.add(Student{required<std::string>(e, "id"), optional_string(e, "cohort"),
                  parse_date(required<std::string>(e, "enrollment_date"))});
  }
  for (const auto& e : section(doc, "locations")) {
    b.add(Location{required<std::string>(e, "id"), optional_string(e, "name"),
                   required<std::vector<Id>>(e, "procedures")});
  }
  for (const auto& e : section(doc, "questions")) {
    ExamQuestion q{required<std::string>(e, "id"), optional_string(e, "text"),
                   required<std::vector<Id>>(e, "outcomes")};
    if (e.contains("attempts")) q.usage.attempts = required<std::int64_t>(e, "attempts");
    if (e.contains("correct")) q.usage.correct = required<std::int64_t>(e, "correct");
    b.add(std::move(q));
  }
  for (const auto& e : section(doc, "teaching_units")) {
    b.add(TeachingUnit{required<std::string>(e, "id"), optional_string(e, "label"),
                       optional_ids(e, "outcomes")});
  }
  for (const auto& e : section(doc, "slots")) {
    b.add(parse_guard([&] { return e.get<PatientSlot>(); }));
  }
  return std::move(b).build();
}

Registry Registry::load_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return load(doc);
}

Registry Registry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_text(ss.str());
}

json Registry::to_json() const {
  json doc = json::object();
  doc["schema_version"] = 1;
  auto& outcomes = doc["outcomes"] = json::array();
  for (const auto& [id, o] : outcomes_)
    outcomes.push_back({{"id", id}, {"label", o.label}, {"authority", to_string(o.authority)}});
  auto& items = doc["items"] = json::array();
  for (const auto& [id, i] : items_)
    items.push_back({{"id", id}, {"label", i.label}, {"outcomes", i.outcomes}});
  auto& procedures = doc["procedures"] = json::array();
  for (const auto& [id, p] : procedures_)
    procedures.push_back({{"id", id}, {"label", p.label}, {"workflow", p.workflow}});
  auto& staff = doc["staff"] = json::array();
  for (const auto& [id, s] : staff_) staff.push_back({{"id", id}, {"name", s.name}});
  auto& students = doc["students"] = json::array();
  for (const auto& [id, s] : students_)
    students.push_back(
        {{"id", id}, {"cohort", s.cohort}, {"enrollment_date", format_date(s.enrollment_date)}});
  auto& locations = doc["locations"] = json::array();
  for (const auto& [id, l] : locations_)
    locations.push_back({{"id", id}, {"name", l.name}, {"procedures", l.available_procedures}});
  auto& questions = doc["questions"] = json::array();
  for (const auto& [id, q] : questions_)
    questions.push_back({{"id", id},
                         {"text", q.text},
                         {"outcomes", q.outcomes},
                         {"attempts", q.usage.attempts},
                         {"correct", q.usage.correct}});
  auto& units = doc["teaching_units"] = json::array();
  for (const auto& [id, t] : teaching_units_)
    units.push_back({{"id", id}, {"label", t.label}, {"outcomes", t.outcomes}});
  auto& slots = doc["slots"] = json::array();
  for (const auto& [id, s] : slots_) slots.push_back(s);
  return doc;
}

void Registry::check_references() const {
  for (const auto& [id, item] : items_)
    for (const auto& o : item.outcomes) require_ref(outcomes_, o, "item " + id, "outcome");

  for (const auto& [id, p] : procedures_) {
    if (p.workflow.empty())
      throw Error(Errc::parse_error, "procedure " + id + " has an empty workflow");
    std::set<std::string_view> seen;
    for (const auto& item : p.workflow) {
      require_ref(items_, item, "procedure " + id, "item");
      if (!seen.insert(item).second)
        throw Error(Errc::duplicate_id, "procedure " + id + " lists item '" + item + "' twice");
    }
  }
  for (const auto& [id, l] : locations_) {
    if (l.available_procedures.empty())
      throw Error(Errc::parse_error, "location " + id + " offers no procedures");
    for (const auto& p : l.available_procedures) require_ref(procedures_, p, "location " + id, "procedure");
  }
  for (const auto& [id, q] : questions_) {
    if (q.outcomes.empty()) throw Error(Errc::parse_error, "question " + id + " maps to no outcome");
    for (const auto& o : q.outcomes) require_ref(outcomes_, o, "question " + id, "outcome");
    if (q.usage.attempts < 0 || q.usage.correct < 0 || q.usage.correct > q.usage.attempts)
      throw Error(Errc::parse_error, "question " + id + ": need 0 <= correct <= attempts");
  }
  for (const auto& [id, t] : teaching_units_)
    for (const auto& o : t.outcomes) require_ref(outcomes_, o, "teaching unit " + id, "outcome");
  for (const auto& [id, s] : slots_) {
    require_ref(procedures_, s.procedure_id, "slot " + id, "procedure");
    if (s.capacity < 1) throw Error(Errc::parse_error, "slot " + id + ": capacity must be >= 1");
  }
}

Registry::Builder& Registry::Builder::add(LearningOutcome v) {
  insert_unique(r_.outcomes_, std::move(v), "outcome");
  return *this;
}
Registry::Builder& Registry::Builder::add(WorkflowItem v) {
  v.outcomes = sorted_unique(std::move(v.outcomes));
  insert_unique(r_.items_, std::move(v), "item");
  return *this;
}
Registry::Builder& Registry::Builder::add(Procedure v) {
  insert_unique(r_.procedures_, std::move(v), "procedure");
  return *this;
}
Registry::Builder& Registry::Builder::add(StaffMember v) {
  insert_unique(r_.staff_, std::move(v), "staff");
  return *this;
}
Registry::Builder& Registry::Builder::add(Student v) {
  insert_unique(r_.students_, std::move(v), "student");
  return *this;
}
Registry::Builder& Registry::Builder::add(Location v) {
  v.available_procedures = sorted_unique(std::move(v.available_procedures));
  insert_unique(r_.locations_, std::move(v), "location");
  return *this;
}
Registry::Builder& Registry::Builder::add(ExamQuestion v) {
  v.outcomes = sorted_unique(std::move(v.outcomes));
  insert_unique(r_.questions_, std::move(v), "question");
  return *this;
}
Registry::Builder& Registry::Builder::add(TeachingUnit v) {
  v.outcomes = sorted_unique(std::move(v.outcomes));
  insert_unique(r_.teaching_units_, std::move(v), "teaching unit");
  return *this;
}
Registry::Builder& Registry::Builder::add(PatientSlot v) {
  insert_unique(r_.slots_, std::move(v), "slot");
  return *this;
}

Registry Registry::Builder::build() && {
  r_.check_references();
  return std::move(r_);
}

const Observation& validate_observation(const Observation& obs, const Registry& registry,
                                        const Session& session) {
  auto unknown = [&](std::string_view kind, const Id& id) {
    return Error(Errc::unknown_reference,
                 "observation " + obs.id + " references unknown " + std::string(kind) + " '" + id + "'");
  };
  if (obs.session_id != session.id) {
    throw Error(Errc::session_mismatch, "observation " + obs.id + " belongs to session '" +
                                            obs.session_id + "', not '" + session.id + "'");
  }
  if (!registry.student(obs.student_id)) throw unknown("student", obs.student_id);
  if (!registry.staff_member(obs.staff_id)) throw unknown("staff", obs.staff_id);
  if (!registry.item(obs.item_id)) throw unknown("item", obs.item_id);
  const Procedure* proc = registry.procedure(obs.procedure_id);
  if (!proc) throw unknown("procedure", obs.procedure_id);
  if (!registry.location(session.location_id)) throw unknown("location", session.location_id);
  if (!proc->position_of(obs.item_id)) {
    throw Error(Errc::item_procedure_mismatch, "item '" + obs.item_id +
                                                   "' is not in the workflow of procedure '" +
                                                   obs.procedure_id + "'");
  }
  if (obs.staff_id != session.staff_id) {
    throw Error(Errc::session_mismatch, "observation " + obs.id + " staff '" + obs.staff_id +
                                            "' differs from session staff '" + session.staff_id +
                                            "'");
  }
  const Attendance* att = session.attendance(obs.student_id);
  if (!att) {
    throw Error(Errc::not_in_attendance,
                "student '" + obs.student_id + "' is not attending session " + session.id);
  }
  if (obs.comment && utf8_length(*obs.comment) > kMaxCommentChars) {
    throw Error(Errc::parse_error, "observation " + obs.id + ": comment exceeds " +
                                       std::to_string(kMaxCommentChars) + " characters");
  }
  if (att->state == StudentState::signed_out && att->signed_out_at &&
      obs.timestamp > *att->signed_out_at) {
    throw Error(Errc::locked_record, "record of student '" + obs.student_id + "' in session " +
                                         session.id + " is locked");
  }
  if (obs.timestamp < session.opened_at || (session.closed_at && obs.timestamp > *session.closed_at)) {
    throw Error(Errc::timestamp_out_of_session,
                "observation " + obs.id + " at " + format_instant(obs.timestamp) +
                    " lies outside session " + session.id);
  }
  return obs;
}

}  // namespace wba
