#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "wba/domain.hpp"

namespace wba {

/// Immutable snapshot of every entity the platform knows about, loaded from
/// an entity-definition document. All cross references are resolved at load
/// time; a registry that exists is referentially complete.
///
/// Document layout (every section optional, each an array of objects):
///
///   outcomes       {id, label, authority: "internal"|"external-stakeholder"}
///   items          {id, label, outcomes: [outcome id]}
///   procedures     {id, label, workflow: [item id]}
///   staff          {id, name}
///   students       {id, cohort, enrollment_date: "YYYY-MM-DD"}
///   locations      {id, name, procedures: [procedure id]}
///   questions      {id, text, outcomes: [outcome id], attempts, correct}
///   teaching_units {id, label, outcomes: [outcome id]}
///   slots          {id, procedure, date: "YYYY-MM-DD", capacity}
///
/// Unknown top-level keys are ignored so the format can grow additively.
class Registry {
 public:
  template <class T>
  using Table = std::map<Id, T, std::less<>>;

  Registry() = default;

  /// Throws Errc::parse_error, Errc::duplicate_id or Errc::dangling_reference.
  /// Rejects the whole document on the first problem.
  static Registry load(const nlohmann::json& document);
  static Registry load_text(std::string_view text);
  static Registry load_file(const std::string& path);

  nlohmann::json to_json() const;

  const Table<LearningOutcome>& outcomes() const { return outcomes_; }
  const Table<WorkflowItem>& items() const { return items_; }
  const Table<Procedure>& procedures() const { return procedures_; }
  const Table<StaffMember>& staff() const { return staff_; }
  const Table<Student>& students() const { return students_; }
  const Table<Location>& locations() const { return locations_; }
  const Table<ExamQuestion>& questions() const { return questions_; }
  const Table<TeachingUnit>& teaching_units() const { return teaching_units_; }
  const Table<PatientSlot>& slots() const { return slots_; }

  const LearningOutcome* outcome(std::string_view id) const { return find(outcomes_, id); }
  const WorkflowItem* item(std::string_view id) const { return find(items_, id); }
  const Procedure* procedure(std::string_view id) const { return find(procedures_, id); }
  const StaffMember* staff_member(std::string_view id) const { return find(staff_, id); }
  const Student* student(std::string_view id) const { return find(students_, id); }
  const Location* location(std::string_view id) const { return find(locations_, id); }
  const ExamQuestion* question(std::string_view id) const { return find(questions_, id); }

  bool empty() const;
  bool operator==(const Registry&) const = default;

  /// Builder used by the generator and tests; the result is checked exactly
  /// like a loaded document.
  class Builder;

 private:
  template <class T>
  static const T* find(const Table<T>& table, std::string_view id) {
    auto it = table.find(id);
    return it == table.end() ? nullptr : &it->second;
  }

  void check_references() const;

  Table<LearningOutcome> outcomes_;
  Table<WorkflowItem> items_;
  Table<Procedure> procedures_;
  Table<StaffMember> staff_;
  Table<Student> students_;
  Table<Location> locations_;
  Table<ExamQuestion> questions_;
  Table<TeachingUnit> teaching_units_;
  Table<PatientSlot> slots_;
};

class Registry::Builder {
 public:
  Builder& add(LearningOutcome v);
  Builder& add(WorkflowItem v);
  Builder& add(Procedure v);
  Builder& add(StaffMember v);
  Builder& add(Student v);
  Builder& add(Location v);
  Builder& add(ExamQuestion v);
  Builder& add(TeachingUnit v);
  Builder& add(PatientSlot v);

  /// Throws like Registry::load.
  Registry build() &&;

 private:
  Registry r_;
};

using RegistryPtr = std::shared_ptr<const Registry>;

/// Pure predicate: returns `obs` unchanged when every invariant holds against
/// the registry and its enclosing session, throws otherwise.
///
/// Errors: unknown_reference, item_procedure_mismatch, not_in_attendance,
/// session_mismatch, locked_record, timestamp_out_of_session, parse_error
/// (oversized comment). Scale violations cannot reach here because
/// Indicator rejects them on construction.
const Observation& validate_observation(const Observation& obs, const Registry& registry,
                                        const Session& session);

}  // namespace wba
