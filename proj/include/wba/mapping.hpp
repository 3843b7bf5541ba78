#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wba/domain.hpp"
#include "wba/error.hpp"
#include "wba/registry.hpp"

namespace wba {

class ObservationLog;

enum class SourceKind { workflow_item, teaching_unit, exam_question };

std::string_view to_string(SourceKind k) noexcept;
SourceKind parse_source_kind(std::string_view text);

struct MappingEdge {
  SourceKind kind;
  Id source;
  Id outcome;

  auto operator<=>(const MappingEdge&) const = default;
};

/// The mapping graph from data sources to learning outcomes. Edges are
/// unique; a source may map to any number of outcomes.
class MappingSet {
 public:
  MappingSet() = default;

  /// Edges implied by the outcome lists of items, teaching units and
  /// questions in the registry.
  static MappingSet from_registry(const Registry& registry);

  /// Returns false (and leaves the set unchanged) for a duplicate edge.
  bool add(MappingEdge edge);

  /// Throws Errc::dangling_edge if any edge names an entity missing from
  /// the registry.
  void validate(const Registry& registry) const;

  const std::vector<Id>& outcomes_of(SourceKind kind, std::string_view source) const;
  const std::set<MappingEdge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }

 private:
  std::set<MappingEdge> edges_;
  std::map<std::pair<SourceKind, Id>, std::vector<Id>, std::less<>> by_source_;
};

/// One result of an exam question attempt, as fed to coverage and
/// performance tracking.
struct QuestionAttempt {
  Id question_id;
  bool correct = false;
  Instant at{};

  bool operator==(const QuestionAttempt&) const = default;
};

struct CoverageFilter {
  /// Empty means every source kind.
  std::set<SourceKind> kinds;
  std::optional<Instant> from;  // inclusive
  std::optional<Instant> to;    // exclusive

  bool includes(SourceKind k) const { return kinds.empty() || kinds.contains(k); }
  bool in_window(Instant t) const {
    return (!from || t >= *from) && (!to || t < *to);
  }
};

struct CoverageRow {
  Id outcome_id;
  std::int64_t wba_items = 0;
  std::int64_t teaching_units = 0;
  std::int64_t questions = 0;
  std::int64_t observations = 0;
  std::int64_t question_attempts = 0;

  bool operator==(const CoverageRow&) const = default;
};

/// One row per registry outcome, in id order.
struct CoverageReport {
  std::vector<CoverageRow> rows;
};

/// Counts distinct mapped sources and the data points (observations,
/// question attempts) whose source maps to each outcome. The date window
/// applies to data points only; mapped-source counts are structural.
CoverageReport coverage_report(const Registry& registry, const MappingSet& mapping,
                               const ObservationLog& log,
                               std::span<const QuestionAttempt> attempts,
                               const CoverageFilter& filter = {});

struct BlueprintConstraint {
  Id outcome_id;
  int min_questions = 0;
  std::optional<int> max_questions;

  bool operator==(const BlueprintConstraint&) const = default;
};

struct BlueprintRow {
  BlueprintConstraint constraint;
  int actual = 0;
  bool satisfied = false;
};

struct BlueprintReport {
  std::vector<BlueprintRow> rows;  // constraint order
  bool pass = true;
};

/// Throws Errc::unknown_question / Errc::dangling_reference / invalid_argument
/// (duplicate question, min > max).
BlueprintReport verify_blueprint(const Registry& registry, const MappingSet& mapping,
                                 std::span<const Id> exam,
                                 std::span<const BlueprintConstraint> constraints);

/// Raised when no exam within the size limit can be assembled; carries the
/// first constraint (in input order) left unsatisfied.
class InfeasibleExam : public Error {
 public:
  InfeasibleExam(BlueprintConstraint witness, int covered, const std::string& why);
  const BlueprintConstraint& witness() const noexcept { return witness_; }
  int covered() const noexcept { return covered_; }

 private:
  BlueprintConstraint witness_;
  int covered_;
};

struct ExamRequest {
  std::vector<Id> bank;  // empty = every registry question
  std::vector<BlueprintConstraint> constraints;
  int size_limit = 1;
  /// Historical usage per question; missing entries fall back to the
  /// registry's recorded attempts.
  std::map<Id, std::int64_t, std::less<>> history;
};

/// Greedy weighted set multicover. Each step takes the question that
/// satisfies the most outstanding per-outcome demand without breaching a
/// max_questions cap; ties go to lower historical usage, then smaller id.
/// The result always passes verify_blueprint with the same constraints.
/// If greedy gets stuck, a complete backtracking search (bounded by a node
/// budget) runs before infeasibility is reported.
std::vector<Id> generate_exam(const Registry& registry, const MappingSet& mapping,
                              const ExamRequest& request);

struct QuestionPerformance {
  Id question_id;
  std::int64_t attempts = 0;
  std::int64_t correct = 0;
  /// correct / attempts; nullopt when there are no attempts.
  std::optional<double> difficulty;
};

/// Mutable usage counters seeded from the registry.
class QuestionStatsTable {
 public:
  QuestionStatsTable() = default;
  explicit QuestionStatsTable(const Registry& registry);

  /// Throws Errc::unknown_question.
  const QuestionStats& record(std::string_view question_id, bool correct);
  QuestionPerformance performance(std::string_view question_id) const;
  std::map<Id, std::int64_t, std::less<>> usage_history() const;

  const std::map<Id, QuestionStats, std::less<>>& stats() const { return stats_; }
  bool operator==(const QuestionStatsTable&) const = default;

 private:
  std::map<Id, QuestionStats, std::less<>> stats_;
};

}  // namespace wba
