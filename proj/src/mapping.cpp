#include "wba/mapping.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>

#include "wba/observation_log.hpp"

namespace wba {

std::string_view to_string(SourceKind k) noexcept {
  switch (k) {
    case SourceKind::workflow_item: return "workflow-item";
    case SourceKind::teaching_unit: return "teaching-unit";
    case SourceKind::exam_question: return "exam-question";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view text) {
  if (text == "workflow-item" || text == "wba") return SourceKind::workflow_item;
  if (text == "teaching-unit" || text == "teaching") return SourceKind::teaching_unit;
  if (text == "exam-question" || text == "questions") return SourceKind::exam_question;
  throw Error(Errc::invalid_argument, "unknown source kind '" + std::string(text) + "'");
}

MappingSet MappingSet::from_registry(const Registry& registry) {
  MappingSet m;
  for (const auto& [id, item] : registry.items())
    for (const auto& o : item.outcomes) m.add({SourceKind::workflow_item, id, o});
  for (const auto& [id, unit] : registry.teaching_units())
    for (const auto& o : unit.outcomes) m.add({SourceKind::teaching_unit, id, o});
  for (const auto& [id, q] : registry.questions())
    for (const auto& o : q.outcomes) m.add({SourceKind::exam_question, id, o});
  return m;
}

bool MappingSet::add(MappingEdge edge) {
  if (!edges_.insert(edge).second) return false;
  auto& outs = by_source_[{edge.kind, edge.source}];
  outs.insert(std::upper_bound(outs.begin(), outs.end(), edge.outcome), edge.outcome);
  return true;
}

void MappingSet::validate(const Registry& registry) const {
  for (const auto& e : edges_) {
    bool source_ok = false;
    switch (e.kind) {
      case SourceKind::workflow_item: source_ok = registry.item(e.source) != nullptr; break;
      case SourceKind::teaching_unit: source_ok = registry.teaching_units().contains(e.source); break;
      case SourceKind::exam_question: source_ok = registry.question(e.source) != nullptr; break;
    }
    if (!source_ok || !registry.outcome(e.outcome)) {
      throw Error(Errc::dangling_edge, "edge " + std::string(to_string(e.kind)) + " '" + e.source +
                                           "' -> '" + e.outcome + "' references an unknown entity");
    }
  }
}

const std::vector<Id>& MappingSet::outcomes_of(SourceKind kind, std::string_view source) const {
  static const std::vector<Id> none;
  auto it = by_source_.find(std::pair<SourceKind, Id>{kind, Id(source)});
  return it == by_source_.end() ? none : it->second;
}

CoverageReport coverage_report(const Registry& registry, const MappingSet& mapping,
                               const ObservationLog& log, std::span<const QuestionAttempt> attempts,
                               const CoverageFilter& filter) {
  mapping.validate(registry);

  std::unordered_map<std::string_view, std::size_t> row_of;
  CoverageReport report;
  report.rows.reserve(registry.outcomes().size());
  for (const auto& [id, outcome] : registry.outcomes()) {
    row_of.emplace(id, report.rows.size());
    report.rows.push_back({id});
  }

  for (const auto& e : mapping.edges()) {
    if (!filter.includes(e.kind)) continue;
    auto& row = report.rows[row_of.at(e.outcome)];
    switch (e.kind) {
      case SourceKind::workflow_item: ++row.wba_items; break;
      case SourceKind::teaching_unit: ++row.teaching_units; break;
      case SourceKind::exam_question: ++row.questions; break;
    }
  }

  if (filter.includes(SourceKind::workflow_item)) {
    for (const auto& obs : log.observations()) {
      if (!filter.in_window(obs.timestamp)) continue;
      for (const auto& o : mapping.outcomes_of(SourceKind::workflow_item, obs.item_id))
        ++report.rows[row_of.at(o)].observations;
    }
  }
  if (filter.includes(SourceKind::exam_question)) {
    for (const auto& a : attempts) {
      if (!filter.in_window(a.at)) continue;
      for (const auto& o : mapping.outcomes_of(SourceKind::exam_question, a.question_id))
        ++report.rows[row_of.at(o)].question_attempts;
    }
  }
  return report;
}

namespace {

void check_constraints(const Registry& registry, std::span<const BlueprintConstraint> constraints) {
  for (const auto& c : constraints) {
    if (!registry.outcome(c.outcome_id)) {
      throw Error(Errc::dangling_reference,
                  "blueprint constraint names unknown outcome '" + c.outcome_id + "'");
    }
    if (c.min_questions < 0 || (c.max_questions && *c.max_questions < c.min_questions)) {
      throw Error(Errc::invalid_argument,
                  "blueprint constraint on '" + c.outcome_id + "' needs 0 <= min <= max");
    }
  }
}

std::string describe(const BlueprintConstraint& c) {
  std::string s = "outcome '" + c.outcome_id + "' requires >= " + std::to_string(c.min_questions);
  if (c.max_questions) s += " and <= " + std::to_string(*c.max_questions);
  return s;
}

}  // namespace

BlueprintReport verify_blueprint(const Registry& registry, const MappingSet& mapping,
                                 std::span<const Id> exam,
                                 std::span<const BlueprintConstraint> constraints) {
  check_constraints(registry, constraints);
  std::map<Id, int, std::less<>> per_outcome;
  std::set<std::string_view> seen;
  for (const auto& q : exam) {
    if (!registry.question(q)) throw Error(Errc::unknown_question, "unknown question '" + q + "'");
    if (!seen.insert(q).second)
      throw Error(Errc::invalid_argument, "question '" + q + "' appears twice in the exam");
    for (const auto& o : mapping.outcomes_of(SourceKind::exam_question, q)) ++per_outcome[o];
  }
  BlueprintReport report;
  for (const auto& c : constraints) {
    auto it = per_outcome.find(c.outcome_id);
    int actual = it == per_outcome.end() ? 0 : it->second;
    bool ok = actual >= c.min_questions && (!c.max_questions || actual <= *c.max_questions);
    report.rows.push_back({c, actual, ok});
    report.pass = report.pass && ok;
  }
  return report;
}

InfeasibleExam::InfeasibleExam(BlueprintConstraint witness, int covered, const std::string& why)
    : Error(Errc::infeasible, why + ": " + describe(witness) + ", reached " + std::to_string(covered)),
      witness_(std::move(witness)),
      covered_(covered) {}

namespace {

/// Complete search for any exam meeting the constraints, used when the
/// greedy pass gets stuck. Branches over the questions that could serve the
/// first outstanding constraint, in greedy order; a question skipped in one
/// branch is excluded from the later ones so each subset is visited once.
class ExamSearch {
 public:
  static constexpr std::size_t kNodeBudget = 2'000'000;

  ExamSearch(const std::vector<Id>& bank, const MappingSet& mapping,
             std::span<const BlueprintConstraint> constraints, int size_limit,
             std::vector<std::int64_t> usage)
      : constraints_(constraints), size_limit_(size_limit), usage_(std::move(usage)) {
    std::map<std::string_view, std::size_t> outcome_index;
    for (const auto& c : constraints)
      outcome_index.emplace(c.outcome_id, outcome_index.size());
    for (const auto& c : constraints) outcome_of_.push_back(outcome_index.at(c.outcome_id));
    covered_.assign(outcome_index.size(), 0);
    for (const auto& q : bank) {
      std::vector<std::size_t> outs;
      for (const auto& o : mapping.outcomes_of(SourceKind::exam_question, q))
        if (auto it = outcome_index.find(o); it != outcome_index.end()) outs.push_back(it->second);
      touches_.push_back(std::move(outs));
    }
    blocked_.assign(bank.size(), false);
  }

  /// Indices into the bank, or nullopt when no exam exists or the node
  /// budget ran out.
  std::optional<std::vector<std::size_t>> run() {
    if (dfs()) return chosen_;
    return std::nullopt;
  }

 private:
  int deficit(std::size_t c) const {
    return constraints_[c].min_questions - covered_[outcome_of_[c]];
  }

  bool fits(std::size_t q) const {
    for (std::size_t o : touches_[q])
      for (std::size_t c = 0; c < constraints_.size(); ++c)
        if (outcome_of_[c] == o && constraints_[c].max_questions &&
            covered_[o] + 1 > *constraints_[c].max_questions)
          return false;
    return true;
  }

  int gain(std::size_t q) const {
    int g = 0;
    for (std::size_t o : touches_[q])
      for (std::size_t c = 0; c < constraints_.size(); ++c)
        if (outcome_of_[c] == o && deficit(c) > 0) ++g;
    return g;
  }

  bool dfs() {
    if (++nodes_ > kNodeBudget) return false;
    std::optional<std::size_t> pending;
    int worst = 0;
    for (std::size_t c = 0; c < constraints_.size(); ++c) {
      int d = deficit(c);
      if (d > 0 && !pending) pending = c;
      worst = std::max(worst, d);
    }
    if (!pending) return true;
    if (static_cast<int>(chosen_.size()) + worst > size_limit_) return false;

    const std::size_t target = outcome_of_[*pending];
    std::vector<std::size_t> candidates;
    for (std::size_t q = 0; q < touches_.size(); ++q)
      if (!blocked_[q] && std::find(touches_[q].begin(), touches_[q].end(), target) != touches_[q].end() &&
          fits(q))
        candidates.push_back(q);
    std::vector<int> gains(touches_.size());
    for (std::size_t q : candidates) gains[q] = gain(q);
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      if (gains[a] != gains[b]) return gains[a] > gains[b];
      return usage_[a] < usage_[b];
    });

    std::vector<std::size_t> tried;
    bool found = false;
    for (std::size_t q : candidates) {
      blocked_[q] = true;
      tried.push_back(q);
      chosen_.push_back(q);
      for (std::size_t o : touches_[q]) ++covered_[o];
      found = dfs();
      if (found) break;
      for (std::size_t o : touches_[q]) --covered_[o];
      chosen_.pop_back();
      if (nodes_ > kNodeBudget) break;
    }
    if (!found)
      for (std::size_t q : tried) blocked_[q] = false;
    return found;
  }

  std::span<const BlueprintConstraint> constraints_;
  int size_limit_;
  std::vector<std::int64_t> usage_;
  std::vector<std::size_t> outcome_of_;          // constraint -> outcome slot
  std::vector<std::vector<std::size_t>> touches_;  // question -> constrained outcome slots
  std::vector<int> covered_;
  std::vector<bool> blocked_;
  std::vector<std::size_t> chosen_;
  std::size_t nodes_ = 0;
};

}  // namespace

std::vector<Id> generate_exam(const Registry& registry, const MappingSet& mapping,
                              const ExamRequest& request) {
  if (request.size_limit < 1) throw Error(Errc::invalid_argument, "size_limit must be >= 1");
  check_constraints(registry, request.constraints);

  std::vector<Id> bank = request.bank;
  if (bank.empty())
    for (const auto& [id, q] : registry.questions()) bank.push_back(id);
  std::sort(bank.begin(), bank.end());
  bank.erase(std::unique(bank.begin(), bank.end()), bank.end());
  for (const auto& q : bank)
    if (!registry.question(q)) throw Error(Errc::unknown_question, "unknown question '" + q + "'");

  // Constraint indices per outcome.
  std::map<Id, std::vector<std::size_t>, std::less<>> constraints_on;
  for (std::size_t c = 0; c < request.constraints.size(); ++c)
    constraints_on[request.constraints[c].outcome_id].push_back(c);

  // An outcome with fewer mapped bank questions than required can never be
  // satisfied; report it before searching.
  for (const auto& c : request.constraints) {
    int available = 0;
    for (const auto& q : bank) {
      const auto& outs = mapping.outcomes_of(SourceKind::exam_question, q);
      if (std::binary_search(outs.begin(), outs.end(), c.outcome_id)) ++available;
    }
    if (available < c.min_questions) throw InfeasibleExam(c, available, "too few mapped questions in bank");
  }

  auto usage = [&](const Id& q) -> std::int64_t {
    if (auto it = request.history.find(q); it != request.history.end()) return it->second;
    return registry.question(q)->usage.attempts;
  };

  std::map<Id, int, std::less<>> covered;
  auto outstanding = [&](std::size_t c) {
    const auto& con = request.constraints[c];
    auto it = covered.find(con.outcome_id);
    int have = it == covered.end() ? 0 : it->second;
    return have < con.min_questions;
  };
  auto first_outstanding = [&]() -> const BlueprintConstraint* {
    for (std::size_t c = 0; c < request.constraints.size(); ++c)
      if (outstanding(c)) return &request.constraints[c];
    return nullptr;
  };
  auto covered_count = [&](const Id& o) {
    auto it = covered.find(o);
    return it == covered.end() ? 0 : it->second;
  };

  // Greedy can paint itself into a corner under max caps or a tight size
  // limit. Before reporting infeasibility, search exhaustively; the witness
  // stays the constraint greedy could not meet.
  auto fallback = [&](const BlueprintConstraint& pending, const char* why) -> std::vector<Id> {
    std::vector<std::int64_t> usages;
    for (const auto& q : bank) usages.push_back(usage(q));
    if (auto found = ExamSearch(bank, mapping, request.constraints, request.size_limit, std::move(usages)).run()) {
      std::vector<Id> exam;
      for (std::size_t i : *found) exam.push_back(bank[i]);
      return exam;
    }
    throw InfeasibleExam(pending, covered_count(pending.outcome_id), why);
  };

  std::vector<Id> exam;
  std::vector<bool> used(bank.size(), false);
  while (const BlueprintConstraint* pending = first_outstanding()) {
    if (static_cast<int>(exam.size()) >= request.size_limit)
      return fallback(*pending, "size limit reached");
    std::size_t best = bank.size();
    int best_gain = 0;
    std::int64_t best_usage = 0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (used[i]) continue;
      const auto& outs = mapping.outcomes_of(SourceKind::exam_question, bank[i]);
      int gain = 0;
      bool allowed = true;
      for (const auto& o : outs) {
        auto it = constraints_on.find(o);
        if (it == constraints_on.end()) continue;
        for (std::size_t c : it->second) {
          const auto& con = request.constraints[c];
          if (con.max_questions && covered_count(o) + 1 > *con.max_questions) allowed = false;
          if (outstanding(c)) ++gain;
        }
      }
      if (!allowed || gain == 0) continue;
      std::int64_t u = usage(bank[i]);
      // Bank is sorted, so the first candidate wins remaining id ties.
      if (gain > best_gain || (gain == best_gain && u < best_usage)) {
        best = i;
        best_gain = gain;
        best_usage = u;
      }
    }
    if (best == bank.size()) return fallback(*pending, "no remaining question adds coverage within the caps");
    used[best] = true;
    exam.push_back(bank[best]);
    for (const auto& o : mapping.outcomes_of(SourceKind::exam_question, bank[best])) ++covered[o];
  }
  return exam;
}

QuestionStatsTable::QuestionStatsTable(const Registry& registry) {
  for (const auto& [id, q] : registry.questions()) stats_.emplace(id, q.usage);
}

const QuestionStats& QuestionStatsTable::record(std::string_view question_id, bool correct) {
  auto it = stats_.find(question_id);
  if (it == stats_.end())
    throw Error(Errc::unknown_question, "unknown question '" + std::string(question_id) + "'");
  ++it->second.attempts;
  if (correct) ++it->second.correct;
  return it->second;
}

QuestionPerformance QuestionStatsTable::performance(std::string_view question_id) const {
  auto it = stats_.find(question_id);
  if (it == stats_.end())
    throw Error(Errc::unknown_question, "unknown question '" + std::string(question_id) + "'");
  QuestionPerformance p{it->first, it->second.attempts, it->second.correct, std::nullopt};
  if (p.attempts > 0) p.difficulty = static_cast<double>(p.correct) / static_cast<double>(p.attempts);
  return p;
}

std::map<Id, std::int64_t, std::less<>> QuestionStatsTable::usage_history() const {
  std::map<Id, std::int64_t, std::less<>> h;
  for (const auto& [id, s] : stats_) h.emplace(id, s.attempts);
  return h;
}

}  // namespace wba
