#include "wba/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "wba/error.hpp"

namespace wba {

Scope Scope::parse(std::string_view text) {
  if (text.empty() || text == "all") return all();
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon + 1 == text.size())
    throw Error(Errc::invalid_argument, "bad scope '" + std::string(text) + "'");
  auto kind = text.substr(0, colon);
  Id id(text.substr(colon + 1));
  if (kind == "procedure") return procedure(std::move(id));
  if (kind == "item") return item(std::move(id));
  if (kind == "outcome") return outcome(std::move(id));
  throw Error(Errc::invalid_argument, "bad scope kind '" + std::string(kind) + "'");
}

std::string Scope::str() const {
  switch (kind) {
    case Kind::all: return "all";
    case Kind::procedure: return "procedure:" + id;
    case Kind::item: return "item:" + id;
    case Kind::outcome: return "outcome:" + id;
  }
  return "all";
}

void ConsistencyQuery::validate() const {
  if (threshold < Indicator::kMin || threshold > Indicator::kMax) {
    throw Error(Errc::scale_violation,
                "threshold " + std::to_string(threshold) + " outside the 1-6 scale");
  }
  if (window.last_sessions && *window.last_sessions < 1)
    throw Error(Errc::invalid_argument, "last-N window needs N >= 1");
}

ScopeFilter::ScopeFilter(const Scope& scope, const MappingSet* mapping)
    : scope_(scope), mapping_(mapping) {
  if (scope_.kind == Scope::Kind::outcome && !mapping_)
    throw Error(Errc::invalid_argument, "outcome scope needs a mapping");
}

bool ScopeFilter::operator()(const Observation& obs) const {
  switch (scope_.kind) {
    case Scope::Kind::all: return true;
    case Scope::Kind::procedure: return obs.procedure_id == scope_.id;
    case Scope::Kind::item: return obs.item_id == scope_.id;
    case Scope::Kind::outcome: {
      const auto& outs = mapping_->outcomes_of(SourceKind::workflow_item, obs.item_id);
      return std::binary_search(outs.begin(), outs.end(), scope_.id);
    }
  }
  return false;
}

std::string_view to_string(SessionOutcome o) noexcept {
  switch (o) {
    case SessionOutcome::meets: return "meets";
    case SessionOutcome::fails: return "fails";
    case SessionOutcome::not_applicable: return "not-applicable";
  }
  return "not-applicable";
}

SessionOutcome judge_session(std::span<const int> indicators, int threshold, SessionRule rule) {
  if (indicators.empty()) return SessionOutcome::not_applicable;
  bool ok = false;
  switch (rule) {
    case SessionRule::minimum:
      ok = *std::min_element(indicators.begin(), indicators.end()) >= threshold;
      break;
    case SessionRule::mean: {
      long sum = 0;
      for (int v : indicators) sum += v;
      ok = sum >= static_cast<long>(threshold) * static_cast<long>(indicators.size());
      break;
    }
    case SessionRule::majority: {
      auto n = std::count_if(indicators.begin(), indicators.end(), [&](int v) { return v >= threshold; });
      ok = 2 * static_cast<std::size_t>(n) > indicators.size();
      break;
    }
  }
  return ok ? SessionOutcome::meets : SessionOutcome::fails;
}

SessionOutcome session_meets(const ObservationLog& log, std::string_view session_id,
                             std::string_view student_id, const ScopeFilter& scope, int threshold,
                             SessionRule rule) {
  std::vector<int> in_scope;
  for (const auto& ss : log.student_sessions(student_id)) {
    if (log.sessions()[ss.session].id != session_id) continue;
    for (std::size_t o : ss.observations) {
      const auto& obs = log.observations()[o];
      if (scope(obs)) in_scope.push_back(obs.indicator.value());
    }
  }
  return judge_session(in_scope, threshold, rule);
}

namespace {

struct JudgedSession {
  const ObservationLog::StudentSession* session;
  SessionOutcome outcome;
};

/// Applicable sessions of the student inside the window, chronological.
std::vector<JudgedSession> applicable_sessions(const ObservationLog& log, const ConsistencyQuery& q,
                                               const ScopeFilter& scope) {
  std::vector<JudgedSession> out;
  std::vector<int> in_scope;
  for (const auto& ss : log.student_sessions(q.student_id)) {
    Instant opened = log.sessions()[ss.session].opened_at;
    if (q.window.from && opened < *q.window.from) continue;
    if (q.window.to && opened >= *q.window.to) continue;
    in_scope.clear();
    for (std::size_t o : ss.observations) {
      const auto& obs = log.observations()[o];
      if (scope(obs)) in_scope.push_back(obs.indicator.value());
    }
    auto outcome = judge_session(in_scope, q.threshold);
    if (outcome != SessionOutcome::not_applicable) out.push_back({&ss, outcome});
  }
  if (q.window.last_sessions && out.size() > static_cast<std::size_t>(*q.window.last_sessions))
    out.erase(out.begin(), out.end() - *q.window.last_sessions);
  return out;
}

}  // namespace

Ratio sessional_consistency(const ObservationLog& log, const ConsistencyQuery& query,
                            const MappingSet* mapping) {
  query.validate();
  ScopeFilter scope(query.scope, mapping);
  Ratio r;
  for (const auto& js : applicable_sessions(log, query, scope)) {
    ++r.denominator;
    if (js.outcome == SessionOutcome::meets) ++r.numerator;
  }
  return r;
}

std::string Barcode::row() const {
  std::string s;
  s.reserve(cells.size());
  for (const auto& c : cells) s.push_back(c.meets ? '#' : '.');
  return s;
}

Barcode barcode(const ObservationLog& log, const ConsistencyQuery& query, const MappingSet* mapping) {
  query.validate();
  ScopeFilter scope(query.scope, mapping);
  Barcode b;
  b.threshold = query.threshold;
  std::vector<std::size_t> picked;
  for (const auto& js : applicable_sessions(log, query, scope))
    for (std::size_t o : js.session->observations)
      if (scope(log.observations()[o])) picked.push_back(o);
  std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t c) {
    return chronological(log.observations()[a], log.observations()[c]);
  });
  b.cells.reserve(picked.size());
  for (std::size_t o : picked) {
    const auto& obs = log.observations()[o];
    int v = obs.indicator.value();
    b.cells.push_back({obs.id, obs.session_id, obs.timestamp, v, v >= query.threshold});
  }
  return b;
}

void PortfolioConfig::validate() const {
  if (indicator_threshold < Indicator::kMin || indicator_threshold > Indicator::kMax)
    throw Error(Errc::scale_violation, "indicator threshold outside the 1-6 scale");
  if (min_experience < 0) throw Error(Errc::invalid_argument, "min_experience must be >= 0");
  if (!(sufficiency_threshold >= 0.0 && sufficiency_threshold <= 1.0))
    throw Error(Errc::invalid_argument, "sufficiency_threshold must be in [0, 1]");
}

namespace {

/// Per-procedure sessional consistency for one student in a single pass.
std::map<Id, Ratio, std::less<>> per_procedure(const ObservationLog& log, std::string_view student,
                                               int threshold) {
  std::map<Id, Ratio, std::less<>> out;
  std::unordered_map<std::string_view, int> min_by_proc;
  for (const auto& ss : log.student_sessions(student)) {
    min_by_proc.clear();
    for (std::size_t o : ss.observations) {
      const auto& obs = log.observations()[o];
      auto [it, fresh] = min_by_proc.emplace(obs.procedure_id, obs.indicator.value());
      if (!fresh) it->second = std::min(it->second, obs.indicator.value());
    }
    for (const auto& [proc, lowest] : min_by_proc) {
      auto& r = out[Id(proc)];
      ++r.denominator;
      if (judge_session(std::span<const int>(&lowest, 1), threshold) == SessionOutcome::meets)
        ++r.numerator;
    }
  }
  return out;
}

}  // namespace

std::vector<PortfolioEntry> portfolio(const ObservationLog& log, const Registry& registry,
                                      std::string_view student_id, const PortfolioConfig& config) {
  config.validate();
  static_assert(kSessionRule == SessionRule::minimum,
                "per_procedure() reduces each session to its minimum indicator");
  auto ratios = per_procedure(log, student_id, config.indicator_threshold);
  std::vector<PortfolioEntry> out;
  out.reserve(registry.procedures().size());
  for (const auto& [id, proc] : registry.procedures()) {
    PortfolioEntry e{id};
    if (auto it = ratios.find(id); it != ratios.end()) e.consistency = it->second;
    e.experience_count = e.consistency.denominator;
    auto v = e.consistency.value();
    e.sufficient = e.experience_count >= config.min_experience && v &&
                   *v >= config.sufficiency_threshold;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<StaffCalibration> calibration_report(const ObservationLog& log, const Registry& registry) {
  struct Sum {
    double total = 0;
    std::int64_t count = 0;
  };
  std::map<Id, StaffCalibration, std::less<>> by_staff;
  for (const auto& [id, s] : registry.staff()) by_staff.emplace(id, StaffCalibration{id});

  std::unordered_map<std::string_view, Sum> item_totals;
  // Items kept in id order so the floating-point sums below are reproducible.
  std::unordered_map<std::string_view, std::map<std::string_view, Sum>> staff_items;
  std::unordered_map<std::string_view, std::size_t> item_staff_count;
  std::array<std::int64_t, 6> global{};
  for (const auto& obs : log.observations()) {
    int v = obs.indicator.value();
    auto it = by_staff.find(obs.staff_id);
    if (it == by_staff.end()) it = by_staff.emplace(obs.staff_id, StaffCalibration{obs.staff_id}).first;
    ++it->second.histogram[v - 1];
    ++it->second.observations;
    ++global[v - 1];
    auto& t = item_totals[obs.item_id];
    t.total += v;
    ++t.count;
    auto& mine = staff_items[obs.staff_id][obs.item_id];
    if (mine.count == 0) ++item_staff_count[obs.item_id];
    mine.total += v;
    ++mine.count;
  }
  std::int64_t global_n = 0;
  for (auto c : global) global_n += c;

  std::vector<StaffCalibration> out;
  out.reserve(by_staff.size());
  for (auto& [id, cal] : by_staff) {
    cal.distinct_points =
        static_cast<int>(std::count_if(cal.histogram.begin(), cal.histogram.end(), [](auto c) { return c > 0; }));

    if (auto it = staff_items.find(id); it != staff_items.end()) {
      double weighted = 0;
      std::int64_t weight = 0;
      for (const auto& [item, mine] : it->second) {
        if (item_staff_count[item] < 2) continue;
        const auto& all = item_totals[item];
        double others_mean = (all.total - mine.total) / static_cast<double>(all.count - mine.count);
        weighted += mine.total - others_mean * static_cast<double>(mine.count);
        weight += mine.count;
        ++cal.shared_items;
      }
      if (weight > 0) cal.mean_offset = weighted / static_cast<double>(weight);
    }

    std::int64_t others_n = global_n - cal.observations;
    if (cal.observations > 0 && others_n > 0) {
      double tv = 0;
      for (int k = 0; k < 6; ++k) {
        double own = static_cast<double>(cal.histogram[k]) / static_cast<double>(cal.observations);
        double rest = static_cast<double>(global[k] - cal.histogram[k]) / static_cast<double>(others_n);
        tv += std::abs(own - rest);
      }
      cal.total_variation = 0.5 * tv;
    }
    out.push_back(std::move(cal));
  }
  return out;
}

ProgressSnapshot ProgressSnapshot::from_log(const ObservationLog& log, const Registry& registry,
                                            int threshold) {
  ProgressSnapshot snap;
  for (const auto& [student, s] : registry.students()) {
    for (const auto& [proc, ratio] : per_procedure(log, student, threshold))
      snap.set(student, proc, {ratio.value(), ratio.denominator});
  }
  return snap;
}

void ProgressSnapshot::set(const Id& student, const Id& procedure, Progress p) {
  entries_[{student, procedure}] = p;
}

Progress ProgressSnapshot::get(std::string_view student, std::string_view procedure) const {
  auto it = entries_.find({Id(student), Id(procedure)});
  return it == entries_.end() ? Progress{} : it->second;
}

}  // namespace wba
