#include "wba/scheduler.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <queue>
#include <set>

#include "wba/error.hpp"

namespace wba {

void PlanConfig::validate() const {
  if (min_experience < 1) throw Error(Errc::invalid_argument, "min_experience must be >= 1");
  if (hold_min_experience < 0) throw Error(Errc::invalid_argument, "hold_min_experience must be >= 0");
  if (!(hold_consistency >= 0.0 && hold_consistency <= 1.0))
    throw Error(Errc::invalid_argument, "hold_consistency must be in [0, 1]");
  if (!(consistency_weight >= 0.0) || !(experience_weight >= 0.0))
    throw Error(Errc::invalid_argument, "priority weights must be non-negative");
}

double priority_score(const Progress& progress, const PlanConfig& config) {
  double consistency = progress.consistency.value_or(0.0);
  double shortfall = std::max<double>(0.0, static_cast<double>(config.min_experience - progress.experience));
  return config.consistency_weight * (1.0 - consistency) +
         config.experience_weight * shortfall / static_cast<double>(config.min_experience);
}

bool should_hold(const Progress& progress, const PlanConfig& config) {
  return progress.consistency && *progress.consistency >= config.hold_consistency &&
         progress.experience >= config.hold_min_experience;
}

namespace {

struct Demand {
  Id student;
  Id procedure;
  double priority;
};

/// Serves `demand` from the open capacity in `slots_by_proc`; pairs left
/// without a slot are returned. Ordering: priority desc, fewest assignments
/// so far this round, student id, procedure id. Because assignment counts
/// only grow, a heap entry whose recorded count is stale is pushed back with
/// the fresh count instead of being served.
std::vector<Demand> serve(std::vector<Demand> demand, bool surplus,
                          std::map<Id, std::vector<std::pair<const PatientSlot*, int>>>& slots_by_proc,
                          std::map<Id, int>& assigned_count, std::vector<Assignment>& out) {
  struct Entry {
    double priority;
    int count;
    std::size_t index;
  };
  auto worse = [&](const Entry& a, const Entry& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    if (a.count != b.count) return a.count > b.count;
    const auto& da = demand[a.index];
    const auto& db = demand[b.index];
    if (da.student != db.student) return da.student > db.student;
    return da.procedure > db.procedure;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < demand.size(); ++i)
    heap.push({demand[i].priority, assigned_count[demand[i].student], i});

  std::vector<Demand> left;
  while (!heap.empty()) {
    Entry e = heap.top();
    heap.pop();
    const Demand& d = demand[e.index];
    int now = assigned_count[d.student];
    if (now != e.count) {
      heap.push({e.priority, now, e.index});
      continue;
    }
    auto& slots = slots_by_proc[d.procedure];
    auto open = std::find_if(slots.begin(), slots.end(), [](const auto& s) { return s.second > 0; });
    if (open == slots.end()) {
      left.push_back(d);
      continue;
    }
    --open->second;
    ++assigned_count[d.student];
    out.push_back({d.student, open->first->id, d.procedure, d.priority, surplus});
  }
  return left;
}

std::string hold_reason(const Progress& p, const PlanConfig& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "consistency %.3f >= %.3f and experience %lld >= %lld",
                p.consistency.value_or(0.0), c.hold_consistency, static_cast<long long>(p.experience),
                static_cast<long long>(c.hold_min_experience));
  return buf;
}

}  // namespace

AllocationPlan plan(const PlanRequest& request, const ProgressSnapshot& progress,
                    const PlanConfig& config) {
  config.validate();

  std::vector<const PatientSlot*> ordered;
  std::set<std::string_view> slot_ids;
  for (const auto& s : request.slots) {
    if (s.capacity < 1) throw Error(Errc::invalid_argument, "slot " + s.id + " has capacity < 1");
    if (!slot_ids.insert(s.id).second) throw Error(Errc::duplicate_id, "slot " + s.id + " listed twice");
    ordered.push_back(&s);
  }
  std::sort(ordered.begin(), ordered.end(), [](const PatientSlot* a, const PatientSlot* b) {
    if (a->date != b->date) return a->date < b->date;
    return a->id < b->id;
  });
  std::map<Id, std::vector<std::pair<const PatientSlot*, int>>> slots_by_proc;
  for (const auto* s : ordered) slots_by_proc[s->procedure_id].push_back({s, s->capacity});

  std::vector<Id> procedures = request.procedures;
  if (procedures.empty())
    for (const auto& [proc, slots] : slots_by_proc) procedures.push_back(proc);
  std::sort(procedures.begin(), procedures.end());
  procedures.erase(std::unique(procedures.begin(), procedures.end()), procedures.end());

  std::vector<Id> students = request.students;
  std::sort(students.begin(), students.end());
  students.erase(std::unique(students.begin(), students.end()), students.end());

  AllocationPlan result;
  std::vector<Demand> active;
  std::vector<Demand> held;
  std::map<std::pair<Id, Id>, std::string> reasons;
  for (const auto& student : students) {
    for (const auto& proc : procedures) {
      Progress p = progress.get(student, proc);
      double score = priority_score(p, config);
      if (should_hold(p, config)) {
        held.push_back({student, proc, score});
        reasons[{student, proc}] = hold_reason(p, config);
      } else {
        active.push_back({student, proc, score});
      }
    }
  }

  std::map<Id, int> assigned_count;
  for (auto& d : serve(std::move(active), false, slots_by_proc, assigned_count, result.assignments))
    result.unassigned.push_back({d.student, d.procedure, d.priority});
  for (auto& d : serve(std::move(held), true, slots_by_proc, assigned_count, result.assignments))
    result.holding.push_back({d.student, d.procedure, reasons[{d.student, d.procedure}]});

  auto by_pair = [](const auto& a, const auto& b) {
    return std::tie(a.student_id, a.procedure_id) < std::tie(b.student_id, b.procedure_id);
  };
  std::sort(result.holding.begin(), result.holding.end(), by_pair);
  std::sort(result.unassigned.begin(), result.unassigned.end(), by_pair);
  return result;
}

}  // namespace wba
