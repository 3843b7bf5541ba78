#pragma once

#include <string>
#include <vector>

#include "wba/analytics.hpp"
#include "wba/domain.hpp"

namespace wba {

struct PlanConfig {
  // All defaults below are configuration choices with no empirical source.
  double hold_consistency = 0.9;
  std::int64_t hold_min_experience = 5;
  std::int64_t min_experience = 5;
  double consistency_weight = 1.0;
  double experience_weight = 1.0;

  void validate() const;
};

/// consistency_weight * (1 - consistency, undefined read as 0 consistency)
/// + experience_weight * max(0, min_experience - experience) / min_experience
double priority_score(const Progress& progress, const PlanConfig& config);

/// True when the student is consistent and experienced enough on the
/// procedure to be moved into a holding pattern.
bool should_hold(const Progress& progress, const PlanConfig& config);

struct Assignment {
  Id student_id;
  Id slot_id;
  Id procedure_id;
  double priority = 0.0;
  /// Filled from spare capacity in the second pass by a held student.
  bool surplus = false;

  bool operator==(const Assignment&) const = default;
};

struct HoldingEntry {
  Id student_id;
  Id procedure_id;
  std::string reason;

  bool operator==(const HoldingEntry&) const = default;
};

struct UnmetDemand {
  Id student_id;
  Id procedure_id;
  double priority = 0.0;

  bool operator==(const UnmetDemand&) const = default;
};

/// A (student, procedure) pair appears in exactly one of the three lists.
struct AllocationPlan {
  std::vector<Assignment> assignments;  // in allocation order
  std::vector<HoldingEntry> holding;    // held and not given surplus capacity
  std::vector<UnmetDemand> unassigned;  // demand left without a slot

  bool operator==(const AllocationPlan&) const = default;
};

struct PlanRequest {
  std::vector<Id> students;
  /// Procedures students may need practice on; empty = those of the slots.
  std::vector<Id> procedures;
  std::vector<PatientSlot> slots;
};

/// One planning round. Held pairs are set aside; the remaining
/// (student, procedure) demand is served greedily by descending priority,
/// ties to the student with fewer assignments so far this round, then
/// student id, then procedure id. A pair takes the earliest open slot of
/// its procedure. Capacity left after that is offered to held pairs in the
/// same order.
AllocationPlan plan(const PlanRequest& request, const ProgressSnapshot& progress,
                    const PlanConfig& config = {});

}  // namespace wba
