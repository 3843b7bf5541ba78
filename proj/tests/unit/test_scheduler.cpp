#include <doctest.h>

#include <random>
#include <set>

#include "../support/check.hpp"
#include "../support/oracles.hpp"
#include "../support/scheduling.hpp"
#include "wba/scheduler.hpp"

using namespace wba;

using fixtures::active_total;
using fixtures::slot;


TEST_CASE("priority score examples") {
  PlanConfig c;
  CHECK(priority_score({std::nullopt, 0}, c) == doctest::Approx(2.0));
  CHECK(priority_score({1.0, 5}, c) == doctest::Approx(0.0));
  CHECK(priority_score({1.0, 12}, c) == doctest::Approx(0.0));
  CHECK(priority_score({0.5, 4}, c) == doctest::Approx(0.7));
  c.consistency_weight = 2;
  c.experience_weight = 0.5;
  CHECK(priority_score({0.5, 4}, c) == doctest::Approx(1.1));
}

TEST_CASE("plan examples") {
  ProgressSnapshot progress;
  PlanConfig c;
  SUBCASE("two students, one slot: higher score assigned") {
    progress.set("a", "p1", {0.5, 4});  // 0.7
    progress.set("b", "p1", {0.8, 5});  // 0.2
    PlanRequest r{{"a", "b"}, {}, {slot("x", "p1")}};
    auto out = plan(r, progress, c);
    REQUIRE(out.assignments.size() == 1);
    CHECK(out.assignments[0].student_id == "a");
    CHECK(out.assignments[0].slot_id == "x");
    REQUIRE(out.unassigned.size() == 1);
    CHECK(out.unassigned[0].student_id == "b");
    CHECK(active_total(out) == doctest::Approx(oracle::best_allocation(r, progress, c)));
  }
  SUBCASE("consistency 0.95 and experience 10: holding") {
    progress.set("a", "p1", {0.95, 10});
    auto out = plan({{"a"}, {"p1"}, {}}, progress, c);
    CHECK(out.assignments.empty());
    REQUIRE(out.holding.size() == 1);
    CHECK(out.holding[0].procedure_id == "p1");
    CHECK_FALSE(out.holding[0].reason.empty());
  }
  SUBCASE("zero slots: all non-held demand unassigned") {
    progress.set("a", "p1", {0.95, 10});
    auto out = plan({{"a", "b", "c"}, {"p1", "p2"}, {}}, progress, c);
    CHECK(out.assignments.empty());
    CHECK(out.holding.size() == 1);
    CHECK(out.unassigned.size() == 5);
  }
  SUBCASE("ties go to the student with fewer assignments, then id") {
    // Equal priorities everywhere. a takes p1 by id order; b then wins p2
    // because a already holds a slot.
    PlanRequest r{{"a", "b"}, {"p1", "p2"}, {slot("x", "p1"), slot("y", "p2")}};
    auto out = plan(r, progress, c);
    REQUIRE(out.assignments.size() == 2);
    CHECK(out.assignments[0].student_id == "a");
    CHECK(out.assignments[0].procedure_id == "p1");
    CHECK(out.assignments[1].student_id == "b");
    CHECK(out.assignments[1].procedure_id == "p2");
  }
  SUBCASE("spare capacity goes to held students") {
    progress.set("a", "p1", {0.95, 10});
    auto out = plan({{"a"}, {}, {slot("x", "p1")}}, progress, c);
    REQUIRE(out.assignments.size() == 1);
    CHECK(out.assignments[0].surplus);
    CHECK(out.holding.empty());
  }
  SUBCASE("earliest slot first") {
    auto out = plan({{"a"}, {}, {slot("late", "p1", 1, 9), slot("early", "p1", 1, 2)}}, progress, c);
    REQUIRE(out.assignments.size() == 1);
    CHECK(out.assignments[0].slot_id == "early");
  }
  SUBCASE("bad input") {
    CHECK_ERRC(plan({{"a"}, {}, {slot("x", "p1", 0)}}, progress, c), Errc::invalid_argument);
    CHECK_ERRC(plan({{"a"}, {}, {slot("x", "p1"), slot("x", "p1")}}, progress, c), Errc::duplicate_id);
    c.min_experience = 0;
    CHECK_ERRC(plan({{"a"}, {}, {}}, progress, c), Errc::invalid_argument);
  }
}

TEST_CASE("plan invariants on random instances") {
  std::mt19937_64 rng(11);
  PlanConfig c;
  for (int round = 0; round < 300; ++round) {
    auto in = fixtures::random_plan_instance(rng, 10, 10, false);
    auto out = plan(in.request, in.progress, c);

    std::map<Id, int> used;
    for (const auto& a : out.assignments) ++used[a.slot_id];
    for (const auto& s : in.request.slots) CHECK(used[s.id] <= s.capacity);

    std::multiset<std::pair<Id, Id>> seen;
    for (const auto& a : out.assignments) seen.insert({a.student_id, a.procedure_id});
    for (const auto& h : out.holding) seen.insert({h.student_id, h.procedure_id});
    for (const auto& u : out.unassigned) seen.insert({u.student_id, u.procedure_id});
    CHECK(seen.size() == in.request.students.size() * in.request.procedures.size());
    for (const auto& s : in.request.students)
      for (const auto& p : in.request.procedures) CHECK(seen.count({s, p}) == 1);

    for (const auto& h : out.holding) CHECK(should_hold(in.progress.get(h.student_id, h.procedure_id), c));
    CHECK(plan(in.request, in.progress, c) == out);
  }
}

TEST_CASE("raising consistency never moves a held pair into assignments") {
  std::mt19937_64 rng(12);
  PlanConfig c;
  for (int round = 0; round < 300; ++round) {
    auto in = fixtures::random_plan_instance(rng, 8, 8, false);
    if (in.request.students.empty()) continue;
    auto before = plan(in.request, in.progress, c);
    for (const auto& h : before.holding) {
      auto raised = in.progress;
      Progress p = raised.get(h.student_id, h.procedure_id);
      p.consistency = std::min(1.0, *p.consistency + 0.05 * static_cast<double>(1 + rng() % 3));
      raised.set(h.student_id, h.procedure_id, p);
      auto after = plan(in.request, raised, c);
      bool assigned = false;
      for (const auto& a : after.assignments)
        if (a.student_id == h.student_id && a.procedure_id == h.procedure_id) assigned = true;
      CHECK_FALSE(assigned);
    }
  }
}

TEST_CASE("greedy equals exhaustive matching on small unit-capacity instances") {
  std::mt19937_64 rng(13);
  PlanConfig c;
  for (int round = 0; round < 200; ++round) {
    auto in = fixtures::random_plan_instance(rng, 6, 6, true);
    auto out = plan(in.request, in.progress, c);
    CHECK(active_total(out) == doctest::Approx(oracle::best_allocation(in.request, in.progress, c)));
  }
}
