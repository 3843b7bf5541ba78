#pragma once

// Hand-built registries and random logs shared by the unit and acceptance
// tests. Randomness here uses the standard library distributions; nothing
// depends on their exact output across platforms.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "wba/capture.hpp"
#include "wba/registry.hpp"
#include "wba/time.hpp"

namespace fixtures {

using namespace wba;

inline Instant at(const char* text) { return parse_instant(text); }

/// Two procedures at one location, a third only at another:
///   p1: i1 i2 i3   p2: i4 i5   p3: i6
///   L1 offers p1 p2, L2 offers p3
inline nlohmann::json tiny_document() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "outcomes": [
      {"id": "o1", "label": "Infection control", "authority": "external-stakeholder"},
      {"id": "o2", "label": "Communication"},
      {"id": "o3", "label": "Record keeping"},
      {"id": "o4", "label": "Unmapped"}
    ],
    "items": [
      {"id": "i1", "label": "Hand hygiene", "outcomes": ["o1"]},
      {"id": "i2", "label": "Consent", "outcomes": ["o1", "o2"]},
      {"id": "i3", "label": "Notes", "outcomes": ["o3"]},
      {"id": "i4", "label": "Explain", "outcomes": ["o2"]},
      {"id": "i5", "label": "Chart", "outcomes": ["o3"]},
      {"id": "i6", "label": "Scale", "outcomes": ["o1"]}
    ],
    "procedures": [
      {"id": "p1", "label": "Examination", "workflow": ["i1", "i2", "i3"]},
      {"id": "p2", "label": "Radiograph", "workflow": ["i4", "i5"]},
      {"id": "p3", "label": "Scaling", "workflow": ["i6"]}
    ],
    "staff": [{"id": "st1", "name": "A"}, {"id": "st2", "name": "B"}, {"id": "st3", "name": "C"}],
    "students": [
      {"id": "s1", "cohort": "Y1", "enrollment_date": "2016-09-05"},
      {"id": "s2", "cohort": "Y1", "enrollment_date": "2016-09-05"},
      {"id": "s3", "cohort": "Y1", "enrollment_date": "2016-09-05"}
    ],
    "locations": [
      {"id": "L1", "name": "Clinic 1", "procedures": ["p1", "p2"]},
      {"id": "L2", "name": "Clinic 2", "procedures": ["p3"]}
    ],
    "questions": [
      {"id": "q1", "text": "?", "outcomes": ["o1"]},
      {"id": "q2", "text": "?", "outcomes": ["o1", "o2"]},
      {"id": "q3", "text": "?", "outcomes": ["o2"], "attempts": 10, "correct": 7}
    ],
    "teaching_units": [{"id": "t1", "label": "Lecture", "outcomes": ["o1", "o3"]}],
    "slots": [
      {"id": "slot1", "procedure": "p1", "date": "2016-10-03", "capacity": 1},
      {"id": "slot2", "procedure": "p2", "date": "2016-10-04", "capacity": 2}
    ]
  })");
}

inline RegistryPtr tiny_registry() { return std::make_shared<const Registry>(Registry::load(tiny_document())); }

/// Committed session with every listed student signed out at `close`.
inline Session committed_session(const Id& id, const Id& location, const Id& staff, std::vector<Id> students,
                                  Instant open, Instant close) {
  Session s{id, location, staff, {}, open, close, SessionState::committed};
  for (auto& st : students) s.students.push_back({std::move(st), StudentState::signed_out, close});
  return s;
}

inline Observation observation(const Id& id, const Session& s, const Id& student, const Id& item, const Id& proc,
                               int indicator, Instant ts) {
  Observation o;
  o.id = id;
  o.session_id = s.id;
  o.student_id = student;
  o.staff_id = s.staff_id;
  o.item_id = item;
  o.procedure_id = proc;
  o.indicator = Indicator(indicator);
  o.timestamp = ts;
  return o;
}

/// Arbitrary small world plus a log over it. Timestamps are drawn from a
/// coarse grid so ties between observations happen often; some attendees get
/// no observations at all.
struct RandomWorld {
  RegistryPtr registry;
  std::vector<Session> sessions;
  std::vector<Observation> observations;
};

inline RandomWorld random_world(std::uint64_t seed, std::size_t max_observations = 400) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto range = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  Registry::Builder b;
  const int n_out = range(2, 8);
  std::vector<Id> outcomes;
  for (int i = 0; i < n_out; ++i) {
    outcomes.push_back("o" + std::to_string(i));
    b.add(LearningOutcome{outcomes.back(), "", Authority::internal});
  }
  const int n_proc = range(1, 5);
  std::vector<Id> procs;
  std::vector<std::vector<Id>> flows;
  for (int p = 0; p < n_proc; ++p) {
    procs.push_back("p" + std::to_string(p));
    std::vector<Id> flow;
    for (int i = range(1, 6); i > 0; --i) {
      flow.push_back(procs.back() + ".i" + std::to_string(i));
      std::vector<Id> outs;
      for (int k = range(0, 2); k >= 0; --k) outs.push_back(outcomes[pick(outcomes.size())]);
      std::sort(outs.begin(), outs.end());
      outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
      b.add(WorkflowItem{flow.back(), "", outs});
    }
    b.add(Procedure{procs.back(), "", flow});
    flows.push_back(flow);
  }
  const int n_staff = range(1, 5), n_students = range(1, 8), n_loc = range(1, 3);
  for (int s = 0; s < n_staff; ++s) b.add(StaffMember{"st" + std::to_string(s), ""});
  for (int s = 0; s < n_students; ++s)
    b.add(Student{"s" + std::to_string(s), "Y", Date{std::chrono::year{2016}, std::chrono::September, std::chrono::day{1}}});
  std::vector<std::vector<int>> offered(n_loc);
  for (int l = 0; l < n_loc; ++l) {
    std::vector<Id> ids;
    for (int p = 0; p < n_proc; ++p)
      if (p == l % n_proc || range(0, 1)) {
        offered[l].push_back(p);
        ids.push_back(procs[p]);
      }
    b.add(Location{"L" + std::to_string(l), "", ids});
  }

  RandomWorld w;
  w.registry = std::make_shared<const Registry>(std::move(b).build());
  const Instant base = at("2016-09-05T09:00:00Z");
  const int n_sessions = range(1, static_cast<int>(std::max<std::size_t>(2, max_observations / 4)));
  for (int s = 0; s < n_sessions && w.observations.size() < max_observations; ++s) {
    int loc = static_cast<int>(pick(static_cast<std::size_t>(n_loc)));
    Instant open = base + std::chrono::hours{24 * range(0, 120) + 3 * range(0, 2)};
    std::vector<Id> attending;
    for (int st = 0; st < n_students; ++st)
      if (range(0, 2) == 0 || st == s % n_students) attending.push_back("s" + std::to_string(st));
    Session session = committed_session("se" + std::to_string(s), "L" + std::to_string(loc),
                                        "st" + std::to_string(pick(static_cast<std::size_t>(n_staff))), attending,
                                        open, open + std::chrono::hours{3});
    int counter = 0;
    for (const auto& student : attending) {
      int n_obs = range(0, 6);
      for (int k = 0; k < n_obs; ++k) {
        int p = offered[static_cast<std::size_t>(loc)][pick(offered[static_cast<std::size_t>(loc)].size())];
        const auto& flow = flows[static_cast<std::size_t>(p)];
        w.observations.push_back(observation(session.id + "/" + std::to_string(++counter), session, student,
                                             flow[pick(flow.size())], procs[static_cast<std::size_t>(p)], range(1, 6),
                                             open + std::chrono::minutes{30 * range(0, 5)}));
      }
    }
    w.sessions.push_back(std::move(session));
  }
  return w;
}

}  // namespace fixtures
