#include <doctest.h>

#include <algorithm>
#include <random>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "wba/analytics.hpp"
#include "wba/capture.hpp"

using namespace wba;
using fixtures::at;
using nlohmann::json;

namespace {

const Instant kOpen = at("2016-10-03T09:00:00Z");

Observation make(const CaptureSession& s, const Id& student, const Id& item, const Id& proc, int v, int minute) {
  Observation o;
  o.id = s.next_observation_id();
  o.session_id = s.session().id;
  o.student_id = student;
  o.staff_id = s.session().staff_id;
  o.item_id = item;
  o.procedure_id = proc;
  o.indicator = Indicator(v);
  o.timestamp = kOpen + std::chrono::minutes{minute};
  return o;
}

CaptureBatch full_session(const RegistryPtr& reg, const Id& session_id, const Id& client,
                          std::vector<Id> students = {"s1", "s2"}) {
  auto s = CaptureSession::open(reg, session_id, "L1", "st1", students, kOpen);
  int minute = 1;
  for (const auto& st : students) {
    s.record(make(s, st, "i1", "p1", 4, minute++));
    s.record(make(s, st, "i4", "p2", 5, minute++));
  }
  for (const auto& st : students) s.sign_out_student(st, kOpen + std::chrono::minutes{100});
  return s.sign_out_staff(kOpen + std::chrono::minutes{120}, client);
}

}  // namespace

TEST_CASE("open_session examples") {
  auto reg = fixtures::tiny_registry();
  SUBCASE("location with two procedures offers exactly those workflows") {
    auto s = CaptureSession::open(reg, "se1", "L1", "st1", {"s1"}, kOpen);
    CHECK(s.offered_procedures() == std::vector<Id>{"p1", "p2"});
    CHECK(s.workflow("p1") == std::vector<Id>{"i1", "i2", "i3"});
    CHECK_ERRC(s.workflow("p3"), Errc::item_not_in_location_workflows);
    CHECK(s.session().students.size() == 1);
    CHECK(s.session().state == SessionState::active);
  }
  SUBCASE("covering colleague: session attributed to the substitute") {
    auto s = CaptureSession::open(reg, "se1", "L1", "st3", {"s1", "s2"}, kOpen);
    CHECK(s.session().staff_id == "st3");
    s.record(make(s, "s1", "i1", "p1", 4, 5));
    CHECK(s.observations()[0].staff_id == "st3");
  }
  SUBCASE("errors") {
    CHECK_ERRC(CaptureSession::open(reg, "se1", "L9", "st1", {"s1"}, kOpen), Errc::unknown_location);
    CHECK_ERRC(CaptureSession::open(reg, "se1", "L1", "st1", {}, kOpen), Errc::empty_student_set);
    CHECK_ERRC(CaptureSession::open(reg, "se1", "L1", "st9", {"s1"}, kOpen), Errc::unknown_reference);
    CHECK_ERRC(CaptureSession::open(reg, "se1", "L1", "st1", {"s9"}, kOpen), Errc::unknown_reference);
    CHECK_ERRC(CaptureSession::open(reg, "se1", "L1", "st1", {"s1", "s1"}, kOpen), Errc::duplicate_id);
  }
}

TEST_CASE("record examples") {
  auto reg = fixtures::tiny_registry();
  auto s = CaptureSession::open(reg, "se1", "L1", "st1", {"s1", "s2"}, kOpen);
  SUBCASE("18 observations for one student, any order and subset") {
    const char* items[] = {"i3", "i1", "i2", "i5", "i4"};
    for (int k = 0; k < 18; ++k) {
      const char* item = items[k % 5];
      const char* proc = item[1] <= '3' ? "p1" : "p2";
      s.record(make(s, "s1", item, proc, 1 + k % 6, k));
    }
    CHECK(s.observations().size() == 18);
  }
  SUBCASE("after sign-out: locked record") {
    s.sign_out_student("s1", kOpen + std::chrono::minutes{30});
    CHECK_ERRC(s.record(make(s, "s1", "i1", "p1", 4, 20)), Errc::locked_record);
    CHECK_ERRC(s.record(make(s, "s1", "i1", "p1", 4, 40)), Errc::locked_record);
    CHECK(s.observations().empty());
    CHECK_NOTHROW(s.record(make(s, "s2", "i1", "p1", 4, 40)));
  }
  SUBCASE("procedure not offered at the location") {
    CHECK_ERRC(s.record(make(s, "s1", "i6", "p3", 4, 5)), Errc::item_not_in_location_workflows);
    CHECK_ERRC(s.record(make(s, "s1", "i4", "p1", 4, 5)), Errc::item_not_in_location_workflows);
  }
  SUBCASE("not attending") { CHECK_ERRC(s.record(make(s, "s3", "i1", "p1", 4, 5)), Errc::not_in_attendance); }
  SUBCASE("duplicate observation id") {
    auto o = make(s, "s1", "i1", "p1", 4, 5);
    s.record(o);
    CHECK_ERRC(s.record(o), Errc::duplicate_id);
  }
  SUBCASE("before the session opened") {
    CHECK_ERRC(s.record(make(s, "s1", "i1", "p1", 4, -5)), Errc::timestamp_out_of_session);
  }
}

TEST_CASE("student sign-out examples") {
  auto reg = fixtures::tiny_registry();
  auto s = CaptureSession::open(reg, "se1", "L1", "st1", {"s1", "s2"}, kOpen);
  s.record(make(s, "s1", "i1", "p1", 4, 5));
  auto o2 = make(s, "s1", "i2", "p1", 3, 6);
  o2.comment = "Check consent wording";
  s.record(o2);

  SUBCASE("both students locked") {
    s.sign_out_student("s1", kOpen + std::chrono::minutes{60});
    s.sign_out_student("s2", kOpen + std::chrono::minutes{61});
    for (const auto& a : s.session().students) CHECK(a.state == StudentState::signed_out);
  }
  SUBCASE("double sign-out") {
    s.sign_out_student("s1", kOpen + std::chrono::minutes{60});
    CHECK_ERRC(s.sign_out_student("s1", kOpen + std::chrono::minutes{61}), Errc::already_signed_out);
  }
  SUBCASE("frozen feedback") {
    const auto& f = s.sign_out_student("s1", kOpen + std::chrono::minutes{60}, "Well done");
    REQUIRE(f.entries.size() == 2);
    CHECK(f.entries[1].comment == "Check consent wording");
    CHECK(f.entries[1].indicator.value() == 3);
    CHECK(f.text == "Well done");
    CHECK(s.feedback("s1")->signed_out_at == kOpen + std::chrono::minutes{60});
  }
  SUBCASE("no observations: allowed, empty feedback, absent from the student's metrics") {
    const auto& f = s.sign_out_student("s2", kOpen + std::chrono::minutes{60});
    CHECK(f.entries.empty());
    s.sign_out_student("s1", kOpen + std::chrono::minutes{60});
    auto batch = s.sign_out_staff(kOpen + std::chrono::minutes{90}, "dev");
    ObservationLog log({batch.session}, batch.observations);
    CHECK_FALSE(sessional_consistency(log, {"s2", {}, 4, {}}).value().has_value());
    CHECK(sessional_consistency(log, {"s1", {}, 3, {}}).denominator == 1);
  }
  SUBCASE("not attending") {
    CHECK_ERRC(s.sign_out_student("s3", kOpen + std::chrono::minutes{60}), Errc::not_in_attendance);
  }
}

TEST_CASE("staff sign-out examples") {
  auto reg = fixtures::tiny_registry();
  auto s = CaptureSession::open(reg, "se1", "L1", "st1", {"s1", "s2"}, kOpen);
  s.record(make(s, "s1", "i1", "p1", 4, 5));
  SUBCASE("one student open") {
    s.sign_out_student("s1", kOpen + std::chrono::minutes{60});
    CHECK_ERRC(s.sign_out_staff(kOpen + std::chrono::minutes{90}, "dev"), Errc::students_still_open);
    CHECK(s.session().state == SessionState::active);
  }
  SUBCASE("all signed out: committed batch, then nothing else is accepted") {
    s.sign_out_student("s1", kOpen + std::chrono::minutes{60});
    s.sign_out_student("s2", kOpen + std::chrono::minutes{60});
    auto batch = s.sign_out_staff(kOpen + std::chrono::minutes{90}, "tablet-7");
    CHECK(batch.batch_id == "tablet-7/se1");
    CHECK(batch.session.state == SessionState::committed);
    CHECK(batch.session.closed_at == kOpen + std::chrono::minutes{90});
    CHECK(batch.observations.size() == 1);
    CHECK(batch.feedback.size() == 2);
    CHECK_ERRC(s.sign_out_staff(kOpen + std::chrono::minutes{91}, "tablet-7"), Errc::already_committed);
    CHECK_ERRC(s.record(make(s, "s1", "i1", "p1", 4, 5)), Errc::already_committed);
    CHECK_ERRC(s.sign_out_student("s1", kOpen + std::chrono::minutes{95}), Errc::already_committed);
  }
}

TEST_CASE("batch JSON round trip and malformed documents") {
  auto reg = fixtures::tiny_registry();
  auto b = full_session(reg, "se1", "dev");
  json j = b;
  CHECK(parse_batch(j) == b);
  CHECK(parse_batch(json::parse(j.dump())) == b);
  CHECK_ERRC(parse_batch(json::array()), Errc::malformed_batch);
  json missing = j;
  missing.erase("session");
  CHECK_ERRC(parse_batch(missing), Errc::malformed_batch);
  json bad_indicator = j;
  bad_indicator["observations"][0]["indicator"] = 9;
  CHECK_THROWS_AS(parse_batch(bad_indicator), Error);
}

TEST_CASE("sync examples") {
  auto reg = fixtures::tiny_registry();
  const Instant now = at("2016-10-04T00:00:00Z");
  SUBCASE("apply twice equals apply once") {
    auto b = full_session(reg, "se1", "dev");
    Store once, twice;
    once.apply(b, *reg, now);
    CHECK(twice.apply(b, *reg, now).status == ApplyResult::Status::applied);
    CHECK(twice.apply(b, *reg, now + std::chrono::hours{1}).status == ApplyResult::Status::duplicate);
    CHECK(once == twice);
    CHECK(once.state_hash() == twice.state_hash());
  }
  SUBCASE("two clients, same day: both sessions present") {
    Store st;
    st.apply(full_session(reg, "se1", "tab-a"), *reg, now);
    st.apply(full_session(reg, "se2", "tab-b"), *reg, now);
    CHECK(st.session_ids() == std::vector<Id>{"se1", "se2"});
    CHECK(st.observation_count() == 8);
  }
  SUBCASE("one invalid observation rejects the whole batch") {
    Store st;
    st.apply(full_session(reg, "se1", "dev"), *reg, now);
    auto before = st;
    auto b = full_session(reg, "se2", "dev");
    b.observations.back().item_id = "i6";  // p3 item under p2
    CHECK_THROWS_AS(st.apply(b, *reg, now), Error);
    CHECK(st == before);
    CHECK(st.state_hash() == before.state_hash());
  }
  SUBCASE("conflicts") {
    Store st;
    auto b = full_session(reg, "se1", "dev");
    st.apply(b, *reg, now);
    auto changed = b;
    changed.observations[0].indicator = Indicator(1);
    CHECK_ERRC(st.apply(changed, *reg, now), Errc::batch_conflict);
    auto other_client = full_session(reg, "se1", "other");
    CHECK_ERRC(st.apply(other_client, *reg, now), Errc::session_conflict);
    auto reused = full_session(reg, "se2", "dev");
    reused.observations[0].id = "se1/1";
    reused.observations[0].session_id = "se2";
    CHECK_ERRC(st.apply(reused, *reg, now), Errc::duplicate_id);
  }
  SUBCASE("uncommitted or locked content is malformed or rejected") {
    Store st;
    auto b = full_session(reg, "se1", "dev");
    auto active = b;
    active.session.state = SessionState::active;
    CHECK_THROWS_AS(st.apply(active, *reg, now), Error);
    auto late = b;
    late.observations[0].timestamp = *late.session.students[0].signed_out_at + std::chrono::seconds{1};
    CHECK_ERRC(st.apply(late, *reg, now), Errc::locked_record);
    CHECK(st.batch_count() == 0);
  }
  SUBCASE("every committed observation is reachable from exactly one batch") {
    Store st;
    st.apply(full_session(reg, "se1", "a"), *reg, now);
    st.apply(full_session(reg, "se2", "b"), *reg, now);
    auto log = st.log();
    for (const auto& o : log.observations()) CHECK(st.batches_containing(o.id).size() == 1);
  }
}

TEST_CASE("store JSON round trip and receipt times excluded from the hash") {
  auto reg = fixtures::tiny_registry();
  Store a, b;
  a.apply(full_session(reg, "se1", "x"), *reg, at("2016-10-04T00:00:00Z"));
  b.apply(full_session(reg, "se1", "x"), *reg, at("2017-01-01T00:00:00Z"));
  CHECK(a.state_hash() == b.state_hash());
  auto c = Store::from_json(json::parse(a.to_json().dump()));
  CHECK(c == a);
  CHECK(c.state_hash() == a.state_hash());
}

TEST_CASE("sync commutes across permutations and duplications") {
  auto reg = fixtures::tiny_registry();
  std::vector<CaptureBatch> batches;
  for (int i = 0; i < 6; ++i)
    batches.push_back(full_session(reg, "se" + std::to_string(i), "c" + std::to_string(i % 2),
                                   i % 3 == 0 ? std::vector<Id>{"s3"} : std::vector<Id>{"s1", "s2"}));
  Store reference;
  for (const auto& b : batches) reference.apply(b, *reg, kOpen);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CaptureBatch> delivery = batches;
    for (int d = std::uniform_int_distribution<int>(0, 6)(rng); d > 0; --d)
      delivery.push_back(batches[std::uniform_int_distribution<std::size_t>(0, batches.size() - 1)(rng)]);
    std::shuffle(delivery.begin(), delivery.end(), rng);
    Store st;
    for (const auto& b : delivery) st.apply(b, *reg, kOpen + std::chrono::hours{trial});
    CHECK(st.state_hash() == reference.state_hash());
    CHECK(st.session_ids() == reference.session_ids());
  }
}

TEST_CASE("revalidation against a new registry") {
  auto reg = fixtures::tiny_registry();
  Store st;
  st.apply(full_session(reg, "se1", "x"), *reg, kOpen);
  CHECK_NOTHROW(st.revalidate(*reg));
  json doc = fixtures::tiny_document();
  doc["procedures"][1]["workflow"] = {"i5"};  // i4 leaves p2
  CHECK_THROWS_AS(st.revalidate(Registry::load(doc)), Error);
}
