#include <doctest.h>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "wba/registry.hpp"
#include "wba/serialize.hpp"
#include "wba/synth.hpp"

using namespace wba;
using fixtures::at;
using nlohmann::json;

TEST_CASE("indicator scale is 1 to 6") {
  for (int v = 1; v <= 6; ++v) CHECK(Indicator(v).value() == v);
  CHECK_ERRC(Indicator(0), Errc::scale_violation);
  CHECK_ERRC(Indicator(7), Errc::scale_violation);
  CHECK(Indicator(3) < Indicator(4));
  CHECK_FALSE(indicator_label(Indicator(1)).empty());
  CHECK(indicator_label(Indicator(1)) != indicator_label(Indicator(6)));
}

TEST_CASE("identifiers") {
  CHECK(is_valid_id("s1"));
  CHECK(is_valid_id(std::string(64, 'a')));
  CHECK_FALSE(is_valid_id(std::string(65, 'a')));
  CHECK_FALSE(is_valid_id(""));
  CHECK_ERRC(require_valid_id("", "student"), Errc::parse_error);
}

TEST_CASE("instants and dates round trip") {
  Instant t = at("2016-10-03T09:15:30Z");
  CHECK(format_instant(t) == "2016-10-03T09:15:30Z");
  CHECK(format_date(parse_date("2012-02-29")) == "2012-02-29");
  CHECK_ERRC(parse_instant("2016-10-03 09:15:30"), Errc::parse_error);
  CHECK_ERRC(parse_date("2013-02-29"), Errc::parse_error);
  CHECK(start_of(parse_date("2016-10-03")) == at("2016-10-03T00:00:00Z"));
}

TEST_CASE("registry load: sizes, empty document, dangling reference") {
  SUBCASE("165 outcomes, 30 procedures, 100 staff") {
    json doc = {{"outcomes", json::array()}, {"items", json::array()}, {"procedures", json::array()},
                {"staff", json::array()}};
    for (int i = 0; i < 165; ++i) doc["outcomes"].push_back({{"id", "o" + std::to_string(i)}});
    for (int p = 0; p < 30; ++p) {
      json flow = json::array();
      for (int i = 0; i < 3; ++i) {
        std::string id = "p" + std::to_string(p) + "i" + std::to_string(i);
        doc["items"].push_back({{"id", id}, {"outcomes", {"o" + std::to_string((p * 3 + i) % 165)}}});
        flow.push_back(id);
      }
      doc["procedures"].push_back({{"id", "p" + std::to_string(p)}, {"workflow", flow}});
    }
    for (int s = 0; s < 100; ++s) doc["staff"].push_back({{"id", "st" + std::to_string(s)}});
    auto r = Registry::load(doc);
    CHECK(r.outcomes().size() == 165);
    CHECK(r.procedures().size() == 30);
    CHECK(r.staff().size() == 100);
  }
  SUBCASE("empty document") {
    auto r = Registry::load(json::object());
    CHECK(r.empty());
    CHECK(Registry::load(r.to_json()) == r);
  }
  SUBCASE("procedure naming an undefined item") {
    json doc = fixtures::tiny_document();
    doc["procedures"][0]["workflow"].push_back("nope");
    CHECK_ERRC(Registry::load(doc), Errc::dangling_reference);
  }
}

TEST_CASE("registry load rejects malformed documents wholesale") {
  json base = fixtures::tiny_document();
  SUBCASE("duplicate id") {
    json doc = base;
    doc["staff"].push_back({{"id", "st1"}});
    CHECK_ERRC(Registry::load(doc), Errc::duplicate_id);
  }
  SUBCASE("item naming an undefined outcome") {
    json doc = base;
    doc["items"][0]["outcomes"] = {"o99"};
    CHECK_ERRC(Registry::load(doc), Errc::dangling_reference);
  }
  SUBCASE("location naming an undefined procedure") {
    json doc = base;
    doc["locations"][0]["procedures"].push_back("p9");
    CHECK_ERRC(Registry::load(doc), Errc::dangling_reference);
  }
  SUBCASE("slot with zero capacity") {
    json doc = base;
    doc["slots"][0]["capacity"] = 0;
    CHECK_THROWS_AS(Registry::load(doc), Error);
  }
  SUBCASE("question with no outcomes") {
    json doc = base;
    doc["questions"][0]["outcomes"] = json::array();
    CHECK_THROWS_AS(Registry::load(doc), Error);
  }
  SUBCASE("question with more correct than attempts") {
    json doc = base;
    doc["questions"][2]["correct"] = 11;
    CHECK_THROWS_AS(Registry::load(doc), Error);
  }
  SUBCASE("not JSON") { CHECK_ERRC(Registry::load_text("{outcomes:"), Errc::parse_error); }
  SUBCASE("wrong field type") {
    json doc = base;
    doc["students"][0]["enrollment_date"] = 5;
    CHECK_ERRC(Registry::load(doc), Errc::parse_error);
  }
}

TEST_CASE("an item may appear in more than one procedure") {
  json doc = fixtures::tiny_document();
  doc["procedures"][1]["workflow"].push_back("i1");
  auto r = Registry::load(doc);
  CHECK(r.procedure("p2")->position_of("i1") == 2);
  CHECK(r.procedure("p1")->position_of("i1") == 0);
}

TEST_CASE("registry round trip for generated registries") {
  for (std::uint64_t seed : {1, 2, 3}) {
    synth::CohortConfig c;
    c.seed = seed;
    c.n_students = 5;
    c.years = 1;
    c.weeks_per_year = 2;
    auto cohort = synth::generate(c);
    auto again = Registry::load(json::parse(cohort.registry->to_json().dump()));
    CHECK(again == *cohort.registry);
  }
  auto tiny = fixtures::tiny_registry();
  CHECK(Registry::load(tiny->to_json()) == *tiny);
}

namespace {

struct ObservationCase {
  RegistryPtr registry = fixtures::tiny_registry();
  Session session = fixtures::committed_session("se1", "L1", "st1", {"s1", "s2"}, at("2016-10-03T09:00:00Z"),
                                                at("2016-10-03T12:00:00Z"));
  Observation obs = fixtures::observation("se1/1", session, "s1", "i2", "p1", 4, at("2016-10-03T09:30:00Z"));

  ObservationCase() {
    session.state = SessionState::active;
    session.closed_at.reset();
    for (auto& a : session.students) {
      a.state = StudentState::open;
      a.signed_out_at.reset();
    }
  }
};

}  // namespace

TEST_CASE("validate_observation examples") {
  ObservationCase c;
  SUBCASE("indicator 4, item in procedure, open session: accepted unchanged") {
    const Observation& out = validate_observation(c.obs, *c.registry, c.session);
    CHECK(&out == &c.obs);
  }
  SUBCASE("indicator 7: scale violation at construction") {
    CHECK_ERRC(Indicator(7), Errc::scale_violation);
    json j = c.obs;
    j["indicator"] = 7;
    CHECK_ERRC(j.get<Observation>(), Errc::scale_violation);
  }
  SUBCASE("student already signed out: locked record") {
    c.session.students[0].state = StudentState::signed_out;
    c.session.students[0].signed_out_at = at("2016-10-03T09:10:00Z");
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::locked_record);
  }
  SUBCASE("dangling ids") {
    c.obs.item_id = "i99";
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::unknown_reference);
  }
  SUBCASE("item outside the procedure") {
    c.obs.item_id = "i4";
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::item_procedure_mismatch);
  }
  SUBCASE("student not attending") {
    c.obs.student_id = "s3";
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::not_in_attendance);
  }
  SUBCASE("wrong session") {
    c.obs.session_id = "se2";
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::session_mismatch);
  }
  SUBCASE("before the session opened") {
    c.obs.timestamp = at("2016-10-03T08:59:59Z");
    CHECK_ERRC(validate_observation(c.obs, *c.registry, c.session), Errc::timestamp_out_of_session);
  }
  SUBCASE("comment limit counts characters, not bytes") {
    std::string ok;
    for (int i = 0; i < 2000; ++i) ok += "\xC3\xA9";  // 2000 two-byte characters
    c.obs.comment = ok;
    CHECK_NOTHROW(validate_observation(c.obs, *c.registry, c.session));
    c.obs.comment = ok + "x";
    CHECK_THROWS_AS(validate_observation(c.obs, *c.registry, c.session), Error);
  }
}

TEST_CASE("validate_observation is pure") {
  ObservationCase c;
  auto registry_before = c.registry->to_json().dump();
  auto obs_before = c.obs;
  auto session_before = c.session;
  validate_observation(c.obs, *c.registry, c.session);
  c.obs.indicator = Indicator(6);
  c.session.students[0].state = StudentState::signed_out;
  c.session.students[0].signed_out_at = at("2016-10-03T09:00:00Z");
  auto locked_obs = c.obs;
  auto locked_session = c.session;
  CHECK_THROWS(validate_observation(c.obs, *c.registry, c.session));
  CHECK(c.registry->to_json().dump() == registry_before);
  CHECK(c.obs == locked_obs);
  CHECK(c.session == locked_session);
  CHECK(obs_before.indicator.value() == 4);
  CHECK(session_before.students[0].state == StudentState::open);
}

TEST_CASE("accepted observations satisfy every type invariant") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto w = fixtures::random_world(seed, 200);
    for (const auto& o : w.observations) {
      const Session* s = nullptr;
      for (const auto& x : w.sessions)
        if (x.id == o.session_id) s = &x;
      REQUIRE(s);
      try {
        validate_observation(o, *w.registry, *s);
      } catch (const Error&) {
        continue;
      }
      CHECK(o.indicator.value() >= 1);
      CHECK(o.indicator.value() <= 6);
      CHECK(w.registry->procedure(o.procedure_id)->position_of(o.item_id).has_value());
      CHECK(s->attendance(o.student_id) != nullptr);
      CHECK(o.timestamp >= s->opened_at);
      CHECK(is_valid_id(o.id));
    }
  }
}

TEST_CASE("observation JSON round trip") {
  ObservationCase c;
  c.obs.comment = "Good, \"careful\" work";
  json j = c.obs;
  CHECK(j.get<Observation>() == c.obs);
  CHECK(j["timestamp"] == "2016-10-03T09:30:00Z");
  json s = c.session;
  CHECK(s.get<Session>() == c.session);
}
