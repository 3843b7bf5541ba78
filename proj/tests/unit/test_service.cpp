#include <doctest.h>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "../support/process.hpp"
#include "wba/event_log.hpp"
#include "wba/report.hpp"
#include "wba/serialize.hpp"
#include "wba/service.hpp"
#include "wba/synth.hpp"

using namespace wba;
using fixtures::TempDir;
using nlohmann::json;

namespace {

synth::Cohort small_cohort(std::uint64_t seed = 1) {
  synth::CohortConfig c;
  c.seed = seed;
  c.n_students = 10;
  c.n_staff = 8;
  c.n_locations = 4;
  c.n_procedures = 6;
  c.items_per_procedure = 10;
  c.procedures_per_location = 3;
  c.n_questions = 20;
  c.n_teaching_units = 4;
  c.years = 1;
  c.weeks_per_year = 6;
  return synth::generate(c);
}

ApiResponse get(Service& s, const std::string& path, std::map<std::string, std::string> query = {}) {
  return s.handle({"GET", path, std::move(query), ""});
}

ApiResponse post(Service& s, const std::string& path, const json& body) {
  return s.handle({"POST", path, {}, body.dump()});
}

/// Every read a client could make, concatenated.
std::string all_outputs(Service& s) {
  std::string out;
  for (const char* name : {"coverage", "consistency", "calibration", "portfolio"}) out += s.export_report(name);
  auto students = json::parse(get(s, "/students").body);
  std::vector<std::string> paths{"/students", "/sessions", "/coverage"};
  if (!students.empty()) {
    auto first = students[0].get<std::string>();
    paths.push_back("/students/" + first + "/barcode");
    paths.push_back("/students/" + first + "/portfolio");
  }
  for (const auto& path : paths) out += get(s, path).body;
  return out;
}

void populate(Service& s, const synth::Cohort& c) {
  s.load_registry(c.registry->to_json());
  for (const auto& b : c.to_batches()) s.sync(b);
}

}  // namespace

TEST_CASE("event log append and replay") {
  TempDir dir;
  auto file = dir / "events.jsonl";
  {
    EventLog log(file);
    for (int i = 0; i < 3; ++i) log.append(EventKind::question_result, fixtures::at("2017-01-01T00:00:00Z"), {{"i", i}});
    CHECK(log.last_seq() == 3);
  }
  auto records = EventLog::read(file);
  REQUIRE(records.size() == 3);
  CHECK(records[2].seq == 3);
  CHECK(records[1].payload["i"] == 1);
  CHECK(EventLog(file).last_seq() == 3);
  CHECK(EventLog::read(dir / "missing.jsonl").empty());

  SUBCASE("truncated final record") {
    auto text = fixtures::read_file(file);
    fixtures::write_file(file, text.substr(0, text.size() - 7));
    try {
      EventLog::read(file);
      FAIL("expected CorruptLog");
    } catch (const CorruptLog& e) {
      CHECK(e.last_valid_seq() == 2);
      CHECK(e.code() == Errc::corrupt_log);
    }
  }
  SUBCASE("sequence gap") {
    auto text = fixtures::read_file(file);
    auto second = text.find('\n') + 1;
    auto third = text.find('\n', second) + 1;
    fixtures::write_file(file, text.substr(0, second) + text.substr(third));
    try {
      EventLog::read(file);
      FAIL("expected CorruptLog");
    } catch (const CorruptLog& e) {
      CHECK(e.last_valid_seq() == 1);
    }
  }
}

TEST_CASE("service on an empty directory") {
  TempDir dir;
  Service s(dir.path());
  CHECK(s.last_seq() == 0);
  CHECK(get(s, "/students").body == "[]");
  CHECK(get(s, "/sessions").body == "[]");
  CHECK(get(s, "/health").status == 200);
  auto coverage = json::parse(get(s, "/coverage").body);
  CHECK(coverage["rows"].empty());
  CHECK(s.export_report("consistency") == std::string(report::kConsistencyHeader) + "\n");
}

TEST_CASE("service writes, reads and restarts") {
  TempDir dir;
  auto cohort = small_cohort();
  std::string before;
  std::uint64_t seq = 0;
  {
    Service s(dir.path(), {.snapshot_every = 25});
    populate(s, cohort);
    seq = s.last_seq();
    CHECK(seq == 1 + cohort.sessions.size());

    SUBCASE("duplicate sync is a no-op and not logged") {
      auto r = s.sync(cohort.to_batches()[0]);
      CHECK(r.status == ApplyResult::Status::duplicate);
      CHECK(s.last_seq() == seq);
    }
    before = all_outputs(s);
  }
  CHECK_FALSE(std::filesystem::is_empty(Service::snapshot_dir(dir.path())));

  SUBCASE("restart reproduces every output") {
    Service again(dir.path(), {.snapshot_every = 25});
    CHECK(again.last_seq() == seq);
    CHECK(all_outputs(again) == before);
  }
  SUBCASE("replay without snapshots gives the same state") {
    std::filesystem::remove_all(Service::snapshot_dir(dir.path()));
    Service again(dir.path());
    CHECK(all_outputs(again) == before);
  }
  SUBCASE("a damaged snapshot falls back to the log") {
    for (const auto& e : std::filesystem::directory_iterator(Service::snapshot_dir(dir.path())))
      fixtures::write_file(e.path(), "{\"seq\":");
    Service again(dir.path());
    CHECK(all_outputs(again) == before);
  }
  SUBCASE("truncated log refuses to start") {
    auto file = Service::events_path(dir.path());
    auto text = fixtures::read_file(file);
    fixtures::write_file(file, text.substr(0, text.size() - 3));
    try {
      Service broken(dir.path());
      FAIL("expected CorruptLog");
    } catch (const CorruptLog& e) {
      CHECK(e.last_valid_seq() == seq - 1);
    }
  }
}

TEST_CASE("API payloads equal the library's on the same data") {
  TempDir dir;
  auto cohort = small_cohort(2);
  Service s(dir.path());
  populate(s, cohort);
  auto log = cohort.log();
  const auto& reg = *cohort.registry;
  auto mapping = MappingSet::from_registry(reg);

  CHECK(get(s, "/reports/consistency").body == report::consistency_csv(log, reg));
  CHECK(get(s, "/reports/portfolio").body == report::portfolio_csv(log, reg));
  CHECK(get(s, "/reports/calibration").body == report::calibration_csv(calibration_report(log, reg)));
  CHECK(get(s, "/reports/coverage").body == report::coverage_csv(coverage_report(reg, mapping, log, {})));

  const Id student = std::next(reg.students().begin(), 2)->first;
  ConsistencyQuery q{student, Scope::procedure("p2"), 3, {std::nullopt, std::nullopt, 4}};
  auto r = get(s, "/students/" + student + "/consistency", {{"scope", "procedure:p2"}, {"threshold", "3"}, {"last", "4"}});
  CHECK(r.body == report::consistency_json(q, sessional_consistency(log, q, &mapping)).dump());
  r = get(s, "/students/" + student + "/barcode", {{"scope", "procedure:p2"}, {"threshold", "3"}, {"last", "4"}});
  CHECK(r.body == report::barcode_json(q, barcode(log, q, &mapping)).dump());
  r = get(s, "/students/" + student + "/portfolio");
  CHECK(r.body == report::portfolio_json(student, {}, portfolio(log, reg, student)).dump());
  for (const auto& c : calibration_report(log, reg))
    CHECK(get(s, "/staff/" + c.staff_id + "/calibration").body == report::calibration_json(c).dump());
  auto session = get(s, "/sessions/" + cohort.sessions[0].id);
  CHECK(json::parse(session.body)["session"] == json(cohort.sessions[0]));
}

TEST_CASE("API errors and other writes") {
  TempDir dir;
  auto cohort = small_cohort(3);
  Service s(dir.path());
  populate(s, cohort);

  CHECK(get(s, "/students/nobody/consistency").status == 404);
  const Id student = cohort.registry->students().begin()->first;
  CHECK(get(s, "/students/" + student + "/consistency", {{"threshold", "7"}}).status == 400);
  CHECK(get(s, "/students/" + student + "/consistency", {{"threshold", "x"}}).status == 400);
  CHECK(get(s, "/nowhere").status == 404);
  CHECK(s.handle({"DELETE", "/students", {}, ""}).status == 405);
  CHECK(s.handle({"POST", "/sync", {}, "{not json"}).status == 400);
  CHECK(json::parse(s.handle({"POST", "/sync", {}, "{}"}).body)["error"] == "malformed-batch");

  auto seq = s.last_seq();
  auto conflicting = cohort.to_batches()[0];
  conflicting.observations[0].comment = "changed";
  CHECK(post(s, "/sync", conflicting).status == 409);
  CHECK(s.last_seq() == seq);

  auto q = cohort.registry->questions().begin()->first;
  auto r = post(s, "/questions/" + q + "/results", {{"correct", true}});
  CHECK(r.status == 200);
  CHECK(json::parse(r.body)["attempts"].get<int>() >= 1);
  CHECK(post(s, "/questions/none/results", {{"correct", true}}).status == 404);

  r = post(s, "/plans", json::object());
  REQUIRE(r.status == 200);
  auto id = json::parse(r.body)["plan_id"].get<std::string>();
  CHECK(json::parse(get(s, "/plans/" + id).body)["plan"] == json::parse(r.body)["plan"]);

  const Id outcome = cohort.registry->outcomes().begin()->first;
  json exam = {{"constraints", {{{"outcome_id", outcome}, {"min", 1000}}}}, {"size_limit", 5}};
  r = post(s, "/exams/generate", exam);
  CHECK(r.status == 422);
  CHECK(json::parse(r.body)["witness"]["outcome_id"] == outcome);

  // Everything above survives a restart.
  auto before = all_outputs(s) + get(s, "/plans/" + id).body + get(s, "/questions/" + q + "/performance").body;
  Service again(dir.path());
  CHECK(all_outputs(again) + get(again, "/plans/" + id).body + get(again, "/questions/" + q + "/performance").body ==
        before);
}

TEST_CASE("cli") {
  TempDir dir;
  const std::string cli = fixtures::quoted(WBA_CLI_PATH);
  const std::string small = " --students 6 --staff 6 --locations 3 --years 1 --weeks-per-year 4";

  SUBCASE("generate-cohort is deterministic") {
    REQUIRE(fixtures::run(cli + " generate-cohort --seed 7" + small + " -o " + fixtures::quoted(dir / "a")).exit_code == 0);
    REQUIRE(fixtures::run(cli + " generate-cohort --seed 7" + small + " -o " + fixtures::quoted(dir / "b")).exit_code == 0);
    for (const char* f : {"registry.json", "batches.jsonl"}) {
      auto a = fixtures::read_file(dir / "a" / f);
      CHECK_FALSE(a.empty());
      CHECK(a == fixtures::read_file(dir / "b" / f));
    }
  }
  SUBCASE("import then export matches the library") {
    auto gen = dir / "gen";
    auto data = fixtures::quoted(dir / "data");
    REQUIRE(fixtures::run(cli + " generate-cohort --seed 7" + small + " -o " + fixtures::quoted(gen)).exit_code == 0);
    REQUIRE(fixtures::run(cli + " load-registry -d " + data + " " + fixtures::quoted(gen / "registry.json")).exit_code == 0);
    REQUIRE(fixtures::run(cli + " import-batch -d " + data + " " + fixtures::quoted(gen / "batches.jsonl")).exit_code == 0);
    auto exported = fixtures::run(cli + " export-report consistency -d " + data);
    REQUIRE(exported.exit_code == 0);

    auto registry = Registry::load_text(fixtures::read_file(gen / "registry.json"));
    Store store;
    std::istringstream lines(fixtures::read_file(gen / "batches.jsonl"));
    for (std::string line; std::getline(lines, line);)
      if (!line.empty()) store.apply(parse_batch(json::parse(line)), registry, Instant{});
    CHECK(exported.out == report::consistency_csv(store.log(), registry));

    SUBCASE("malformed import exits non-zero and changes nothing") {
      auto events = fixtures::read_file(dir / "data" / "events.jsonl");
      fixtures::write_file(dir / "bad.jsonl", "{\"batch_id\": \"x\"}\n");
      auto r = fixtures::run(cli + " import-batch -d " + data + " " + fixtures::quoted(dir / "bad.jsonl"), dir / "err");
      CHECK(r.exit_code != 0);
      auto err = json::parse(fixtures::read_file(dir / "err"));
      CHECK(err["error"] == "malformed-batch");
      CHECK(fixtures::read_file(dir / "data" / "events.jsonl") == events);
    }
  }
  SUBCASE("usage errors") {
    CHECK(fixtures::run(cli + " export-report nonsense").exit_code == 2);
    CHECK(fixtures::run(cli + " import-batch -d " + fixtures::quoted(dir / "d") + " /no/such/file").exit_code == 1);
  }
}
