// Python module. Structured values cross the boundary as JSON text; the
// package's __init__ turns them into dicts and lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "wba/analytics.hpp"
#include "wba/capture.hpp"
#include "wba/mapping.hpp"
#include "wba/report.hpp"
#include "wba/scheduler.hpp"
#include "wba/serialize.hpp"
#include "wba/service.hpp"
#include "wba/synth.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace wba;

namespace {

/// A registry plus the batches synced against it.
class Dataset {
 public:
  explicit Dataset(const std::string& registry_document)
      : registry_(std::make_shared<const Registry>(Registry::load(json::parse(registry_document)))),
        mapping_(MappingSet::from_registry(*registry_)) {}

  std::string sync(const std::string& batch) {
    auto result = store_.apply(parse_batch(json::parse(batch)), *registry_, now_utc());
    log_.reset();
    return std::string(to_string(result.status));
  }

  std::uint64_t state_hash() const { return store_.state_hash(); }
  std::size_t observation_count() const { return store_.observation_count(); }
  std::string registry_json() const { return registry_->to_json().dump(); }

  std::pair<std::int64_t, std::int64_t> consistency(const ConsistencyQuery& q) {
    q.validate();
    auto r = sessional_consistency(log(), q, &mapping_);
    return {r.numerator, r.denominator};
  }

  std::string barcode_json(const ConsistencyQuery& q) {
    q.validate();
    return report::barcode_json(q, barcode(log(), q, &mapping_)).dump();
  }

  std::string portfolio_json(const std::string& student, int min_experience, double sufficiency, int threshold) {
    if (!registry_->student(student)) throw Error(Errc::unknown_reference, "unknown student '" + student + "'");
    PortfolioConfig c{min_experience, sufficiency, threshold};
    c.validate();
    return report::portfolio_json(student, c, portfolio(log(), *registry_, student, c)).dump();
  }

  std::string calibration_json() {
    json out = json::array();
    for (const auto& row : calibration_report(log(), *registry_)) out.push_back(report::calibration_json(row));
    return out.dump();
  }

  std::string report_csv(const std::string& name) {
    if (name == "coverage") return report::coverage_csv(coverage_report(*registry_, mapping_, log(), {}));
    if (name == "consistency") return report::consistency_csv(log(), *registry_);
    if (name == "calibration") return report::calibration_csv(calibration_report(log(), *registry_));
    if (name == "portfolio") return report::portfolio_csv(log(), *registry_);
    throw Error(Errc::invalid_argument, "unknown report '" + name + "'");
  }

  /// Every registry student against the registry's slots.
  std::string plan_json(std::optional<std::vector<Id>> students, std::vector<Id> procedures) {
    PlanRequest r;
    if (students) r.students = *students;
    else
      for (const auto& [id, s] : registry_->students()) r.students.push_back(id);
    r.procedures = std::move(procedures);
    for (const auto& [id, s] : registry_->slots()) r.slots.push_back(s);
    return report::plan_json(plan(r, ProgressSnapshot::from_log(log(), *registry_))).dump();
  }

  std::vector<Id> exam(const std::vector<std::tuple<Id, int, std::optional<int>>>& constraints, int size_limit) {
    ExamRequest r;
    for (const auto& [outcome, lo, hi] : constraints) r.constraints.push_back({outcome, lo, hi});
    r.size_limit = size_limit;
    return generate_exam(*registry_, mapping_, r);
  }

 private:
  const ObservationLog& log() {
    if (!log_) log_ = std::make_unique<ObservationLog>(store_.log());
    return *log_;
  }

  RegistryPtr registry_;
  MappingSet mapping_;
  Store store_;
  std::unique_ptr<ObservationLog> log_;
};

ConsistencyQuery make_query(const std::string& student, const std::string& scope, int threshold,
                            std::optional<int> last_sessions, std::optional<std::string> from,
                            std::optional<std::string> to) {
  ConsistencyQuery q{student, Scope::parse(scope), threshold, {}};
  q.window.last_sessions = last_sessions;
  if (from) q.window.from = parse_instant(*from);
  if (to) q.window.to = parse_instant(*to);
  return q;
}

/// Returns {"registry": ..., "batches": [...], "staff_strictness": {...},
/// "anomalies": [...]}.
std::string generate_cohort(const std::string& config_json) {
  auto j = json::parse(config_json);
  synth::CohortConfig c;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("seed", c.seed);
  take("students", c.n_students);
  take("staff", c.n_staff);
  take("locations", c.n_locations);
  take("procedures", c.n_procedures);
  take("procedures_per_location", c.procedures_per_location);
  take("items_per_procedure", c.items_per_procedure);
  take("questions", c.n_questions);
  take("years", c.years);
  take("weeks_per_year", c.weeks_per_year);
  take("noise", c.noise);
  if (j.contains("strictness_overrides"))
    for (const auto& [k, v] : j.at("strictness_overrides").items()) c.strictness_overrides[std::stoul(k)] = v;
  auto cohort = synth::generate(c);

  json anomalies = json::array();
  if (j.contains("anomaly")) {
    synth::AnomalyParams p;
    p.count = j.value("anomaly_count", std::size_t{1});
    auto kind = synth::parse_anomaly_kind(j.at("anomaly").get<std::string>());
    auto r = synth::inject_anomaly(cohort, kind, p, c.seed);
    cohort = std::move(r.cohort);
    for (const auto& l : r.labels) anomalies.push_back({{"kind", synth::to_string(l.kind)}, {"entity_id", l.entity_id}});
  }
  json out = {{"registry", cohort.registry->to_json()},
              {"batches", cohort.to_batches()},
              {"staff_strictness", cohort.staff_strictness},
              {"anomalies", anomalies}};
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_wba, m) {
  m.doc() = "Workplace-based assessment core";

  static py::exception<Error> error(m, "WbaError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InfeasibleExam& e) {
      json w = {{"outcome_id", e.witness().outcome_id}, {"min", e.witness().min_questions}};
      py::object args = py::make_tuple(std::string(e.code_name()), std::string(e.what()), w.dump());
      PyErr_SetObject(error.ptr(), args.ptr());
    } catch (const Error& e) {
      py::object args = py::make_tuple(std::string(e.code_name()), std::string(e.what()));
      PyErr_SetObject(error.ptr(), args.ptr());
    } catch (const json::exception& e) {
      py::object args = py::make_tuple(std::string("malformed-json"), std::string(e.what()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<const std::string&>(), py::arg("registry_json"))
      .def("sync", &Dataset::sync, py::arg("batch_json"))
      .def_property_readonly("state_hash", &Dataset::state_hash)
      .def_property_readonly("observation_count", &Dataset::observation_count)
      .def("registry_json", &Dataset::registry_json)
      .def(
          "consistency",
          [](Dataset& d, const std::string& student, const std::string& scope, int threshold,
             std::optional<int> last, std::optional<std::string> from, std::optional<std::string> to) {
            return d.consistency(make_query(student, scope, threshold, last, from, to));
          },
          py::arg("student"), py::arg("scope") = "all", py::arg("threshold") = kDefaultThreshold,
          py::arg("last_sessions") = py::none(), py::arg("from_") = py::none(), py::arg("to") = py::none())
      .def(
          "barcode_json",
          [](Dataset& d, const std::string& student, const std::string& scope, int threshold,
             std::optional<int> last) { return d.barcode_json(make_query(student, scope, threshold, last, {}, {})); },
          py::arg("student"), py::arg("scope") = "all", py::arg("threshold") = kDefaultThreshold,
          py::arg("last_sessions") = py::none())
      .def("portfolio_json", &Dataset::portfolio_json, py::arg("student"), py::arg("min_experience") = 5,
           py::arg("sufficiency") = 0.8, py::arg("threshold") = kDefaultThreshold)
      .def("calibration_json", &Dataset::calibration_json)
      .def("report", &Dataset::report_csv, py::arg("name"))
      .def("plan_json", &Dataset::plan_json, py::arg("students") = py::none(),
           py::arg("procedures") = std::vector<Id>{})
      .def("generate_exam", &Dataset::exam, py::arg("constraints"), py::arg("size_limit"));

  py::class_<Service>(m, "Service")
      .def(py::init([](const std::string& dir, std::uint64_t every) {
             return std::make_unique<Service>(dir, ServiceOptions{every});
           }),
           py::arg("data_dir"), py::arg("snapshot_every") = 1000)
      .def(
          "handle",
          [](Service& s, const std::string& method, const std::string& path, const std::string& body,
             std::map<std::string, std::string> query) {
            auto r = s.handle({method, path, std::move(query), body});
            return py::make_tuple(r.status, r.content_type, r.body);
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "",
          py::arg("query") = std::map<std::string, std::string>{})
      .def("export_report", &Service::export_report, py::arg("name"))
      .def_property_readonly("last_seq", &Service::last_seq);

  m.def("generate_cohort_json", &generate_cohort, py::arg("config_json") = "{}");
}
