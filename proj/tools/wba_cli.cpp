// Administration CLI. Every command prints its result on stdout; failures
// exit non-zero with one JSON line {"error": code, "message": text} on
// stderr.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "wba/report.hpp"
#include "wba/service.hpp"
#include "wba/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw wba::Error(wba::Errc::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw wba::Error(wba::Errc::parse_error, path.string() + " is not valid JSON");
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw wba::Error(wba::Errc::io_error, "cannot write " + path.string());
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-")
    std::cout << text << std::flush;
  else
    write_file(output, text);
}

/// A document is either one JSON batch or JSON lines of batches. Every batch
/// is parsed before any is applied.
std::vector<wba::CaptureBatch> read_batches(const fs::path& path) {
  std::string text = read_file(path);
  std::vector<wba::CaptureBatch> out;
  auto whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array())
      for (const auto& b : whole) out.push_back(wba::parse_batch(b));
    else
      out.push_back(wba::parse_batch(whole));
    return out;
  }
  std::istringstream lines(text);
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw wba::Error(wba::Errc::malformed_batch, path.string() + ":" + std::to_string(n) + ": not valid JSON");
    out.push_back(wba::parse_batch(j));
  }
  if (out.empty()) throw wba::Error(wba::Errc::malformed_batch, path.string() + " holds no batches");
  return out;
}

void keep_import(const wba::Service& service, const fs::path& source) {
  fs::path dest = service.data_dir() / "imports" /
                  (std::to_string(service.last_seq()) + "-" + source.filename().string());
  fs::copy_file(source, dest, fs::copy_options::overwrite_existing);
}

int serve(wba::Service& service, const std::string& host, int port) {
  // Block termination signals in every thread; a dedicated thread waits for
  // them and stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  wba::HttpServer server(service);
  int bound = server.bind(host, port);
  std::cout << json{{"listening", host + ":" + std::to_string(bound)}, {"seq", service.last_seq()}}.dump()
            << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workplace-based assessment platform"};
  app.require_subcommand(1);
  std::string data_dir = "data";
  auto add_data_dir = [&](CLI::App* cmd) {
    cmd->add_option("-d,--data-dir", data_dir, "Service data directory")->capture_default_str();
  };

  auto* load = app.add_subcommand("load-registry", "Load an entity-definition document");
  std::string registry_file;
  add_data_dir(load);
  load->add_option("file", registry_file)->required();

  auto* import = app.add_subcommand("import-batch", "Apply capture batches (JSON or JSON lines)");
  std::string batch_file;
  add_data_dir(import);
  import->add_option("file", batch_file)->required();

  auto* exportr = app.add_subcommand("export-report", "Print a report table as CSV");
  std::string report_name, output;
  add_data_dir(exportr);
  exportr->add_option("report", report_name)
      ->required()
      ->check(CLI::IsMember({"coverage", "consistency", "calibration", "portfolio"}));
  exportr->add_option("-o,--output", output);

  auto* gen = app.add_subcommand("generate-cohort", "Write a synthetic registry and batch log");
  wba::synth::CohortConfig cohort;
  std::string out_dir = "cohort", anomaly;
  wba::synth::AnomalyParams anomaly_params;
  gen->add_option("--seed", cohort.seed)->capture_default_str();
  gen->add_option("-o,--out", out_dir)->capture_default_str();
  gen->add_option("--students", cohort.n_students)->capture_default_str();
  gen->add_option("--staff", cohort.n_staff)->capture_default_str();
  gen->add_option("--locations", cohort.n_locations)->capture_default_str();
  gen->add_option("--years", cohort.years)->capture_default_str();
  gen->add_option("--weeks-per-year", cohort.weeks_per_year)->capture_default_str();
  gen->add_option("--noise", cohort.noise)->capture_default_str();
  gen->add_option("--anomaly", anomaly)
      ->check(CLI::IsMember({"narrow-rater", "inconsistent-student", "non-improver"}));
  gen->add_option("--anomaly-count", anomaly_params.count)->capture_default_str();

  auto* planc = app.add_subcommand("plan-allocations", "Plan one allocation round from current progress");
  std::string plan_request;
  bool plan_csv = false;
  add_data_dir(planc);
  planc->add_option("--request", plan_request, "JSON request; default plans every student and slot");
  planc->add_flag("--csv", plan_csv);

  auto* exam = app.add_subcommand("generate-exam", "Assemble an exam meeting a blueprint");
  std::string exam_request;
  add_data_dir(exam);
  exam->add_option("request", exam_request)->required();

  auto* srv = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t snapshot_every = wba::ServiceOptions{}.snapshot_every;
  add_data_dir(srv);
  srv->add_option("--host", host)->capture_default_str();
  srv->add_option("--port", port)->capture_default_str();
  srv->add_option("--snapshot-every", snapshot_every)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  }

  try {
    if (*gen) {
      auto c = wba::synth::generate(cohort);
      json labels = json::array();
      if (!anomaly.empty()) {
        auto r = wba::synth::inject_anomaly(c, wba::synth::parse_anomaly_kind(anomaly), anomaly_params,
                                            cohort.seed);
        c = std::move(r.cohort);
        for (const auto& l : r.labels) labels.push_back({{"kind", to_string(l.kind)}, {"entity_id", l.entity_id}});
      }
      std::string lines;
      for (const auto& b : c.to_batches()) lines += json(b).dump() + "\n";
      write_file(fs::path(out_dir) / "registry.json", c.registry->to_json().dump(2) + "\n");
      write_file(fs::path(out_dir) / "batches.jsonl", lines);
      if (!anomaly.empty()) write_file(fs::path(out_dir) / "labels.json", labels.dump(2) + "\n");
      std::cout << json{{"students", c.registry->students().size()},
                        {"sessions", c.sessions.size()},
                        {"observations", c.observations.size()},
                        {"out", out_dir}}
                       .dump()
                << std::endl;
      return 0;
    }

    wba::Service service(data_dir, {snapshot_every});
    if (*load) {
      auto result = service.load_registry(read_json(registry_file));
      keep_import(service, registry_file);
      std::cout << result.dump() << std::endl;
    } else if (*import) {
      auto batches = read_batches(batch_file);
      std::size_t applied = 0, duplicate = 0;
      for (const auto& b : batches) {
        auto r = service.sync(b);
        (r.status == wba::ApplyResult::Status::applied ? applied : duplicate)++;
      }
      keep_import(service, batch_file);
      std::cout << json{{"applied", applied}, {"duplicate", duplicate}, {"seq", service.last_seq()}}.dump()
                << std::endl;
    } else if (*exportr) {
      emit(service.export_report(report_name), output);
    } else if (*planc) {
      json request = plan_request.empty() ? json::object() : read_json(plan_request);
      json result = service.create_plan(request);
      if (plan_csv) {
        // Rebuild the typed plan from its JSON form for the table.
        wba::AllocationPlan p;
        for (const auto& a : result["plan"]["assignments"])
          p.assignments.push_back({a["student_id"], a["slot_id"], a["procedure_id"], a["priority"], a["surplus"]});
        for (const auto& h : result["plan"]["holding"])
          p.holding.push_back({h["student_id"], h["procedure_id"], h["reason"]});
        for (const auto& u : result["plan"]["unassigned"])
          p.unassigned.push_back({u["student_id"], u["procedure_id"], u["priority"]});
        std::cout << wba::report::plan_csv(p);
      } else {
        std::cout << result.dump() << std::endl;
      }
    } else if (*exam) {
      std::cout << service.generate_exam(read_json(exam_request)).dump() << std::endl;
    } else if (*srv) {
      return serve(service, host, port);
    }
    return 0;
  } catch (const wba::Error& e) {
    json err = {{"error", e.code_name()}, {"message", e.what()}};
    if (const auto* inf = dynamic_cast<const wba::InfeasibleExam*>(&e))
      err["witness"] = {{"outcome_id", inf->witness().outcome_id}, {"min", inf->witness().min_questions},
                        {"covered", inf->covered()}};
    if (const auto* corrupt = dynamic_cast<const wba::CorruptLog*>(&e)) err["last_valid_seq"] = corrupt->last_valid_seq();
    std::cerr << err.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "io-error"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
}
