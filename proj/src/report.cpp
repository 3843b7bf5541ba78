#include "wba/report.hpp"

#include <cstdio>

#include "wba/serialize.hpp"

namespace wba::report {

using nlohmann::json;

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string optional_fixed(const std::optional<double>& v) { return v ? fixed(*v) : "NA"; }

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json ratio_json(const Ratio& r) {
  return {{"numerator", r.numerator}, {"denominator", r.denominator}, {"value", optional_json(r.value())}};
}

json window_json(const Window& w) {
  json j = json::object();
  if (w.from) j["from"] = format_instant(*w.from);
  if (w.to) j["to"] = format_instant(*w.to);
  if (w.last_sessions) j["last_sessions"] = *w.last_sessions;
  return j;
}

}  // namespace

json coverage_json(const CoverageReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"outcome_id", row.outcome_id},
                    {"wba_items", row.wba_items},
                    {"teaching_units", row.teaching_units},
                    {"questions", row.questions},
                    {"observations", row.observations},
                    {"question_attempts", row.question_attempts}});
  }
  return {{"rows", rows}};
}

std::string coverage_csv(const CoverageReport& r) {
  std::string out = std::string(kCoverageHeader) + "\n";
  for (const auto& row : r.rows) {
    out += csv_field(row.outcome_id) + "," + std::to_string(row.wba_items) + "," +
           std::to_string(row.teaching_units) + "," + std::to_string(row.questions) + "," +
           std::to_string(row.observations) + "," + std::to_string(row.question_attempts) + "\n";
  }
  return out;
}

json consistency_json(const ConsistencyQuery& q, const Ratio& r) {
  return {{"student_id", q.student_id}, {"scope", q.scope.str()},  {"threshold", q.threshold},
          {"window", window_json(q.window)}, {"meeting", r.numerator}, {"applicable", r.denominator},
          {"consistency", optional_json(r.value())}};
}

std::string consistency_csv(const ObservationLog& log, const Registry& registry, int threshold) {
  std::string out = std::string(kConsistencyHeader) + "\n";
  std::vector<Scope> scopes{Scope::all()};
  for (const auto& [id, p] : registry.procedures()) scopes.push_back(Scope::procedure(id));
  for (const auto& [student, s] : registry.students()) {
    for (const auto& scope : scopes) {
      ConsistencyQuery q{student, scope, threshold, {}};
      Ratio r = sessional_consistency(log, q);
      out += csv_field(student) + "," + csv_field(scope.str()) + "," + std::to_string(threshold) + "," +
             std::to_string(r.numerator) + "," + std::to_string(r.denominator) + "," +
             optional_fixed(r.value()) + "\n";
    }
  }
  return out;
}

json barcode_json(const ConsistencyQuery& q, const Barcode& b) {
  json cells = json::array();
  for (const auto& c : b.cells) {
    cells.push_back({{"observation_id", c.observation_id},
                     {"session_id", c.session_id},
                     {"timestamp", format_instant(c.timestamp)},
                     {"indicator", c.indicator},
                     {"meets", c.meets}});
  }
  return {{"student_id", q.student_id}, {"scope", q.scope.str()}, {"threshold", b.threshold},
          {"window", window_json(q.window)}, {"row", b.row()}, {"cells", cells}};
}

json portfolio_json(std::string_view student_id, const PortfolioConfig& config,
                    std::span<const PortfolioEntry> entries) {
  json rows = json::array();
  for (const auto& e : entries) {
    rows.push_back({{"procedure_id", e.procedure_id},
                    {"experience", e.experience_count},
                    {"consistency", ratio_json(e.consistency)},
                    {"sufficient", e.sufficient}});
  }
  return {{"student_id", student_id},
          {"min_experience", config.min_experience},
          {"sufficiency_threshold", config.sufficiency_threshold},
          {"indicator_threshold", config.indicator_threshold},
          {"procedures", rows}};
}

std::string portfolio_csv(const ObservationLog& log, const Registry& registry, const PortfolioConfig& config) {
  std::string out = std::string(kPortfolioHeader) + "\n";
  for (const auto& [student, s] : registry.students()) {
    for (const auto& e : portfolio(log, registry, student, config)) {
      out += csv_field(student) + "," + csv_field(e.procedure_id) + "," + std::to_string(e.experience_count) +
             "," + std::to_string(e.consistency.numerator) + "," + std::to_string(e.consistency.denominator) +
             "," + optional_fixed(e.consistency.value()) + "," + (e.sufficient ? "true" : "false") + "\n";
    }
  }
  return out;
}

json calibration_json(const StaffCalibration& c) {
  return {{"staff_id", c.staff_id},
          {"observations", c.observations},
          {"histogram", c.histogram},
          {"distinct_points", c.distinct_points},
          {"shared_items", c.shared_items},
          {"mean_offset", optional_json(c.mean_offset)},
          {"total_variation", optional_json(c.total_variation)}};
}

std::string calibration_csv(std::span<const StaffCalibration> rows) {
  std::string out = std::string(kCalibrationHeader) + "\n";
  for (const auto& c : rows) {
    out += csv_field(c.staff_id) + "," + std::to_string(c.observations);
    for (auto h : c.histogram) out += "," + std::to_string(h);
    out += "," + std::to_string(c.distinct_points) + "," + std::to_string(c.shared_items) + "," +
           optional_fixed(c.mean_offset) + "," + optional_fixed(c.total_variation) + "\n";
  }
  return out;
}

json blueprint_json(const BlueprintReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"outcome_id", row.constraint.outcome_id},
              {"min_questions", row.constraint.min_questions},
              {"max_questions", nullptr},
              {"actual", row.actual},
              {"satisfied", row.satisfied}};
    if (row.constraint.max_questions) j["max_questions"] = *row.constraint.max_questions;
    rows.push_back(std::move(j));
  }
  return {{"pass", r.pass}, {"constraints", rows}};
}

json plan_json(const AllocationPlan& p) {
  json assignments = json::array();
  for (const auto& a : p.assignments) {
    assignments.push_back({{"student_id", a.student_id},
                           {"slot_id", a.slot_id},
                           {"procedure_id", a.procedure_id},
                           {"priority", a.priority},
                           {"surplus", a.surplus}});
  }
  json holding = json::array();
  for (const auto& h : p.holding)
    holding.push_back({{"student_id", h.student_id}, {"procedure_id", h.procedure_id}, {"reason", h.reason}});
  json unassigned = json::array();
  for (const auto& u : p.unassigned)
    unassigned.push_back({{"student_id", u.student_id}, {"procedure_id", u.procedure_id}, {"priority", u.priority}});
  return {{"assignments", assignments}, {"holding", holding}, {"unassigned", unassigned}};
}

std::string plan_csv(const AllocationPlan& p) {
  std::string out = std::string(kPlanHeader) + "\n";
  for (const auto& a : p.assignments) {
    out += std::string(a.surplus ? "surplus" : "assigned") + "," + csv_field(a.student_id) + "," +
           csv_field(a.procedure_id) + "," + csv_field(a.slot_id) + "," + fixed(a.priority) + ",\n";
  }
  for (const auto& h : p.holding)
    out += "holding," + csv_field(h.student_id) + "," + csv_field(h.procedure_id) + ",,," + csv_field(h.reason) + "\n";
  for (const auto& u : p.unassigned) {
    out += "unassigned," + csv_field(u.student_id) + "," + csv_field(u.procedure_id) + ",," + fixed(u.priority) +
           ",no open slot\n";
  }
  return out;
}

json session_json(const Store::StoredBatch& b) {
  json j = b.batch;
  j["content_hash"] = b.content_hash;
  j["received_at"] = format_instant(b.received_at);
  return j;
}

}  // namespace wba::report
