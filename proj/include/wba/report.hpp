#pragma once

// Rendering of every report to its exported form. The CLI, the HTTP service
// and the Python module all go through these functions, so a given snapshot
// renders to the same bytes everywhere.
//
// Tables are comma separated with a single header line; undefined ratios
// are written as "NA", never as 0.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wba/analytics.hpp"
#include "wba/capture.hpp"
#include "wba/mapping.hpp"
#include "wba/scheduler.hpp"

namespace wba::report {

inline constexpr const char* kCoverageHeader =
    "outcome_id,wba_items,teaching_units,questions,observations,question_attempts";
inline constexpr const char* kConsistencyHeader =
    "student_id,scope,threshold,meeting,applicable,consistency";
inline constexpr const char* kCalibrationHeader =
    "staff_id,observations,h1,h2,h3,h4,h5,h6,distinct_points,shared_items,mean_offset,"
    "total_variation";
inline constexpr const char* kPortfolioHeader =
    "student_id,procedure_id,experience,meeting,applicable,consistency,sufficient";
inline constexpr const char* kPlanHeader = "kind,student_id,procedure_id,slot_id,priority,detail";

std::string csv_field(std::string_view text);

nlohmann::json coverage_json(const CoverageReport& r);
std::string coverage_csv(const CoverageReport& r);

nlohmann::json consistency_json(const ConsistencyQuery& q, const Ratio& r);

/// Every registry student, scope "all" followed by each procedure.
std::string consistency_csv(const ObservationLog& log, const Registry& registry,
                            int threshold = kDefaultThreshold);

nlohmann::json barcode_json(const ConsistencyQuery& q, const Barcode& b);

nlohmann::json portfolio_json(std::string_view student_id, const PortfolioConfig& config,
                              std::span<const PortfolioEntry> entries);
/// Every registry student.
std::string portfolio_csv(const ObservationLog& log, const Registry& registry,
                          const PortfolioConfig& config = {});

nlohmann::json calibration_json(const StaffCalibration& c);
std::string calibration_csv(std::span<const StaffCalibration> rows);

nlohmann::json blueprint_json(const BlueprintReport& r);
nlohmann::json plan_json(const AllocationPlan& p);
std::string plan_csv(const AllocationPlan& p);

nlohmann::json session_json(const Store::StoredBatch& b);

/// Fixed-precision number used in tables ("%.6f").
std::string fixed(double v);
std::string optional_fixed(const std::optional<double>& v);

}  // namespace wba::report
