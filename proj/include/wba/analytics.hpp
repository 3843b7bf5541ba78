#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wba/domain.hpp"
#include "wba/mapping.hpp"
#include "wba/observation_log.hpp"
#include "wba/registry.hpp"

namespace wba {

inline constexpr int kDefaultThreshold = 4;

/// How one session's in-scope indicators collapse to meets/fails.
enum class SessionRule {
  minimum,   // every in-scope indicator reaches the threshold
  mean,      // mean indicator reaches the threshold
  majority,  // more than half reach the threshold
};

/// Skills are interdependent, so one weak skill fails the session.
inline constexpr SessionRule kSessionRule = SessionRule::minimum;

struct Scope {
  enum class Kind { all, procedure, item, outcome };
  Kind kind = Kind::all;
  Id id;

  static Scope all() { return {}; }
  static Scope procedure(Id id) { return {Kind::procedure, std::move(id)}; }
  static Scope item(Id id) { return {Kind::item, std::move(id)}; }
  static Scope outcome(Id id) { return {Kind::outcome, std::move(id)}; }

  /// "all", "procedure:<id>", "item:<id>", "outcome:<id>".
  static Scope parse(std::string_view text);
  std::string str() const;

  bool operator==(const Scope&) const = default;
};

/// Window over sessions: a date range on the session's open time, then
/// optionally only the last N applicable sessions.
struct Window {
  std::optional<Instant> from;  // inclusive
  std::optional<Instant> to;    // exclusive
  std::optional<int> last_sessions;

  bool operator==(const Window&) const = default;
};

struct ConsistencyQuery {
  Id student_id;
  Scope scope;
  int threshold = kDefaultThreshold;
  Window window;

  /// Throws Errc::scale_violation for a threshold outside 1..6 and
  /// Errc::invalid_argument for last_sessions < 1.
  void validate() const;
};

/// Resolves a scope to an observation predicate. Outcome scopes follow the
/// workflow-item edges of the mapping.
class ScopeFilter {
 public:
  ScopeFilter(const Scope& scope, const MappingSet* mapping);
  bool operator()(const Observation& obs) const;

 private:
  Scope scope_;
  const MappingSet* mapping_;
};

enum class SessionOutcome { meets, fails, not_applicable };
std::string_view to_string(SessionOutcome o) noexcept;

/// Applies `rule` to a set of in-scope indicators; not_applicable when empty.
SessionOutcome judge_session(std::span<const int> indicators, int threshold,
                             SessionRule rule = kSessionRule);

SessionOutcome session_meets(const ObservationLog& log, std::string_view session_id,
                             std::string_view student_id, const ScopeFilter& scope,
                             int threshold, SessionRule rule = kSessionRule);

/// numerator/denominator with an explicit undefined state for 0/0.
struct Ratio {
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;

  std::optional<double> value() const {
    if (denominator == 0) return std::nullopt;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  bool operator==(const Ratio&) const = default;
};

/// Fraction of applicable sessions (in window) that meet the threshold.
/// Sessions without in-scope observations count in neither term.
Ratio sessional_consistency(const ObservationLog& log, const ConsistencyQuery& query,
                            const MappingSet* mapping = nullptr);

struct BarcodeCell {
  Id observation_id;
  Id session_id;
  Instant timestamp{};
  int indicator = 0;
  bool meets = false;

  bool operator==(const BarcodeCell&) const = default;
};

struct Barcode {
  int threshold = kDefaultThreshold;
  std::vector<BarcodeCell> cells;  // chronological

  /// '#' for a cell that meets the threshold, '.' otherwise.
  std::string row() const;
};

Barcode barcode(const ObservationLog& log, const ConsistencyQuery& query,
                const MappingSet* mapping = nullptr);

struct PortfolioConfig {
  // Configuration defaults, not empirically grounded values.
  int min_experience = 5;
  double sufficiency_threshold = 0.8;
  int indicator_threshold = kDefaultThreshold;

  void validate() const;
};

struct PortfolioEntry {
  Id procedure_id;
  std::int64_t experience_count = 0;
  Ratio consistency;
  bool sufficient = false;
};

/// One entry per registry procedure, in id order.
std::vector<PortfolioEntry> portfolio(const ObservationLog& log, const Registry& registry,
                                      std::string_view student_id,
                                      const PortfolioConfig& config = {});

struct StaffCalibration {
  Id staff_id;
  std::array<std::int64_t, 6> histogram{};  // index 0 is indicator 1
  std::int64_t observations = 0;
  int distinct_points = 0;
  std::int64_t shared_items = 0;
  /// Own mean minus leave-one-out cohort mean over items other staff also
  /// observed, weighted by own observation count per item.
  std::optional<double> mean_offset;
  /// Total-variation distance between own indicator distribution and the
  /// pooled distribution of every other staff member.
  std::optional<double> total_variation;
};

/// One entry per registry staff member, in id order.
std::vector<StaffCalibration> calibration_report(const ObservationLog& log,
                                                 const Registry& registry);

/// Per (student, procedure) progress used by scheduling.
struct Progress {
  std::optional<double> consistency;
  std::int64_t experience = 0;
};

class ProgressSnapshot {
 public:
  ProgressSnapshot() = default;

  static ProgressSnapshot from_log(const ObservationLog& log, const Registry& registry,
                                   int threshold = kDefaultThreshold);

  void set(const Id& student, const Id& procedure, Progress p);
  /// Unknown pairs read as {undefined, 0}.
  Progress get(std::string_view student, std::string_view procedure) const;

 private:
  std::map<std::pair<Id, Id>, Progress> entries_;
};

}  // namespace wba
