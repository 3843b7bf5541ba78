#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "wba/capture.hpp"
#include "wba/domain.hpp"
#include "wba/observation_log.hpp"
#include "wba/registry.hpp"

namespace wba::synth {

/// Seeded pseudorandom source with output that is identical on every
/// platform: the std::mt19937_64 engine (its sequence is fixed by the
/// standard) with hand-written transforms, since the standard library's
/// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Box-Muller; consumes two uniforms per call.
  double normal(double mean, double sd);
  /// Knuth multiplication method; intended for means below ~50.
  int poisson(double mean);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream from a seed and a stream label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

struct CohortConfig {
  std::size_t n_students = 300;
  std::size_t n_staff = 100;
  std::size_t n_locations = 20;
  std::size_t n_outcomes = 165;
  std::size_t n_procedures = 30;
  std::size_t items_per_procedure = 30;
  std::size_t procedures_per_location = 10;
  std::size_t n_questions = 400;
  std::size_t n_teaching_units = 40;

  int years = 5;
  int weeks_per_year = 36;
  /// Location rotations per year; each student visits distinct locations
  /// while there are enough of them.
  int rotations_per_year = 2;
  int clinic_slots_per_week = 10;
  double sessions_per_student_week = 1.5625;
  double mean_observations_per_session = 18.0;
  std::size_t max_students_per_session = 8;
  /// Chance a session is run by a colleague from another location.
  double cover_probability = 0.01;

  double staff_strictness_spread = 0.3;
  /// Fixed strictness for chosen staff indices (0-based), e.g. {{3, -1.0}}.
  std::map<std::size_t, double> strictness_overrides;

  /// Logistic learning curve per (student, procedure):
  ///   ability(t) = ceiling / (1 + exp(-rate * (t - midpoint))) + noise
  /// with midpoint chosen so ability(0) equals the initial ability.
  double ability_ceiling = 5.0;
  double ability_ceiling_spread = 0.3;
  double initial_ability = 2.0;
  double initial_ability_spread = 0.3;
  double learning_rate = 0.45;
  double learning_rate_spread = 0.1;
  double noise = 0.5;

  Date start_date = Date{std::chrono::year{2012}, std::chrono::September, std::chrono::day{3}};
  std::uint64_t seed = 1;

  /// Throws Errc::invalid_config.
  void validate() const;
};

struct Cohort {
  RegistryPtr registry;
  std::vector<Session> sessions;          // committed, by (opened_at, id)
  std::vector<Observation> observations;  // by session, then recording order
  std::map<Id, double> staff_strictness;  // ground truth

  ObservationLog log() const { return ObservationLog(sessions, observations); }

  /// One committed upload batch per session, with feedback frozen at each
  /// student's sign-out.
  std::vector<CaptureBatch> to_batches(const Id& client_id = "synth") const;
};

/// Deterministic for a fixed config (including seed).
Cohort generate(const CohortConfig& config);

enum class AnomalyKind { narrow_rater, inconsistent_student, non_improver };

AnomalyKind parse_anomaly_kind(std::string_view text);  // Errc::unknown_kind
std::string_view to_string(AnomalyKind k) noexcept;

struct AnomalyParams {
  /// Number of entities to alter; 0 leaves the log untouched.
  std::size_t count = 0;
  /// narrow_rater: indicator values the rater is restricted to.
  std::vector<int> support = {2, 3};
  /// inconsistent_student: every other session is pulled down to this.
  int low_indicator = 2;
  /// non_improver: indicators never exceed this.
  int cap = 3;
};

struct AnomalyLabel {
  AnomalyKind kind;
  Id entity_id;  // staff id for raters, student id otherwise

  bool operator==(const AnomalyLabel&) const = default;
};

struct AnomalyResult {
  Cohort cohort;
  std::vector<AnomalyLabel> labels;
};

AnomalyResult inject_anomaly(const Cohort& cohort, AnomalyKind kind, const AnomalyParams& params,
                             std::uint64_t seed);

}  // namespace wba::synth
