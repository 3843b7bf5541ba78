#include "wba/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <unordered_map>

#include "wba/error.hpp"
#include "wba/serialize.hpp"

namespace wba::synth {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection keeps the result unbiased.
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal(double mean, double sd) {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::poisson(double mean) {
  if (mean <= 0) return 0;
  double limit = std::exp(-mean);
  double p = 1.0;
  int k = -1;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return fnv1a64(std::to_string(seed) + ":" + std::string(stream));
}

void CohortConfig::validate() const {
  auto bad = [](const std::string& why) { return Error(Errc::invalid_config, why); };
  if (n_students == 0 || n_staff == 0 || n_locations == 0 || n_outcomes == 0 || n_procedures == 0 ||
      items_per_procedure == 0 || procedures_per_location == 0)
    throw bad("all entity counts must be positive");
  if (procedures_per_location > n_procedures) throw bad("procedures_per_location exceeds n_procedures");
  if (years < 1 || weeks_per_year < 1 || rotations_per_year < 1) throw bad("program length must be positive");
  if (clinic_slots_per_week < 1 || clinic_slots_per_week > 14) throw bad("clinic_slots_per_week must be 1-14");
  if (!(sessions_per_student_week > 0) || sessions_per_student_week > clinic_slots_per_week)
    throw bad("sessions_per_student_week must be in (0, clinic_slots_per_week]");
  if (!(mean_observations_per_session > 0)) throw bad("mean_observations_per_session must be positive");
  if (mean_observations_per_session > 50) throw bad("mean_observations_per_session above 50 is unsupported");
  if (max_students_per_session == 0) throw bad("max_students_per_session must be positive");
  if (!(cover_probability >= 0 && cover_probability <= 1)) throw bad("cover_probability must be in [0, 1]");
  if (!(staff_strictness_spread >= 0) || !(noise >= 0) || !(ability_ceiling_spread >= 0) ||
      !(initial_ability_spread >= 0) || !(learning_rate_spread >= 0))
    throw bad("spreads and noise must be non-negative");
  if (!(ability_ceiling > 0) || !(initial_ability > 0) || !(initial_ability < ability_ceiling))
    throw bad("need 0 < initial_ability < ability_ceiling");
  if (!(learning_rate > 0)) throw bad("learning_rate must be positive");
  for (const auto& [idx, s] : strictness_overrides)
    if (idx >= n_staff || !std::isfinite(s)) throw bad("strictness override out of range");
  if (!start_date.ok()) throw bad("invalid start_date");
}

namespace {

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

int width_for(std::size_t n) {
  int w = 1;
  for (std::size_t x = n; x >= 10; x /= 10) ++w;
  return std::max(w, 2);
}

std::vector<Id> sample_outcomes(Rng& rng, const std::vector<Id>& outcomes, std::size_t lo, std::size_t hi) {
  std::size_t k = lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  k = std::min(k, outcomes.size());
  std::vector<Id> out;
  while (out.size() < k) {
    const Id& o = outcomes[rng.below(outcomes.size())];
    if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  }
  return out;
}

struct Learner {
  double ceiling;
  double rate;
  double midpoint;
};

}  // namespace

Cohort generate(const CohortConfig& config) {
  config.validate();
  Rng rng(config.seed);

  // --- entities -------------------------------------------------------------
  Registry::Builder b;
  std::vector<Id> outcome_ids;
  for (std::size_t i = 0; i < config.n_outcomes; ++i) {
    Id id = padded("o", i + 1, width_for(config.n_outcomes));
    b.add(LearningOutcome{id, "Learning outcome " + std::to_string(i + 1),
                          i % 3 == 0 ? Authority::external_stakeholder : Authority::internal});
    outcome_ids.push_back(std::move(id));
  }

  std::vector<Id> proc_ids;
  std::vector<std::vector<Id>> workflows;
  for (std::size_t p = 0; p < config.n_procedures; ++p) {
    Id pid = padded("p", p + 1, width_for(config.n_procedures));
    std::vector<Id> flow;
    for (std::size_t i = 0; i < config.items_per_procedure; ++i) {
      Id iid = pid + padded(".i", i + 1, width_for(config.items_per_procedure));
      b.add(WorkflowItem{iid, "Step " + std::to_string(i + 1) + " of " + pid,
                         sample_outcomes(rng, outcome_ids, 1, 3)});
      flow.push_back(std::move(iid));
    }
    b.add(Procedure{pid, "Procedure " + std::to_string(p + 1), flow});
    proc_ids.push_back(pid);
    workflows.push_back(std::move(flow));
  }

  std::vector<Id> staff_ids;
  Cohort cohort;
  for (std::size_t s = 0; s < config.n_staff; ++s) {
    Id id = padded("st", s + 1, width_for(config.n_staff));
    b.add(StaffMember{id, "Staff " + std::to_string(s + 1)});
    double strictness = rng.normal(0.0, config.staff_strictness_spread);
    if (auto it = config.strictness_overrides.find(s); it != config.strictness_overrides.end())
      strictness = it->second;
    cohort.staff_strictness.emplace(id, strictness);
    staff_ids.push_back(std::move(id));
  }

  std::vector<Id> student_ids;
  const std::string cohort_name = "Y" + std::to_string(static_cast<int>(config.start_date.year()));
  for (std::size_t s = 0; s < config.n_students; ++s) {
    Id id = padded("s", s + 1, std::max(width_for(config.n_students), 4));
    b.add(Student{id, cohort_name, config.start_date});
    student_ids.push_back(std::move(id));
  }

  std::vector<Id> location_ids;
  std::vector<std::vector<std::size_t>> location_procs(config.n_locations);
  for (std::size_t l = 0; l < config.n_locations; ++l) {
    Id id = padded("l", l + 1, width_for(config.n_locations));
    std::vector<Id> offered;
    for (std::size_t j = 0; j < config.procedures_per_location; ++j) {
      std::size_t p = (l * config.procedures_per_location + j) % config.n_procedures;
      location_procs[l].push_back(p);
      offered.push_back(proc_ids[p]);
    }
    b.add(Location{id, "Clinic " + std::to_string(l + 1), std::move(offered)});
    location_ids.push_back(std::move(id));
  }

  for (std::size_t q = 0; q < config.n_questions; ++q) {
    b.add(ExamQuestion{padded("q", q + 1, std::max(width_for(config.n_questions), 4)),
                       "Question " + std::to_string(q + 1), sample_outcomes(rng, outcome_ids, 1, 2)});
  }
  for (std::size_t t = 0; t < config.n_teaching_units; ++t) {
    b.add(TeachingUnit{padded("t", t + 1, width_for(config.n_teaching_units)),
                       "Teaching unit " + std::to_string(t + 1), sample_outcomes(rng, outcome_ids, 1, 4)});
  }

  const int total_weeks = config.years * config.weeks_per_year;
  const Date after_program{std::chrono::sys_days{config.start_date} + std::chrono::days{7 * total_weeks}};
  for (std::size_t p = 0; p < config.n_procedures; ++p) {
    b.add(PatientSlot{padded("slot", p + 1, width_for(config.n_procedures)), proc_ids[p], after_program,
                      1 + static_cast<int>(p % 3)});
  }
  cohort.registry = std::make_shared<const Registry>(std::move(b).build());

  // Staff work at a home location; 100 staff over 20 sites gives 5 each.
  std::vector<std::vector<std::size_t>> location_staff(config.n_locations);
  for (std::size_t s = 0; s < config.n_staff; ++s) location_staff[s % config.n_locations].push_back(s);

  // --- learners and rotations ------------------------------------------------
  std::vector<std::vector<Learner>> learners(config.n_students);
  std::vector<std::vector<std::size_t>> rotation(config.n_students);
  std::vector<double> phase(config.n_students);
  const int n_blocks = config.years * config.rotations_per_year;
  for (std::size_t s = 0; s < config.n_students; ++s) {
    for (std::size_t p = 0; p < config.n_procedures; ++p) {
      double ceiling = std::max(0.5, rng.normal(config.ability_ceiling, config.ability_ceiling_spread));
      double initial = std::clamp(rng.normal(config.initial_ability, config.initial_ability_spread),
                                  0.05, ceiling - 0.05);
      double rate = std::max(0.05, rng.normal(config.learning_rate, config.learning_rate_spread));
      learners[s].push_back({ceiling, rate, std::log(ceiling / initial - 1.0) / rate});
    }
    std::vector<std::size_t> order(config.n_locations);
    for (std::size_t l = 0; l < order.size(); ++l) order[l] = l;
    rng.shuffle(order);
    for (int blk = 0; blk < n_blocks; ++blk) rotation[s].push_back(order[blk % order.size()]);
    phase[s] = rng.uniform();
  }
  const int block_weeks = (total_weeks + n_blocks - 1) / n_blocks;

  // --- sessions ---------------------------------------------------------------
  std::vector<std::vector<int>> attempts(config.n_students, std::vector<int>(config.n_procedures, 0));
  std::size_t session_counter = 0;
  const auto slots = static_cast<std::size_t>(config.clinic_slots_per_week);
  std::vector<std::vector<std::size_t>> attendees(config.n_locations * slots);
  std::vector<std::size_t> slot_pick(slots);

  for (int week = 0; week < total_weeks; ++week) {
    for (auto& a : attendees) a.clear();
    for (std::size_t s = 0; s < config.n_students; ++s) {
      // Stratified so every student gets the same number of sessions +-1.
      auto cum = [&](int w) {
        return static_cast<long>(std::floor(config.sessions_per_student_week * w + phase[s]));
      };
      long n = cum(week + 1) - cum(week);
      std::size_t loc = rotation[s][static_cast<std::size_t>(std::min(week / block_weeks, n_blocks - 1))];
      for (std::size_t k = 0; k < slots; ++k) slot_pick[k] = k;
      for (long k = 0; k < n; ++k) {
        auto j = static_cast<std::size_t>(k) + rng.below(slots - static_cast<std::size_t>(k));
        std::swap(slot_pick[static_cast<std::size_t>(k)], slot_pick[j]);
        attendees[loc * slots + slot_pick[static_cast<std::size_t>(k)]].push_back(s);
      }
    }

    for (std::size_t slot = 0; slot < slots; ++slot) {
      for (std::size_t loc = 0; loc < config.n_locations; ++loc) {
        const auto& present = attendees[loc * slots + slot];
        for (std::size_t first = 0; first < present.size(); first += config.max_students_per_session) {
          std::size_t last = std::min(present.size(), first + config.max_students_per_session);

          const auto& home = location_staff[loc];
          std::size_t staff = home.empty() || rng.bernoulli(config.cover_probability)
                                  ? static_cast<std::size_t>(rng.below(config.n_staff))
                                  : home[rng.below(home.size())];
          double strictness = cohort.staff_strictness.at(staff_ids[staff]);

          Session session;
          session.id = padded("se", ++session_counter, 6);
          session.location_id = location_ids[loc];
          session.staff_id = staff_ids[staff];
          session.opened_at = start_of(config.start_date) +
                              std::chrono::days{week * 7 + static_cast<int>(slot / 2)} +
                              std::chrono::hours{slot % 2 == 0 ? 9 : 14};
          session.closed_at = session.opened_at + std::chrono::hours{3};
          session.state = SessionState::committed;

          std::size_t obs_counter = 0;
          for (std::size_t i = first; i < last; ++i) {
            std::size_t s = present[i];
            Instant signed_out = session.opened_at + std::chrono::minutes{170} +
                                 std::chrono::seconds{static_cast<long>(i - first)};
            session.students.push_back({student_ids[s], StudentState::signed_out, signed_out});

            std::size_t p = location_procs[loc][rng.below(location_procs[loc].size())];
            const auto& flow = workflows[p];
            const Learner& learner = learners[s][p];
            int t = attempts[s][p]++;
            double curve = learner.ceiling / (1.0 + std::exp(-learner.rate * (t - learner.midpoint)));

            auto k = static_cast<std::size_t>(std::clamp<long>(
                rng.poisson(config.mean_observations_per_session), 1, static_cast<long>(flow.size())));
            std::vector<std::size_t> steps(flow.size());
            for (std::size_t j = 0; j < steps.size(); ++j) steps[j] = j;
            for (std::size_t j = 0; j < k; ++j) std::swap(steps[j], steps[j + rng.below(steps.size() - j)]);
            std::sort(steps.begin(), steps.begin() + static_cast<long>(k));

            for (std::size_t j = 0; j < k; ++j) {
              double ability = curve + (config.noise > 0 ? rng.normal(0.0, config.noise) : 0.0);
              long v = std::clamp(std::lround(ability + strictness), 1L, 6L);
              Observation obs;
              obs.id = session.id + "/" + std::to_string(++obs_counter);
              obs.session_id = session.id;
              obs.student_id = student_ids[s];
              obs.staff_id = session.staff_id;
              obs.item_id = flow[steps[j]];
              obs.procedure_id = proc_ids[p];
              obs.indicator = Indicator(static_cast<int>(v));
              obs.timestamp = session.opened_at + std::chrono::minutes{5 * static_cast<long>(j + 1)};
              cohort.observations.push_back(std::move(obs));
            }
          }
          cohort.sessions.push_back(std::move(session));
        }
      }
    }
  }
  return cohort;
}

std::vector<CaptureBatch> Cohort::to_batches(const Id& client_id) const {
  std::vector<CaptureBatch> batches;
  batches.reserve(sessions.size());
  std::unordered_map<std::string_view, std::size_t> index;
  for (const auto& s : sessions) {
    index.emplace(s.id, batches.size());
    CaptureBatch b;
    b.batch_id = client_id + "/" + s.id;
    b.client_id = client_id;
    b.session = s;
    batches.push_back(std::move(b));
  }
  for (const auto& o : observations) batches[index.at(o.session_id)].observations.push_back(o);
  for (auto& b : batches) {
    for (const auto& a : b.session.students) {
      FeedbackSnapshot f{a.student_id, *a.signed_out_at, {}, std::nullopt};
      for (const auto& o : b.observations)
        if (o.student_id == a.student_id) f.entries.push_back({o.id, o.item_id, o.indicator, o.comment});
      b.feedback.push_back(std::move(f));
    }
  }
  return batches;
}

AnomalyKind parse_anomaly_kind(std::string_view text) {
  if (text == "narrow-rater") return AnomalyKind::narrow_rater;
  if (text == "inconsistent-student") return AnomalyKind::inconsistent_student;
  if (text == "non-improver") return AnomalyKind::non_improver;
  throw Error(Errc::unknown_kind, "unknown anomaly kind '" + std::string(text) + "'");
}

std::string_view to_string(AnomalyKind k) noexcept {
  switch (k) {
    case AnomalyKind::narrow_rater: return "narrow-rater";
    case AnomalyKind::inconsistent_student: return "inconsistent-student";
    case AnomalyKind::non_improver: return "non-improver";
  }
  return "unknown";
}

namespace {

std::vector<Id> pick(Rng& rng, std::vector<Id> pool, std::size_t count) {
  rng.shuffle(pool);
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

void narrow(std::vector<Observation>& observations, const std::set<Id>& raters, const std::vector<int>& support) {
  // Nearest support point, ties to the lower one.
  auto nearest = [&](int v) {
    int best = support.front();
    for (int s : support)
      if (std::abs(s - v) < std::abs(best - v)) best = s;
    return best;
  };
  for (const auto& rater : raters) {
    std::vector<Observation*> mine;
    std::set<int> used;
    for (auto& o : observations) {
      if (o.staff_id != rater) continue;
      mine.push_back(&o);
    }
    std::vector<int> original;
    for (auto* o : mine) {
      original.push_back(o->indicator.value());
      o->indicator = Indicator(nearest(o->indicator.value()));
      used.insert(o->indicator.value());
    }
    // Make every support point appear: move the observation whose original
    // value lies closest to an unused point (and whose current value is
    // shared with another observation) onto that point.
    for (int target : support) {
      if (used.contains(target)) continue;
      std::map<int, int> counts;
      for (auto* o : mine) ++counts[o->indicator.value()];
      std::size_t best = mine.size();
      for (std::size_t i = 0; i < mine.size(); ++i) {
        if (counts[mine[i]->indicator.value()] < 2) continue;
        if (best == mine.size() ||
            std::abs(original[i] - target) < std::abs(original[best] - target))
          best = i;
      }
      if (best == mine.size()) break;
      mine[best]->indicator = Indicator(target);
      used.insert(target);
    }
  }
}

}  // namespace

AnomalyResult inject_anomaly(const Cohort& cohort, AnomalyKind kind, const AnomalyParams& params,
                             std::uint64_t seed) {
  AnomalyResult result{cohort, {}};
  if (params.count == 0) return result;
  Rng rng(derive_seed(seed, to_string(kind)));
  auto& obs = result.cohort.observations;

  switch (kind) {
    case AnomalyKind::narrow_rater: {
      std::vector<int> support = params.support;
      std::sort(support.begin(), support.end());
      support.erase(std::unique(support.begin(), support.end()), support.end());
      if (support.empty() || support.front() < Indicator::kMin || support.back() > Indicator::kMax)
        throw Error(Errc::invalid_argument, "narrow-rater support must be non-empty values in 1-6");
      std::map<Id, std::size_t> counts;
      for (const auto& o : obs) ++counts[o.staff_id];
      std::vector<Id> eligible;
      for (const auto& [id, n] : counts)
        if (n >= support.size()) eligible.push_back(id);
      auto chosen = pick(rng, eligible, params.count);
      narrow(obs, std::set<Id>(chosen.begin(), chosen.end()), support);
      for (const auto& id : chosen) result.labels.push_back({kind, id});
      break;
    }
    case AnomalyKind::inconsistent_student: {
      std::vector<Id> students;
      for (const auto& [id, s] : cohort.registry->students()) students.push_back(id);
      auto chosen = pick(rng, students, params.count);
      std::set<Id> targets(chosen.begin(), chosen.end());
      // Session order per student follows the (already chronological)
      // session list.
      std::map<Id, std::map<Id, std::size_t>> ordinal;
      for (const auto& s : cohort.sessions)
        for (const auto& a : s.students)
          if (targets.contains(a.student_id)) {
            auto& m = ordinal[a.student_id];
            m.emplace(s.id, m.size());
          }
      for (auto& o : obs) {
        if (!targets.contains(o.student_id)) continue;
        if (ordinal[o.student_id].at(o.session_id) % 2 == 1)
          o.indicator = Indicator(std::min(o.indicator.value(), params.low_indicator));
      }
      for (const auto& id : chosen) result.labels.push_back({kind, id});
      break;
    }
    case AnomalyKind::non_improver: {
      std::vector<Id> students;
      for (const auto& [id, s] : cohort.registry->students()) students.push_back(id);
      auto chosen = pick(rng, students, params.count);
      std::set<Id> targets(chosen.begin(), chosen.end());
      for (auto& o : obs)
        if (targets.contains(o.student_id))
          o.indicator = Indicator(std::min(o.indicator.value(), params.cap));
      for (const auto& id : chosen) result.labels.push_back({kind, id});
      break;
    }
  }
  return result;
}

}  // namespace wba::synth
