#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wba/domain.hpp"
#include "wba/observation_log.hpp"
#include "wba/registry.hpp"

namespace wba {

/// What a student saw on the device before signing out. Immutable once
/// taken.
struct FeedbackSnapshot {
  struct Entry {
    Id observation_id;
    Id item_id;
    Indicator indicator{Indicator::kMin};
    std::optional<std::string> comment;

    bool operator==(const Entry&) const = default;
  };

  Id student_id;
  Instant signed_out_at{};
  std::vector<Entry> entries;  // recording order
  std::optional<std::string> text;

  bool operator==(const FeedbackSnapshot&) const = default;
};

/// Self-contained upload unit: one committed session with everything
/// recorded in it. batch_id is the idempotency key.
struct CaptureBatch {
  Id batch_id;
  Id client_id;
  Session session;
  std::vector<Observation> observations;
  std::vector<FeedbackSnapshot> feedback;

  bool operator==(const CaptureBatch&) const = default;
};

void to_json(nlohmann::json& j, const FeedbackSnapshot& v);
void from_json(const nlohmann::json& j, FeedbackSnapshot& v);
void to_json(nlohmann::json& j, const CaptureBatch& v);
void from_json(const nlohmann::json& j, CaptureBatch& v);

/// Parses a batch document, mapping any structural problem to
/// Errc::malformed_batch.
CaptureBatch parse_batch(const nlohmann::json& document);

/// Client-side state machine for one observed clinical session:
///
///   open -> record* -> sign_out_student (each) -> sign_out_staff
///
/// A signed-out student's record is locked; a committed session accepts no
/// further operations.
class CaptureSession {
 public:
  /// Errors: unknown_location, empty_student_set, unknown_reference
  /// (staff or student), duplicate_id (student listed twice).
  static CaptureSession open(RegistryPtr registry, Id session_id, const Id& location_id,
                             const Id& staff_id, const std::vector<Id>& student_ids,
                             Instant now);

  const Session& session() const { return session_; }
  const std::vector<Observation>& observations() const { return observations_; }

  /// Procedures whose workflows this session offers, i.e. the location's.
  const std::vector<Id>& offered_procedures() const;

  /// Items in the procedure's workflow order; throws
  /// item_not_in_location_workflows when the procedure is not offered.
  const std::vector<Id>& workflow(std::string_view procedure_id) const;

  /// Any subset of items, in any order. Errors: already_committed,
  /// not_in_attendance, locked_record, item_not_in_location_workflows,
  /// duplicate_id, plus validate_observation's.
  void record(const Observation& obs);

  /// Freezes the student's feedback. Errors: already_committed,
  /// not_in_attendance, already_signed_out.
  const FeedbackSnapshot& sign_out_student(std::string_view student_id, Instant now,
                                           std::optional<std::string> text = std::nullopt);

  /// Commits the session and emits its upload batch. Errors:
  /// already_committed, students_still_open.
  CaptureBatch sign_out_staff(Instant now, const Id& client_id);

  const FeedbackSnapshot* feedback(std::string_view student_id) const;

  /// Convenience: observation id of the form "<session>/<n>".
  Id next_observation_id() const;

 private:
  CaptureSession(RegistryPtr registry, Session session)
      : registry_(std::move(registry)), session_(std::move(session)) {}

  void require_active() const;

  RegistryPtr registry_;
  Session session_;
  std::vector<Observation> observations_;
  std::map<Id, FeedbackSnapshot, std::less<>> feedback_;
};

struct ApplyResult {
  enum class Status { applied, duplicate };
  Status status = Status::applied;
  Id batch_id;
  std::size_t observations = 0;
};

std::string_view to_string(ApplyResult::Status s) noexcept;

/// Server-side store of committed batches. Applying a batch is atomic: it is
/// fully validated before anything is written. Re-applying an identical
/// batch_id is a no-op, so delivery may repeat and arrive in any order.
class Store {
 public:
  struct StoredBatch {
    CaptureBatch batch;
    std::uint64_t content_hash = 0;
    Instant received_at{};  // server clock; excluded from state_hash()
  };

  /// Errors: malformed_batch, batch_conflict (same batch_id, different
  /// content), session_conflict, duplicate_id (observation id already
  /// stored), plus validate_observation's.
  ApplyResult apply(const CaptureBatch& batch, const Registry& registry, Instant received_at);

  /// Re-checks every stored observation against a new registry.
  void revalidate(const Registry& registry) const;

  /// Hash of the canonical content (batches ordered by id, receipt times
  /// excluded). Equal stores have equal hashes regardless of apply order.
  std::uint64_t state_hash() const;

  const Session* session(std::string_view id) const;
  const StoredBatch* batch(std::string_view id) const;
  const StoredBatch* batch_for_session(std::string_view session_id) const;
  std::vector<Id> session_ids() const;
  std::size_t batch_count() const { return batches_.size(); }
  std::size_t observation_count() const { return observation_ids_.size(); }

  /// Batch ids whose session holds this observation id; exactly one for a
  /// stored observation.
  std::vector<Id> batches_containing(std::string_view observation_id) const;

  ObservationLog log() const;

  nlohmann::json to_json() const;
  static Store from_json(const nlohmann::json& j);

  bool operator==(const Store& other) const;

 private:
  void insert(StoredBatch stored);

  std::map<Id, StoredBatch, std::less<>> batches_;
  std::map<Id, Id, std::less<>> session_to_batch_;
  std::map<Id, Id, std::less<>> observation_ids_;  // observation -> batch
};

/// Canonical content hash of a batch (FNV-1a over its JSON form).
std::uint64_t content_hash(const CaptureBatch& batch);

}  // namespace wba
