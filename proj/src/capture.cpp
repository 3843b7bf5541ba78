#include "wba/capture.hpp"

#include <algorithm>
#include <set>

#include "wba/error.hpp"
#include "wba/serialize.hpp"

namespace wba {

using nlohmann::json;

void to_json(json& j, const FeedbackSnapshot::Entry& v) {
  j = json{{"observation_id", v.observation_id}, {"item_id", v.item_id}, {"indicator", v.indicator}};
  if (v.comment) j["comment"] = *v.comment;
}

void from_json(const json& j, FeedbackSnapshot::Entry& v) {
  v.observation_id = required<std::string>(j, "observation_id");
  v.item_id = required<std::string>(j, "item_id");
  v.indicator = required<Indicator>(j, "indicator");
  if (auto it = j.find("comment"); it != j.end() && !it->is_null())
    v.comment = parse_guard([&] { return it->get<std::string>(); });
  else
    v.comment.reset();
}

void to_json(json& j, const FeedbackSnapshot& v) {
  j = json{{"student_id", v.student_id},
           {"signed_out_at", format_instant(v.signed_out_at)},
           {"entries", v.entries}};
  if (v.text) j["text"] = *v.text;
}

void from_json(const json& j, FeedbackSnapshot& v) {
  v.student_id = required<std::string>(j, "student_id");
  v.signed_out_at = parse_instant(required<std::string>(j, "signed_out_at"));
  v.entries = required<std::vector<FeedbackSnapshot::Entry>>(j, "entries");
  if (auto it = j.find("text"); it != j.end() && !it->is_null())
    v.text = parse_guard([&] { return it->get<std::string>(); });
  else
    v.text.reset();
}

void to_json(json& j, const CaptureBatch& v) {
  j = json{{"batch_id", v.batch_id},
           {"client_id", v.client_id},
           {"session", v.session},
           {"observations", v.observations},
           {"feedback", v.feedback}};
}

void from_json(const json& j, CaptureBatch& v) {
  v.batch_id = required<std::string>(j, "batch_id");
  v.client_id = required<std::string>(j, "client_id");
  v.session = required<Session>(j, "session");
  v.observations = required<std::vector<Observation>>(j, "observations");
  v.feedback = j.contains("feedback") ? required<std::vector<FeedbackSnapshot>>(j, "feedback")
                                      : std::vector<FeedbackSnapshot>{};
}

CaptureBatch parse_batch(const json& document) {
  try {
    auto batch = document.get<CaptureBatch>();
    require_valid_id(batch.batch_id, "batch");
    return batch;
  } catch (const Error& e) {
    if (e.code() == Errc::scale_violation) throw;
    throw Error(Errc::malformed_batch, e.what());
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_batch, e.what());
  }
}

std::uint64_t content_hash(const CaptureBatch& batch) {
  return fnv1a64(json(batch).dump());
}

// --- CaptureSession -------------------------------------------------------

CaptureSession CaptureSession::open(RegistryPtr registry, Id session_id, const Id& location_id,
                                    const Id& staff_id, const std::vector<Id>& student_ids,
                                    Instant now) {
  require_valid_id(session_id, "session");
  if (!registry->location(location_id))
    throw Error(Errc::unknown_location, "unknown location '" + location_id + "'");
  if (student_ids.empty()) throw Error(Errc::empty_student_set, "a session needs at least one student");
  if (!registry->staff_member(staff_id))
    throw Error(Errc::unknown_reference, "unknown staff member '" + staff_id + "'");

  Session s;
  s.id = std::move(session_id);
  s.location_id = location_id;
  s.staff_id = staff_id;  // may be a colleague covering; attribution follows sign-in
  s.opened_at = now;
  std::set<std::string_view> seen;
  for (const auto& student : student_ids) {
    if (!registry->student(student))
      throw Error(Errc::unknown_reference, "unknown student '" + student + "'");
    if (!seen.insert(student).second)
      throw Error(Errc::duplicate_id, "student '" + student + "' listed twice");
    s.students.push_back({student, StudentState::open, std::nullopt});
  }
  return CaptureSession(std::move(registry), std::move(s));
}

const std::vector<Id>& CaptureSession::offered_procedures() const {
  return registry_->location(session_.location_id)->available_procedures;
}

const std::vector<Id>& CaptureSession::workflow(std::string_view procedure_id) const {
  const auto& offered = offered_procedures();
  if (!std::binary_search(offered.begin(), offered.end(), procedure_id, std::less<>{})) {
    throw Error(Errc::item_not_in_location_workflows,
                "procedure '" + std::string(procedure_id) + "' is not offered at location '" +
                    session_.location_id + "'");
  }
  return registry_->procedure(procedure_id)->workflow;
}

void CaptureSession::require_active() const {
  if (session_.state == SessionState::committed)
    throw Error(Errc::already_committed, "session " + session_.id + " is committed");
}

void CaptureSession::record(const Observation& obs) {
  require_active();
  const Attendance* att = session_.attendance(obs.student_id);
  if (!att) {
    throw Error(Errc::not_in_attendance,
                "student '" + obs.student_id + "' is not attending session " + session_.id);
  }
  if (att->state == StudentState::signed_out) {
    throw Error(Errc::locked_record, "record of student '" + obs.student_id + "' in session " +
                                         session_.id + " is locked");
  }
  const auto& flow = workflow(obs.procedure_id);
  if (std::find(flow.begin(), flow.end(), obs.item_id) == flow.end()) {
    throw Error(Errc::item_not_in_location_workflows,
                "item '" + obs.item_id + "' is not in the workflow of '" + obs.procedure_id + "'");
  }
  validate_observation(obs, *registry_, session_);
  for (const auto& existing : observations_)
    if (existing.id == obs.id) throw Error(Errc::duplicate_id, "observation id '" + obs.id + "' reused");
  observations_.push_back(obs);
}

const FeedbackSnapshot& CaptureSession::sign_out_student(std::string_view student_id, Instant now,
                                                         std::optional<std::string> text) {
  require_active();
  Attendance* att = session_.attendance(student_id);
  if (!att) {
    throw Error(Errc::not_in_attendance,
                "student '" + std::string(student_id) + "' is not attending session " + session_.id);
  }
  if (att->state == StudentState::signed_out) {
    throw Error(Errc::already_signed_out, "student '" + std::string(student_id) + "' already signed out");
  }
  if (now < session_.opened_at) {
    throw Error(Errc::timestamp_out_of_session, "sign-out precedes session open");
  }
  for (const auto& o : observations_) {
    if (o.student_id == student_id && o.timestamp > now)
      throw Error(Errc::timestamp_out_of_session, "observation " + o.id + " is later than sign-out");
  }
  att->state = StudentState::signed_out;
  att->signed_out_at = now;

  FeedbackSnapshot snap{att->student_id, now, {}, std::move(text)};
  for (const auto& o : observations_)
    if (o.student_id == student_id) snap.entries.push_back({o.id, o.item_id, o.indicator, o.comment});
  return feedback_.emplace(att->student_id, std::move(snap)).first->second;
}

CaptureBatch CaptureSession::sign_out_staff(Instant now, const Id& client_id) {
  require_active();
  for (const auto& a : session_.students) {
    if (a.state != StudentState::signed_out)
      throw Error(Errc::students_still_open, "student '" + a.student_id + "' has not signed out");
    if (*a.signed_out_at > now)
      throw Error(Errc::timestamp_out_of_session, "staff sign-out precedes a student sign-out");
  }
  session_.state = SessionState::committed;
  session_.closed_at = now;

  CaptureBatch batch;
  batch.batch_id = client_id + "/" + session_.id;
  batch.client_id = client_id;
  batch.session = session_;
  batch.observations = observations_;
  for (const auto& a : session_.students) batch.feedback.push_back(feedback_.at(a.student_id));
  return batch;
}

const FeedbackSnapshot* CaptureSession::feedback(std::string_view student_id) const {
  auto it = feedback_.find(student_id);
  return it == feedback_.end() ? nullptr : &it->second;
}

Id CaptureSession::next_observation_id() const {
  return session_.id + "/" + std::to_string(observations_.size() + 1);
}

// --- Store ----------------------------------------------------------------

std::string_view to_string(ApplyResult::Status s) noexcept {
  return s == ApplyResult::Status::applied ? "applied" : "duplicate";
}

namespace {

void check_well_formed(const CaptureBatch& b) {
  auto malformed = [&](const std::string& why) {
    return Error(Errc::malformed_batch, "batch " + b.batch_id + ": " + why);
  };
  if (!is_valid_id(b.batch_id)) throw Error(Errc::malformed_batch, "batch id must be 1-64 bytes");
  if (!is_valid_id(b.client_id)) throw malformed("client id must be 1-64 bytes");
  const Session& s = b.session;
  if (s.state != SessionState::committed || !s.closed_at) throw malformed("session is not committed");
  if (s.students.empty()) throw malformed("session has no students");
  std::set<std::string_view> students;
  for (const auto& a : s.students) {
    if (!students.insert(a.student_id).second) throw malformed("student listed twice");
    if (a.state != StudentState::signed_out || !a.signed_out_at)
      throw malformed("student '" + a.student_id + "' not signed out");
    if (*a.signed_out_at < s.opened_at || *a.signed_out_at > *s.closed_at)
      throw malformed("student '" + a.student_id + "' sign-out outside the session");
  }
  std::set<std::string_view> ids;
  for (const auto& o : b.observations) {
    if (o.session_id != s.id) throw malformed("observation " + o.id + " belongs to another session");
    if (!ids.insert(o.id).second) throw malformed("observation id '" + o.id + "' repeated");
  }
  std::set<std::string_view> fed;
  for (const auto& f : b.feedback) {
    if (!students.contains(f.student_id)) throw malformed("feedback for unknown student '" + f.student_id + "'");
    if (!fed.insert(f.student_id).second) throw malformed("feedback repeated for '" + f.student_id + "'");
  }
}

}  // namespace

ApplyResult Store::apply(const CaptureBatch& batch, const Registry& registry, Instant received_at) {
  check_well_formed(batch);
  std::uint64_t hash = content_hash(batch);

  if (auto it = batches_.find(batch.batch_id); it != batches_.end()) {
    if (it->second.content_hash != hash) {
      throw Error(Errc::batch_conflict,
                  "batch " + batch.batch_id + " was already applied with different content");
    }
    return {ApplyResult::Status::duplicate, batch.batch_id, batch.observations.size()};
  }
  if (session_to_batch_.contains(batch.session.id)) {
    throw Error(Errc::session_conflict, "session " + batch.session.id + " already stored by batch " +
                                            session_to_batch_.find(batch.session.id)->second);
  }
  if (!registry.location(batch.session.location_id))
    throw Error(Errc::unknown_reference, "unknown location '" + batch.session.location_id + "'");
  if (!registry.staff_member(batch.session.staff_id))
    throw Error(Errc::unknown_reference, "unknown staff '" + batch.session.staff_id + "'");
  for (const auto& a : batch.session.students)
    if (!registry.student(a.student_id))
      throw Error(Errc::unknown_reference, "unknown student '" + a.student_id + "'");
  for (const auto& o : batch.observations) {
    validate_observation(o, registry, batch.session);
    if (observation_ids_.contains(o.id))
      throw Error(Errc::duplicate_id, "observation id '" + o.id + "' already stored");
  }

  insert({batch, hash, received_at});
  return {ApplyResult::Status::applied, batch.batch_id, batch.observations.size()};
}

void Store::insert(StoredBatch stored) {
  const Id id = stored.batch.batch_id;
  session_to_batch_.emplace(stored.batch.session.id, id);
  for (const auto& o : stored.batch.observations) observation_ids_.emplace(o.id, id);
  batches_.emplace(id, std::move(stored));
}

void Store::revalidate(const Registry& registry) const {
  for (const auto& [id, stored] : batches_)
    for (const auto& o : stored.batch.observations) validate_observation(o, registry, stored.batch.session);
}

std::uint64_t Store::state_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [id, stored] : batches_) {
    h ^= stored.content_hash;
    h *= 0x100000001b3ULL;
    h ^= fnv1a64(id);
    h *= 0x100000001b3ULL;
  }
  return h;
}

const Session* Store::session(std::string_view id) const {
  auto it = session_to_batch_.find(id);
  if (it == session_to_batch_.end()) return nullptr;
  return &batches_.find(it->second)->second.batch.session;
}

const Store::StoredBatch* Store::batch(std::string_view id) const {
  auto it = batches_.find(id);
  return it == batches_.end() ? nullptr : &it->second;
}

const Store::StoredBatch* Store::batch_for_session(std::string_view session_id) const {
  auto it = session_to_batch_.find(session_id);
  return it == session_to_batch_.end() ? nullptr : batch(it->second);
}

std::vector<Id> Store::session_ids() const {
  std::vector<Id> ids;
  ids.reserve(session_to_batch_.size());
  for (const auto& [sid, bid] : session_to_batch_) ids.push_back(sid);
  return ids;
}

std::vector<Id> Store::batches_containing(std::string_view observation_id) const {
  std::vector<Id> out;
  for (const auto& [id, stored] : batches_)
    for (const auto& o : stored.batch.observations)
      if (o.id == observation_id) out.push_back(id);
  return out;
}

ObservationLog Store::log() const {
  std::vector<Session> sessions;
  std::vector<Observation> observations;
  sessions.reserve(batches_.size());
  observations.reserve(observation_ids_.size());
  for (const auto& [id, stored] : batches_) {
    sessions.push_back(stored.batch.session);
    observations.insert(observations.end(), stored.batch.observations.begin(),
                        stored.batch.observations.end());
  }
  return ObservationLog(std::move(sessions), std::move(observations));
}

json Store::to_json() const {
  json out = json::array();
  for (const auto& [id, stored] : batches_)
    out.push_back({{"batch", stored.batch}, {"received_at", format_instant(stored.received_at)}});
  return out;
}

Store Store::from_json(const json& j) {
  Store s;
  for (const auto& e : j) {
    auto batch = parse_batch(e.at("batch"));
    auto hash = content_hash(batch);
    s.insert({std::move(batch), hash, parse_instant(e.at("received_at").get<std::string>())});
  }
  return s;
}

bool Store::operator==(const Store& other) const {
  if (batches_.size() != other.batches_.size()) return false;
  for (auto a = batches_.begin(), b = other.batches_.begin(); a != batches_.end(); ++a, ++b) {
    if (a->first != b->first || !(a->second.batch == b->second.batch)) return false;
  }
  return true;
}

}  // namespace wba
