#include "wba/observation_log.hpp"

#include <algorithm>

#include "wba/error.hpp"

namespace wba {

ObservationLog::ObservationLog(std::vector<Session> sessions, std::vector<Observation> observations)
    : sessions_(std::move(sessions)), observations_(std::move(observations)) {
  session_index_.reserve(sessions_.size());
  for (std::size_t i = 0; i < sessions_.size(); ++i) session_index_.emplace(sessions_[i].id, i);

  for (std::size_t i = 0; i < observations_.size(); ++i)
    students_[observations_[i].student_id].observations.push_back(i);

  // Sessions are attributed through attendance so that a student who was
  // present but not observed still has the session listed (with no
  // observations); such sessions are never applicable.
  for (std::size_t s = 0; s < sessions_.size(); ++s)
    for (const auto& a : sessions_[s].students) students_[a.student_id].sessions.push_back({s, {}});

  for (auto& [student, index] : students_) {
    auto& obs = index.observations;
    std::sort(obs.begin(), obs.end(), [&](std::size_t a, std::size_t b) {
      return chronological(observations_[a], observations_[b]);
    });

    auto& sess = index.sessions;
    std::sort(sess.begin(), sess.end(), [&](const StudentSession& a, const StudentSession& b) {
      const Session& x = sessions_[a.session];
      const Session& y = sessions_[b.session];
      if (x.opened_at != y.opened_at) return x.opened_at < y.opened_at;
      return x.id < y.id;
    });
    std::unordered_map<std::string_view, std::size_t> position;
    position.reserve(sess.size());
    for (std::size_t k = 0; k < sess.size(); ++k) position.emplace(sessions_[sess[k].session].id, k);
    for (std::size_t o : obs) {
      auto it = position.find(observations_[o].session_id);
      if (it == position.end()) {
        const auto& bad = observations_[o];
        Errc code = session_index_.contains(bad.session_id) ? Errc::not_in_attendance
                                                            : Errc::unknown_reference;
        throw Error(code, "observation " + bad.id + " has no session '" + bad.session_id +
                              "' attended by student '" + bad.student_id + "'");
      }
      sess[it->second].observations.push_back(o);
    }
  }
}

const Session* ObservationLog::session(std::string_view id) const {
  auto it = session_index_.find(std::string(id));
  return it == session_index_.end() ? nullptr : &sessions_[it->second];
}

std::span<const std::size_t> ObservationLog::student_observations(std::string_view student) const {
  auto it = students_.find(std::string(student));
  if (it == students_.end()) return {};
  return it->second.observations;
}

std::span<const ObservationLog::StudentSession> ObservationLog::student_sessions(
    std::string_view student) const {
  auto it = students_.find(std::string(student));
  if (it == students_.end()) return {};
  return it->second.sessions;
}

}  // namespace wba
