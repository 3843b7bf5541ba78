#pragma once

// JSON mappings for the wire formats. Field names here are part of the
// external schema (batch documents, service payloads, event log).

#include <nlohmann/json.hpp>

#include "wba/domain.hpp"

namespace wba {

void to_json(nlohmann::json& j, const Observation& v);
void from_json(const nlohmann::json& j, Observation& v);

void to_json(nlohmann::json& j, const Attendance& v);
void from_json(const nlohmann::json& j, Attendance& v);

void to_json(nlohmann::json& j, const Session& v);
void from_json(const nlohmann::json& j, Session& v);

void to_json(nlohmann::json& j, const PatientSlot& v);
void from_json(const nlohmann::json& j, PatientSlot& v);

/// Reads a required field, converting any type error into Errc::parse_error.
template <class T>
T required(const nlohmann::json& j, const char* key);

/// Runs `fn`, rethrowing nlohmann exceptions as Errc::parse_error.
template <class Fn>
decltype(auto) parse_guard(Fn&& fn);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace wba

// Indicator has no default state, so it needs a value-returning serializer.
template <>
struct nlohmann::adl_serializer<wba::Indicator> {
  static void to_json(json& j, const wba::Indicator& v) { j = v.value(); }
  static wba::Indicator from_json(const json& j);
};

#include "wba/serialize_impl.hpp"
