#pragma once

#include <string>

#include "wba/error.hpp"

namespace wba {

template <class T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.is_object()) throw Error(Errc::parse_error, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw Error(Errc::parse_error, std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("field '") + key + "': " + e.what());
  }
}

template <class Fn>
decltype(auto) parse_guard(Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

}  // namespace wba
