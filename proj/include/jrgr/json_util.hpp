#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "jrgr/errors.hpp"

namespace jrgr::json_util {

// Rejects keys outside `allowed` so typos never pass silently.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view context) {
  if (!j.is_object()) {
    throw ValidationError(std::string(context) + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) {
      known = known || key == a;
    }
    if (!known) {
      throw ValidationError(std::string(context) + ": unknown key '" + key + "'");
    }
  }
}

// Reads j[key] into out when present; type errors become ValidationError.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, std::string_view context) {
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(context) + "." + key + ": " + e.what());
  }
}

}  // namespace jrgr::json_util
