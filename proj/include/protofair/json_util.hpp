#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "protofair/common.hpp"

namespace protofair {

// Rejects keys outside the allowed set; config typos should fail loudly.
inline void check_known_keys(const nlohmann::json& j, const std::string& context,
                             std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(context + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace protofair
