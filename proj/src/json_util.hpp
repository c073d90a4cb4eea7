// Copyright 2026 The Sparsify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Strict reading of JSON config objects.

#ifndef SPARSIFY_SRC_JSON_UTIL_HPP_
#define SPARSIFY_SRC_JSON_UTIL_HPP_

#include <algorithm>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "sparsify/error.hpp"

namespace sparsify::json_util {

using nlohmann::json;

// Throws ConfigError naming the first key of `j` not in `keys`.
inline json reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
  return j;
}

// Leaves `out` untouched when the key is absent.
template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace sparsify::json_util

#endif  // SPARSIFY_SRC_JSON_UTIL_HPP_
