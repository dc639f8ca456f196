/* Copyright 2026 The uqdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef UQDET_SRC_JSON_UTIL_H_
#define UQDET_SRC_JSON_UTIL_H_

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "uqdet/error.h"
#include "uqdet/geometry.h"

namespace uqdet::internal {

using Json = nlohmann::json;

inline const Json& Field(const Json& obj, const char* key) {
  if (!obj.is_object()) ThrowValidation("expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) ThrowValidation(std::string("missing key \"") + key + "\"");
  return *it;
}

inline double ToFiniteDouble(const Json& v, const char* what) {
  if (!v.is_number()) ThrowValidation(std::string(what) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) ThrowValidation(std::string(what) + ": not finite");
  return d;
}

inline std::vector<double> ToDoubles(const Json& v, const char* what,
                                     size_t expected_size = 0) {
  if (!v.is_array()) ThrowValidation(std::string(what) + ": expected an array");
  if (expected_size != 0 && v.size() != expected_size) {
    ThrowValidation(std::string(what) + ": expected " +
                    std::to_string(expected_size) + " values, got " +
                    std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const Json& e : v) out.push_back(ToFiniteDouble(e, what));
  return out;
}

inline BoxVector ToBoxVector(const Json& v, const char* what) {
  const std::vector<double> d = ToDoubles(v, what, kBoxDims);
  BoxVector out{};
  for (int i = 0; i < kBoxDims; ++i) out[i] = d[i];
  return out;
}

inline int ToInt(const Json& v, const char* what) {
  if (!v.is_number_integer()) {
    ThrowValidation(std::string(what) + ": expected an integer");
  }
  return v.get<int>();
}

inline std::string ToString(const Json& v, const char* what) {
  if (!v.is_string()) ThrowValidation(std::string(what) + ": expected a string");
  return v.get<std::string>();
}

template <typename Container>
Json ToJsonArray(const Container& values) {
  Json arr = Json::array();
  for (double d : values) arr.push_back(d);
  return arr;
}

}  // namespace uqdet::internal

#endif  // UQDET_SRC_JSON_UTIL_H_
