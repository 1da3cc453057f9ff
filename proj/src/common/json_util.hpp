/* Copyright 2026 The gridflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Small helpers for reading JSON documents with shape errors that carry the
// offending path.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "gridflow/error.hpp"
#include "json.hpp"

namespace gridflow::detail {

using nlohmann::json;

inline std::string join_path(std::string_view ctx, std::string_view key) {
  std::string out(ctx);
  if (!out.empty()) out += '.';
  out += key;
  return out;
}

[[noreturn]] inline void shape_error(std::string_view ctx, const std::string& what) {
  throw SyntaxError(std::string(ctx.empty() ? "document" : ctx) + ": " + what, 0, 0);
}

inline const json& expect_object(const json& j, std::string_view ctx) {
  if (!j.is_object()) shape_error(ctx, "expected an object");
  return j;
}

inline const json& expect_array(const json& j, std::string_view ctx) {
  if (!j.is_array()) shape_error(ctx, "expected an array");
  return j;
}

inline const json& require(const json& obj, std::string_view key, std::string_view ctx) {
  expect_object(obj, ctx);
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::MissingField, "missing field '" + join_path(ctx, key) + "'");
  }
  return *it;
}

inline const json* optional_field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline std::string as_string(const json& j, std::string_view ctx) {
  if (!j.is_string()) shape_error(ctx, "expected a string");
  return j.get<std::string>();
}

inline double as_number(const json& j, std::string_view ctx) {
  if (!j.is_number()) shape_error(ctx, "expected a number");
  return j.get<double>();
}

inline std::int64_t as_int(const json& j, std::string_view ctx) {
  if (!j.is_number_integer()) shape_error(ctx, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t as_uint(const json& j, std::string_view ctx) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    shape_error(ctx, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

inline bool as_bool(const json& j, std::string_view ctx) {
  if (!j.is_boolean()) shape_error(ctx, "expected a boolean");
  return j.get<bool>();
}

inline std::string get_string(const json& obj, std::string_view key, std::string_view ctx) {
  return as_string(require(obj, key, ctx), join_path(ctx, key));
}

inline double get_number(const json& obj, std::string_view key, std::string_view ctx) {
  return as_number(require(obj, key, ctx), join_path(ctx, key));
}

inline std::int64_t get_int(const json& obj, std::string_view key, std::string_view ctx) {
  return as_int(require(obj, key, ctx), join_path(ctx, key));
}

inline std::uint64_t get_uint(const json& obj, std::string_view key, std::string_view ctx) {
  return as_uint(require(obj, key, ctx), join_path(ctx, key));
}

inline bool get_bool(const json& obj, std::string_view key, std::string_view ctx) {
  return as_bool(require(obj, key, ctx), join_path(ctx, key));
}

// Parses text, turning nlohmann's byte offset into a line/column pair.
inline json parse_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SyntaxError(e.what(), line, column);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gridflow::detail
