// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvinr/common.hpp"

namespace tvinr {

/// Bad value at a named field, e.g. "camera.eye: expected 3 numbers".
struct FieldError : ArgumentError {
  FieldError(std::string field, const std::string& msg) : ArgumentError(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Typed, path-aware view of one JSON object.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw FieldError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const nlohmann::json& raw(const std::string& key) const { return j_.at(key); }

  Fields object(const std::string& key) const {
    static const nlohmann::json empty = nlohmann::json::object();
    return has(key) ? Fields(j_.at(key), path(key)) : Fields(empty, path(key));
  }

  void reject_unknown(std::initializer_list<const char*> allowed) const {
    for (const auto& [k, _] : j_.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) throw FieldError(path(k), "unknown field");
    }
  }

  double number(const std::string& key) const {
    if (!has(key)) throw FieldError(path(key), "required");
    const auto& v = j_.at(key);
    if (!v.is_number()) throw FieldError(path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw FieldError(path(key), "must be finite");
    return d;
  }
  double number(const std::string& key, double def) const { return has(key) ? number(key) : def; }

  std::int64_t integer(const std::string& key) const {
    if (!has(key)) throw FieldError(path(key), "required");
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw FieldError(path(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t def) const { return has(key) ? integer(key) : def; }
  std::int64_t integer_in(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi) const {
    const auto v = integer(key, def);
    if (v < lo || v > hi)
      throw FieldError(path(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw FieldError(path(key), "expected true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key) const {
    if (!has(key)) throw FieldError(path(key), "required");
    if (!j_.at(key).is_string()) throw FieldError(path(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) const { return has(key) ? string(key) : def; }

  Vec3d vec3(const std::string& key, const Vec3d& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) throw FieldError(path(key), "expected an array of 3 numbers");
    double c[3];
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw FieldError(path(key), "expected an array of 3 numbers");
      c[i] = v[i].get<double>();
      if (!std::isfinite(c[i])) throw FieldError(path(key), "must be finite");
    }
    return {c[0], c[1], c[2]};
  }

  std::vector<std::int64_t> integers(const std::string& key) const {
    if (!has(key)) return {};
    const auto& v = j_.at(key);
    if (!v.is_array()) throw FieldError(path(key), "expected an array of integers");
    std::vector<std::int64_t> out;
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw FieldError(path(key), "expected an array of integers");
      out.push_back(x.get<std::int64_t>());
    }
    return out;
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
};

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and kept as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ArgumentError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace tvinr
