#pragma once

// Strict JSON object reader: records a message for every missing, mistyped or
// unknown key instead of stopping at the first one.

#include "fluidctl/common.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fluidctl::io::detail {

using json = nlohmann::json;

class Reader {
 public:
  Reader(const json& node, std::string path, std::vector<std::string>& issues)
      : node_(node), path_(std::move(path)), issues_(issues) {
    if (!node_.is_object()) {
      issue("", "must be an object");
      ok_ = false;
    }
  }

  ~Reader() { finish(); }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool ok() const { return ok_; }
  std::vector<std::string>& issues() { return issues_; }
  bool has(const std::string& key) const { return ok_ && node_.contains(key); }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void issue(const std::string& key, const std::string& message) {
    const std::string p = key.empty() ? (path_.empty() ? "<root>" : path_) : child(key);
    issues_.push_back(p + ": " + message);
  }

  const json* raw(const std::string& key, bool required) {
    seen_.insert(key);
    if (!ok_) return nullptr;
    auto it = node_.find(key);
    if (it == node_.end()) {
      if (required) issue(key, "missing required key");
      return nullptr;
    }
    return &*it;
  }

  template <class T>
  bool get(const std::string& key, T& out, bool required = false) {
    const json* v = raw(key, required);
    if (!v) return false;
    return convert(*v, key, out);
  }

  template <class T>
  bool get(const std::string& key, std::optional<T>& out, bool required = false) {
    const json* v = raw(key, required);
    if (!v) return false;
    T value{};
    if (!convert(*v, key, value)) return false;
    out = value;
    return true;
  }

  bool get_vec(const std::string& key, Vec3& out, int dim, bool required = false) {
    const json* v = raw(key, required);
    if (!v) return false;
    // dim <= 0 accepts either 2 or 3 components.
    const bool size_ok = v->is_array() && (dim > 0 ? static_cast<int>(v->size()) == dim
                                                   : v->size() == 2 || v->size() == 3);
    if (!size_ok) {
      issue(key, dim > 0 ? "must be an array of " + std::to_string(dim) + " numbers"
                         : std::string("must be an array of 2 or 3 numbers"));
      return false;
    }
    Vec3 p = Vec3::Zero();
    for (int a = 0; a < static_cast<int>(v->size()); ++a) {
      if (!(*v)[a].is_number()) {
        issue(key, "must be an array of numbers");
        return false;
      }
      p[a] = (*v)[a].get<double>();
    }
    out = p;
    return true;
  }

  void finish() {
    if (!ok_ || finished_) return;
    finished_ = true;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) issue(it.key(), "unknown key");
    }
  }

 private:
  template <class T>
  bool convert(const json& v, const std::string& key, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(key, "must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(key, "must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0) {
          out = v.get<T>();
        } else {
          return fail(key, "must be >= 0");
        }
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(key, "must be a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(key, "must be a string");
      out = v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported type");
    }
    return true;
  }

  bool fail(const std::string& key, const std::string& message) {
    issue(key, message);
    return false;
  }

  const json& node_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
  bool ok_ = true;
  bool finished_ = false;
};

inline json vec_json(const Vec3& v, int dim) {
  json out = json::array();
  for (int a = 0; a < dim; ++a) out.push_back(v[a]);
  return out;
}

}  // namespace fluidctl::io::detail
