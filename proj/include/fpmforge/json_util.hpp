#pragma once

#include <initializer_list>
#include <set>
#include <string>

#include <json.hpp>

#include "fpmforge/core.hpp"

namespace fpmforge::app {

/// Parses `text`; syntax errors become MalformedInput with line and column.
nlohmann::json parse_json_document(const std::string& text, const std::string& what);

/// Typed field access that reports the offending field path.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string path);

  /// Rejects keys outside `keys`.
  void allow(std::initializer_list<const char*> keys) const;

  bool has(const std::string& key) const;
  const nlohmann::json& at(const std::string& key) const;
  JsonReader object(const std::string& key) const;
  std::string field(const std::string& key) const { return path_ + "." + key; }

  template <typename T>
  T get(const std::string& key) const {
    const nlohmann::json& v = at(key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw FpmError(ErrorKind::MalformedInput, field(key) + ": wrong type (" + v.type_name() + ")");
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    if (!has(key) || j_.at(key).is_null()) return fallback;
    return get<T>(key);
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

}  // namespace fpmforge::app
