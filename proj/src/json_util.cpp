#include "fpmforge/json_util.hpp"

namespace fpmforge::app {

using nlohmann::json;

json parse_json_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    int col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FpmError(ErrorKind::MalformedInput,
                   what + ": syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
}

JsonReader::JsonReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw FpmError(ErrorKind::MalformedInput, path_ + ": expected an object");
}

void JsonReader::allow(std::initializer_list<const char*> keys) const {
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j_.items()) {
    if (!known.count(k)) throw FpmError(ErrorKind::MalformedInput, field(k) + ": unknown key");
  }
}

bool JsonReader::has(const std::string& key) const { return j_.contains(key); }

const json& JsonReader::at(const std::string& key) const {
  if (!j_.contains(key)) throw FpmError(ErrorKind::MalformedInput, field(key) + ": missing");
  return j_.at(key);
}

JsonReader JsonReader::object(const std::string& key) const { return JsonReader(at(key), field(key)); }

}  // namespace fpmforge::app
