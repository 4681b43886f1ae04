#include "spend/config.hpp"

#include <algorithm>
#include <fstream>

#include "spend/cube.hpp"

namespace spend::config {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view context) {
  if (!j.is_object()) throw Error(std::string(context) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(std::string(context) + ": unknown field '" + key + "'");
    }
  }
}

void check_version(const json& j, int expected, std::string_view context) {
  if (!j.contains("version")) throw Error(std::string(context) + ": missing 'version'");
  const int v = j.at("version").get<int>();
  if (v != expected) {
    throw Error(std::string(context) + ": unsupported version " + std::to_string(v) +
                " (expected " + std::to_string(expected) + ")");
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("I/O failure writing " + path.string());
}

}  // namespace spend::config
