#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

namespace spend::config {

/// Throws if `j` is not an object or carries a key outside `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                std::string_view context);

/// Throws unless j["version"] == expected.
void check_version(const nlohmann::json& j, int expected, std::string_view context);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace spend::config
