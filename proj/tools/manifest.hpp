#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace xmusic::cli {

inline constexpr int kManifestVersion = 1;

struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string timestamp;  // UTC, ISO 8601
  std::vector<std::string> argv;
  nlohmann::json details = nlohmann::json::object();
};

std::string utc_timestamp();
nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// `<output>.manifest.json` next to the first output, or `fallback` when
/// the run has no output file.
std::string manifest_path_for(const RunManifest& m, const std::string& fallback);
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace xmusic::cli
