#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "xmusic/error.hpp"

namespace xmusic::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"format", "xmusic.run_manifest"},
          {"version", kManifestVersion},
          {"subcommand", m.subcommand},
          {"config", m.config_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.config_path)},
          {"seed", m.seed},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"timestamp", m.timestamp},
          {"argv", m.argv},
          {"details", m.details}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "xmusic.run_manifest" || j.at("version") != kManifestVersion)
      throw Error(ErrorCode::InvalidFeatures, "not a version 1 run manifest");
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    if (!j.at("config").is_null()) m.config_path = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.details = j.value("details", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidFeatures, std::string("bad run manifest: ") + e.what());
  }
}

std::string manifest_path_for(const RunManifest& m, const std::string& fallback) {
  if (!m.outputs.empty()) return m.outputs.front() + ".manifest.json";
  return fallback;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os << to_json(m).dump(2) << '\n';
}

}  // namespace xmusic::cli
