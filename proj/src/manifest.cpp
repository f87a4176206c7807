#include "mls/manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

namespace mls {

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json doc;
  doc["schema_version"] = m.schema_version;
  doc["command"] = m.command;
  doc["resolved_config"] = m.resolved_config;
  doc["seeds"] = m.seeds;
  if (!m.checkpoint.empty()) doc["checkpoint"] = m.checkpoint;
  doc["outputs"] = m.outputs;
  doc["started_at"] = m.started_at;
  doc["wall_seconds"] = m.wall_seconds;
  doc["threads"] = m.threads;
  return doc;
}

void save_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw std::runtime_error("manifest write failed: " + path);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace mls
