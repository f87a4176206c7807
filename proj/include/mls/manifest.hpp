#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mls {

// Every output directory gets exactly one manifest describing the run:
// the fully resolved configuration, seeds, inputs, outputs, and timing.
// Re-running the same command with the manifest as the config reproduces
// the primary outputs byte for byte.
struct RunManifest {
  int schema_version = 1;
  std::string command;
  nlohmann::json resolved_config;
  std::vector<std::uint64_t> seeds;
  std::string checkpoint;  // input checkpoint path, empty if none
  std::vector<std::string> outputs;
  std::string started_at;  // ISO 8601 UTC
  double wall_seconds = 0.0;
  int threads = 0;
};

nlohmann::json manifest_to_json(const RunManifest& m);
void save_manifest(const std::string& path, const RunManifest& m);

std::string utc_timestamp();

}  // namespace mls
