#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mls {

// Single-document JSON checkpoint: dimensions, the flat genome, and
// optionally the optimizer state and best evaluated fitness. Doubles are
// written with shortest-roundtrip formatting, so values survive exactly.
struct Checkpoint {
  int schema_version = 1;
  int units = 0;   // n
  int rays = 0;    // r
  int layers = 0;  // l
  int hidden = 0;  // h
  int generation = 0;
  std::vector<double> genome;
  std::optional<double> best_f;
  std::optional<nlohmann::json> cma_state;
};

nlohmann::json checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mls
