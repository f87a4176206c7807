#include "mls/checkpoint.hpp"

#include <cstddef>
#include <fstream>
#include <stdexcept>

namespace mls {

nlohmann::json checkpoint_to_json(const Checkpoint& cp) {
  nlohmann::json doc;
  doc["schema_version"] = cp.schema_version;
  doc["n"] = cp.units;
  doc["r"] = cp.rays;
  doc["l"] = cp.layers;
  doc["h"] = cp.hidden;
  doc["generation"] = cp.generation;
  doc["genome_length"] = cp.genome.size();
  doc["genome"] = cp.genome;
  if (cp.best_f) doc["best_f"] = *cp.best_f;
  if (cp.cma_state) doc["cma_state"] = *cp.cma_state;
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  Checkpoint cp;
  cp.schema_version = doc.at("schema_version").get<int>();
  if (cp.schema_version != 1) {
    throw std::runtime_error("unsupported checkpoint schema version " +
                             std::to_string(cp.schema_version));
  }
  cp.units = doc.at("n").get<int>();
  cp.rays = doc.at("r").get<int>();
  cp.layers = doc.at("l").get<int>();
  cp.hidden = doc.at("h").get<int>();
  cp.generation = doc.value("generation", 0);
  cp.genome = doc.at("genome").get<std::vector<double>>();
  const auto declared = doc.at("genome_length").get<std::size_t>();
  if (declared != cp.genome.size()) {
    throw std::runtime_error("checkpoint genome_length disagrees with the array");
  }
  if (doc.contains("best_f")) cp.best_f = doc["best_f"].get<double>();
  if (doc.contains("cma_state")) cp.cma_state = doc["cma_state"];
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(cp).dump() << '\n';
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace mls
