#include "semtree/manifest.hpp"

#include <fstream>

#include "semtree/errors.hpp"

namespace semtree {

std::string manifest_path_for(const std::string& output_path) {
  return output_path + ".manifest.json";
}

void write_manifest(const RunManifest& manifest, const std::string& output_path) {
  nlohmann::json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["command"] = manifest.command;
  doc["seed"] = manifest.seed;
  doc["workers"] = manifest.workers;
  doc["config"] = manifest.config;
  doc["inputs"] = manifest.inputs;
  doc["outputs"] = manifest.outputs;
  doc["duration_ms"] = manifest.duration_ms;
  std::string path = manifest_path_for(output_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("manifest: cannot write " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("manifest: write failed for " + path);
}

} // namespace semtree
