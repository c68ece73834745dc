#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace semtree {

inline constexpr const char* kToolName = "semtree";
inline constexpr const char* kToolVersion = "0.1.0";

// Written next to every output artifact (<output>.manifest.json). Outputs
// are a pure function of the recorded config and seed; duration is the only
// field that varies between identical runs.
struct RunManifest {
  std::string command;
  uint64_t seed = 0;
  int workers = 1;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  int64_t duration_ms = 0;
};

std::string manifest_path_for(const std::string& output_path);
void write_manifest(const RunManifest& manifest, const std::string& output_path);

} // namespace semtree
