#include "catmc/cli/manifest.hpp"

#include <fstream>

#include "catmc/error.hpp"

#ifndef CATMC_VERSION_STRING
#define CATMC_VERSION_STRING "0.1.0"
#endif

namespace catmc::cli {

std::string artifact_version() { return CATMC_VERSION_STRING; }

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json doc;
  doc["command"] = m.command;
  doc["version"] = artifact_version();
  doc["seed"] = m.seed;
  doc["config"] = m.config;
  doc["inputs"] = m.inputs;
  doc["outputs"] = m.outputs;
  doc["duration_seconds"] = m.duration_seconds;
  return doc;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw Error("failed writing " + path);
}

}  // namespace catmc::cli
