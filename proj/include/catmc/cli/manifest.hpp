#pragma once

#include <chrono>
#include <cstdint>
#include <json.hpp>
#include <string>

namespace catmc::cli {

// One per command run. Everything but duration_seconds is a deterministic
// function of the command line.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  double duration_seconds = 0.0;
};

// Version string baked in at configure time.
std::string artifact_version();

nlohmann::ordered_json to_json(const RunManifest& manifest);
void write_manifest(const std::string& path, const RunManifest& manifest);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace catmc::cli
