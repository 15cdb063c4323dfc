#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "settings.h"

namespace bofx::cli {

// Record of one command invocation: effective config, seeds, inputs and
// outputs with content hashes, artifact format versions and wall time.
class Manifest {
 public:
  Manifest(std::string command, const Settings& settings);

  void seed(const std::string& name, std::uint64_t value);
  void input(const std::string& path);
  void output(const std::string& path);
  void write(const std::string& path) const;

 private:
  std::string command_;
  nlohmann::ordered_json config_;
  std::string config_hash_;
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace bofx::cli
