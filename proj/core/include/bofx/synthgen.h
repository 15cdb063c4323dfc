#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bofx/telemetry.h"

namespace bofx {

struct GenConfig {
  std::uint64_t seed = 7;
  std::size_t wells = 20;
  double hours = 8.0;
  // Accidents per type, indexed by AccidentType; at most one per well.
  std::array<std::size_t, kNumAccidentTypes> schedule = {10, 4, 3, 3};
  double noise_scale = 1.0;
  double lead_min_minutes = 20.0;
  double lead_max_minutes = 40.0;
  double region_tail_minutes = 5.0;  // alarm region extends past the event
  // Benign single-channel excursions per well, drawn from the accident pattern families.
  std::size_t excursions = 6;
  double start_time = 1609459200.0;  // 2021-01-01T00:00:00Z

  void validate() const;
};

// Per-channel Gaussian noise sigma at noise_scale 1, in channel units.
std::array<double, kNumChannels> default_noise();

// Injected pattern of one accident.
struct Signature {
  std::string well_id;
  AccidentType type = AccidentType::Stuck;
  double start = 0.0;  // first affected time
  double event = 0.0;
  std::vector<Mnemonic> channels;
};

struct SyntheticData {
  std::vector<TelemetryLog> logs;
  std::vector<AccidentEvent> events;
  std::vector<ReferenceInterval> references;
  std::vector<Signature> signatures;
};

// Channels carrying the injected pre-accident signature of each type.
std::vector<Mnemonic> signature_channels(AccidentType type);

SyntheticData generate(const GenConfig& config);

// Writes <dir>/wells/<id>.csv, <dir>/events.csv and <dir>/references.csv.
void write_dataset(const SyntheticData& data, const std::string& dir);

struct Dataset {
  std::vector<TelemetryLog> logs;
  std::vector<AccidentEvent> events;
  std::vector<ReferenceInterval> references;
};

// Reads a directory written by write_dataset, cleaning each well with `limits`.
Dataset read_dataset(const std::string& dir, const ValidityLimits& limits);

}  // namespace bofx
