#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "bofx/pipeline.h"
#include "bofx/synthgen.h"
#include "bofx/telemetry.h"
#include "bofx/tsne.h"
#include "json.hpp"

namespace bofx::cli {

// Everything a command can be configured with. Sections of the config file:
// gen, windows, codebooks, gbm, fcmh, experiment, tsne, limits.
struct Settings {
  GenConfig gen;
  ExperimentConfig experiment;
  TsneConfig tsne;
  std::size_t tsne_max_codebook = 400;
  std::size_t tsne_max_group = 300;
  ValidityLimits limits = ValidityLimits::defaults();
  std::string limits_path;  // empty: built-in limits

  // Canonical JSON of the effective configuration (after overrides).
  nlohmann::ordered_json effective() const;
  std::string hash() const;
  void validate() const;
};

// Missing path: defaults. Unknown sections or keys are config errors.
Settings load_settings(const std::string& path);
Settings settings_from_json(const nlohmann::json& doc, const std::string& origin);

// Applies "section.key=value" (value parsed as JSON, bare words as strings).
void apply_override(Settings& settings, const std::string& assignment);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace bofx::cli
