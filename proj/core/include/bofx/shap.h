#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bofx/bag_of_features.h"
#include "bofx/gbm.h"
#include "bofx/telemetry.h"

namespace bofx {

// Shapley attribution on the log-odds scale: base_value + sum(phi) = logit.
struct Attribution {
  double base_value = 0.0;
  std::vector<double> phi;

  double total() const;
};

// Exact path-dependent tree Shapley values using training covers.
Attribution tree_shap(const GbmModel& model, std::span<const float> x);

// Reference implementation by subset enumeration. Features outside the scope
// are treated as never known (marginalized by cover at every split).
// Throws kCapacity for more than 20 features in scope.
Attribution brute_force_shapley(const GbmModel& model, std::span<const float> x,
                                std::span<const std::size_t> features_in_scope);
inline constexpr std::size_t kMaxBruteForceFeatures = 20;

enum class ImportanceMode { kPositive, kAbsolute };

struct ExplainConfig {
  double m_percent = 20.0;
  ImportanceMode mode = ImportanceMode::kPositive;

  void validate() const;
};

std::vector<double> importance(const Attribution& attribution, ImportanceMode mode);

// Features with importance >= M% of the maximum. Empty when no importance is
// positive ("no explanation").
std::vector<std::size_t> select_top(std::span<const double> importance, double m_percent);
std::vector<std::size_t> select_top(const Attribution& attribution, const ExplainConfig& config);

struct HighlightedTau {
  Mnemonic channel = Mnemonic::HKLA;
  std::size_t start = 0;  // offset inside the one-hour segment
  std::size_t feature = 0;
};

struct ChannelHighlight {
  Mnemonic channel = Mnemonic::HKLA;
  std::vector<SampleRange> intervals;  // merged, sorted, segment-relative
  std::vector<std::size_t> features;   // selected features that produced them
};

struct HighlightSet {
  std::vector<ChannelHighlight> channels;  // only channels with highlights, in channel order
  std::vector<HighlightedTau> taus;        // every highlighted tau-segment

  bool empty() const { return channels.empty(); }
  const ChannelHighlight* find(Mnemonic m) const;
};

HighlightSet highlight(std::span<const std::size_t> selected, const SegmentIndex& index);

struct Explanation {
  double probability = 0.0;
  double logit = 0.0;
  Attribution attribution;
  std::vector<std::size_t> selected;
  HighlightSet highlights;
};

Explanation explain(const GbmModel& model, const Featurization& featurization, const ExplainConfig& config);
Explanation explain(const GbmModel& model, const Segment& segment, const CodebookSet& codebooks,
                    const ExplainConfig& config);

// One structured record per alarm moment.
struct ExplanationRecord {
  std::string well_id;
  double time = 0.0;  // window end time
  AccidentType type = AccidentType::Stuck;
  double segment_start_time = 0.0;
  double step = kStepSeconds;
  Explanation explanation;
};

std::string to_json(const ExplanationRecord& record, std::size_t max_features = 50);

}  // namespace bofx
