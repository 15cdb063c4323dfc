#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bofx/bag_of_features.h"
#include "bofx/tsne.h"

namespace bofx {

// Normalized tau-segments of one alarm moment with the highlighted subset.
// Moments sharing `sequence` and adjacent in input order are neighbors.
struct ConsistencyMoment {
  std::size_t sequence = 0;
  std::size_t tau_len = 0;
  std::array<std::vector<double>, kNumChannels> taus;  // count x tau_len per channel
  std::array<std::vector<bool>, kNumChannels> highlighted;

  std::size_t count(Mnemonic m) const { return tau_len ? taus[index_of(m)].size() / tau_len : 0; }
};

struct ChannelConsistency {
  bool present = false;  // at least one neighboring pair with highlights on both sides
  std::size_t pairs = 0;
  double drift = 0.0;       // mean centroid displacement of highlighted sets
  double null_drift = 0.0;  // same for size-matched random subsets
  double ratio = 0.0;
};

struct ConsistencyScore {
  std::array<ChannelConsistency, kNumChannels> channels;
  double score = 0.0;  // mean ratio over present channels; 0 when none
  std::size_t present_channels = 0;
};

ConsistencyScore consistency_score(std::span<const ConsistencyMoment> moments, std::size_t null_reps,
                                   std::uint64_t seed);

enum class TauGroup : std::uint8_t { kHighlighted, kCodebook, kExpert };

struct ChannelEmbedding {
  Mnemonic channel = Mnemonic::HKLA;
  std::vector<TauGroup> groups;
  Embedding2D embedding;
};

// Embeds highlighted, codebook-corpus and expert-region tau-segments of one channel
// (row-major, tau_len columns). The codebook group is subsampled to `max_codebook`
// (seeded); perplexity is lowered to (n - 1) / 3 for small inputs.
ChannelEmbedding embed_channel(Mnemonic channel, std::size_t tau_len, std::span<const double> highlighted,
                               std::span<const double> codebook, std::span<const double> expert,
                               const TsneConfig& config, std::size_t max_codebook);

}  // namespace bofx
