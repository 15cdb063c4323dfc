#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bofx/telemetry.h"

namespace bofx {

inline constexpr std::size_t kClustersPerChannel = 200;
// Channel-major, cluster-minor: feature = channel * 200 + cluster.
inline constexpr std::size_t kFeatureWidth = kNumChannels * kClustersPerChannel;

constexpr std::size_t feature_index(Mnemonic channel, std::size_t cluster) {
  return index_of(channel) * kClustersPerChannel + cluster;
}
constexpr Mnemonic channel_of_feature(std::size_t feature) {
  return kAllChannels[feature / kClustersPerChannel];
}
constexpr std::size_t cluster_of_feature(std::size_t feature) { return feature % kClustersPerChannel; }

// Sliding-window layout of tau-segments inside a one-hour segment.
struct TauConfig {
  std::size_t tau_len = 30;  // samples (5 min at 10 s)
  std::size_t stride = 6;    // samples (1 min)

  // Number of tau-segments per channel in a 360-sample window.
  std::size_t count() const { return (kSegmentSamples - tau_len) / stride + 1; }
  void validate() const;
  friend bool operator==(const TauConfig&, const TauConfig&) = default;
};

struct TauSegment {
  Mnemonic channel = Mnemonic::HKLA;
  std::size_t start = 0;           // offset inside the one-hour segment
  std::vector<double> values;      // raw channel units
  std::vector<double> normalized;  // z-scored with corpus stats; empty until normalized

  SampleRange span() const { return {start, start + values.size()}; }
};

using TauSet = std::array<std::vector<TauSegment>, kNumChannels>;

TauSet extract_tau(const Segment& segment, const TauConfig& tau);

class Codebook {
 public:
  Codebook(Mnemonic channel, double mean, double stddev, std::size_t tau_len, std::vector<double> centroids);

  Mnemonic channel() const { return channel_; }
  double mean() const { return mean_; }
  double stddev() const { return std_; }
  std::size_t tau_len() const { return tau_len_; }
  std::size_t size() const { return centroids_.size() / tau_len_; }
  std::span<const double> centroid(std::size_t i) const {
    return std::span<const double>(centroids_).subspan(i * tau_len_, tau_len_);
  }
  std::span<const double> centroids() const { return centroids_; }

  std::vector<double> normalize(std::span<const double> raw) const;
  // Nearest centroid for raw (unnormalized) channel values.
  std::size_t assign_raw(std::span<const double> raw) const;

 private:
  Mnemonic channel_;
  double mean_;
  double std_;
  std::size_t tau_len_;
  std::vector<double> centroids_;
};

class CodebookSet {
 public:
  CodebookSet(TauConfig tau, std::vector<Codebook> books);

  const TauConfig& tau() const { return tau_; }
  const Codebook& operator[](Mnemonic m) const { return books_[index_of(m)]; }

  void save(const std::string& path) const;
  static CodebookSet load(const std::string& path);
  std::string to_json() const;
  static CodebookSet from_json(const std::string& text);

 private:
  TauConfig tau_;
  std::vector<Codebook> books_;
};

struct CodebookTrainConfig {
  std::size_t k = kClustersPerChannel;
  std::size_t max_iterations = 100;
  // Cap on tau-segments per channel fed to k-means (seeded subsample).
  std::size_t max_points_per_channel = 4000;
  std::uint64_t seed = 0;
};

struct CodebookTrainReport {
  std::array<std::vector<double>, kNumChannels> objective_history;
  std::array<std::size_t, kNumChannels> points_used{};
};

CodebookSet train_codebooks(std::span<const Segment> corpus, const TauConfig& tau,
                            const CodebookTrainConfig& config, CodebookTrainReport* report = nullptr);

// Fills tau.normalized and returns the nearest centroid (ties -> lowest id).
std::size_t assign(const Codebook& codebook, TauSegment& tau);
std::size_t assign(const Codebook& codebook, const TauSegment& tau);

// 2400 non-negative counts.
struct FeatureVector {
  std::vector<float> counts = std::vector<float>(kFeatureWidth, 0.0f);

  float operator[](std::size_t i) const { return counts[i]; }
  std::size_t size() const { return counts.size(); }
  operator std::span<const float>() const { return counts; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Inverse map from features to the tau-segments of one featurized segment.
// Stores the cluster label of every tau-segment; lookups enumerate starts.
class SegmentIndex {
 public:
  SegmentIndex(TauConfig tau, std::array<std::vector<std::uint16_t>, kNumChannels> labels);

  const TauConfig& tau() const { return tau_; }
  std::span<const std::uint16_t> labels(Mnemonic m) const { return labels_[index_of(m)]; }
  // Starts (offsets inside the segment) of tau-segments assigned to `feature`.
  std::vector<std::size_t> starts_for(std::size_t feature) const;
  SampleRange span_of(std::size_t k) const { return {k * tau_.stride, k * tau_.stride + tau_.tau_len}; }
  friend bool operator==(const SegmentIndex&, const SegmentIndex&) = default;

 private:
  TauConfig tau_;
  std::array<std::vector<std::uint16_t>, kNumChannels> labels_;
};

struct Featurization {
  FeatureVector features;
  SegmentIndex index;
};

Featurization featurize(const Segment& segment, const CodebookSet& codebooks);

// Cluster labels for tau-segments at arbitrary start positions of a whole log,
// computed once so that many overlapping windows can be featurized cheaply.
class LabelTrack {
 public:
  // Labels every tau start needed by windows ending at `window_ends`.
  LabelTrack(const TelemetryLog& log, const CodebookSet& codebooks,
             std::span<const std::size_t> window_ends);
  // Labels every possible tau start position.
  LabelTrack(const TelemetryLog& log, const CodebookSet& codebooks);

  // Same result as featurize(Segment(log, end_index), codebooks).
  Featurization featurize(std::size_t end_index) const;

 private:
  void label_positions(const std::vector<bool>& needed);

  const TelemetryLog* log_;
  const CodebookSet* codebooks_;
  std::array<std::vector<std::int16_t>, kNumChannels> labels_;
};

}  // namespace bofx
