#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bofx/bag_of_features.h"
#include "bofx/consistency.h"
#include "bofx/evaluation.h"
#include "bofx/fcmh.h"
#include "bofx/gbm.h"
#include "bofx/shap.h"
#include "bofx/synthgen.h"
#include "bofx/telemetry.h"

namespace bofx {

struct ExperimentConfig {
  TauConfig tau;
  CodebookTrainConfig codebooks;
  double corpus_stride_minutes = 30.0;
  TrainConfig gbm;
  FcmhConfig fcmh;
  FcmhTrainConfig fcmh_train{.epochs = 5};
  std::size_t fcmh_max_rows = 200;
  bool run_fcmh = true;
  // Positive windows end in [region_start + offset, event].
  double positive_offset_minutes = 10.0;
  double positive_stride_minutes = 1.0;
  double negative_stride_minutes = 5.0;
  double roc_stride_minutes = 1.0;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::array<double, kNumAccidentTypes> coverage_targets = default_coverage_targets();
  double shap_m = 20.0;
  double fcmh_m = 24.0;
  double random_m = 30.0;
  std::size_t random_draws = 10;
  std::size_t consistency_null_reps = 20;
  std::size_t consistency_random_runs = 20;

  void validate() const;
};

// A training or evaluation window: log index, window end index, 0/1 label.
struct WindowSample {
  std::size_t log = 0;
  std::size_t end_index = 0;
  int label = 0;
};

enum class WindowKind { kPositive, kNegative, kGray };

// Classification of a window ending at `end_time` for accident type `type`.
WindowKind classify_window(double end_time, const std::string& well_id, std::span<const AccidentEvent> events,
                           AccidentType type, double positive_offset_seconds);

// Positives at the positive stride, negatives at the negative stride, gray windows dropped.
std::vector<WindowSample> training_windows(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                                           std::span<const AccidentEvent> events, AccidentType type,
                                           const ExperimentConfig& config);

// Codebook corpus: one-hour windows every corpus_stride_minutes.
CodebookSet fit_codebooks(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                          const ExperimentConfig& config, std::uint64_t seed, CodebookTrainReport* report = nullptr);

// Union of the per-type training windows with one label column per type
// (-1 where the window is not a training window for that type).
struct WindowTable {
  std::vector<std::string> well_id;
  std::vector<double> end_time;
  std::vector<std::size_t> log;        // index into the logs it was built from
  std::vector<std::size_t> end_index;
  std::array<std::vector<int>, kNumAccidentTypes> labels;
  FeatureMatrix x{kFeatureWidth};

  std::size_t rows() const { return end_time.size(); }
};

WindowTable build_window_table(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                               std::span<const AccidentEvent> events, const CodebookSet& codebooks,
                               const ExperimentConfig& config);

// Sparse CSV: well_id, end_time, one label column per type, then "feature:count" pairs.
void write_window_table(const WindowTable& table, const std::string& path);
WindowTable read_window_table(const std::string& path);

GbmModel train_type_gbm(const WindowTable& table, AccidentType type, const ExperimentConfig& config,
                        std::uint64_t seed);
// Balanced subsample of at most fcmh_max_rows rows.
FcmhModel train_type_fcmh(const WindowTable& table, AccidentType type, const ExperimentConfig& config,
                          std::uint64_t seed);

struct TypeModels {
  std::vector<GbmModel> gbm;   // one per accident type, indexed by AccidentType
  std::vector<FcmhModel> fcmh;  // empty when FCMH is disabled
};

// Trains the per-type classifiers on the given wells.
TypeModels train_type_models(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                             std::span<const AccidentEvent> events, const CodebookSet& codebooks,
                             const ExperimentConfig& config, std::uint64_t seed);

// Probabilities at every window end index in [360, size] of one log.
std::array<ProbabilitySeries, kNumAccidentTypes> probability_series(const TelemetryLog& log, const LabelTrack& track,
                                                                    const std::vector<GbmModel>& models);

// Data behind one telemetry plot with highlights, references and probability track.
struct CaseFigure {
  std::string well_id;
  AccidentType type = AccidentType::Stuck;
  double time = 0.0;  // explained moment
  double segment_start_time = 0.0;
  double step = kStepSeconds;
  std::array<std::vector<double>, kNumChannels> values;
  std::vector<double> probability;  // aligned to segment samples; NaN before the first full window
  double threshold = 0.0;
  double region_start = 0.0;
  double region_end = 0.0;
  HighlightSet highlights;
  ReferenceRanges references;
};

// Figure for one explained moment of a single log. The probability track is
// recomputed from `model` for every window end inside the segment.
CaseFigure make_case(const Dataset& data, const TelemetryLog& log, std::size_t end_index, AccidentType type,
                     const CodebookSet& codebooks, const GbmModel& model, const Explanation& explanation,
                     double threshold);

struct MethodPr {
  std::string name;
  PrResult strict;
  PrResult extended;
};

struct ConsistencyResult {
  std::size_t moments = 0;
  std::size_t sequences = 0;
  ConsistencyScore shap;
  std::vector<double> random_scores;
  double p_value = 1.0;
};

struct FoldSummary {
  std::vector<std::string> test_wells;
  std::array<std::size_t, kNumAccidentTypes> train_positives{};
  std::array<std::size_t, kNumAccidentTypes> train_negatives{};
};

struct ExperimentResult {
  std::vector<FoldSummary> folds;
  RocCurve micro_roc;
  std::array<double, kNumAccidentTypes> type_auc{};
  std::size_t roc_positives = 0;
  std::size_t roc_negatives = 0;
  ThresholdTable thresholds;
  AlarmResult alarms;
  std::size_t explained_moments = 0;
  std::size_t empty_shap_explanations = 0;
  std::vector<MethodPr> methods;  // SHAP, FCMH (when enabled), Random, Baseline
  double max_local_accuracy_error = 0.0;
  ConsistencyResult consistency;
  std::vector<std::string> explanations;  // one JSON record per SHAP explanation
  std::vector<CaseFigure> cases;          // first explained moment per accident type
};

using ProgressFn = std::function<void(const std::string&)>;

// Five-fold per-well cross-validation of the whole pipeline.
ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& config, const ProgressFn& progress = {});

// Highlighted tau starts of one explained moment, as stored in explanation records.
struct HighlightedMoment {
  std::string well_id;
  double time = 0.0;
  AccidentType type = AccidentType::Stuck;
  std::array<std::vector<std::size_t>, kNumChannels> tau_starts;
};

// Parses explanation records (one JSON object per line).
std::vector<HighlightedMoment> read_highlighted_moments(const std::string& jsonl_text);

struct EmbeddingInputs {
  std::vector<double> highlighted;  // normalized, row-major, tau_len columns
  std::vector<double> codebook;
  std::vector<double> expert;
};

// Gathers one channel's tau-segments: highlighted ones from `moments` of `type`,
// the codebook corpus, and those lying inside the channel's reference intervals
// of `type` events. Highlighted and expert groups are capped at `max_group` (seeded).
EmbeddingInputs embedding_inputs(const Dataset& data, const CodebookSet& codebooks,
                                 std::span<const HighlightedMoment> moments, AccidentType type, Mnemonic channel,
                                 const ExperimentConfig& config, std::size_t max_group, std::uint64_t seed);

// Deterministic metrics document (no wall-clock values).
std::string metrics_json(const ExperimentResult& result);
std::string cases_json(const std::vector<CaseFigure>& cases);
std::vector<CaseFigure> cases_from_json(const std::string& text);

}  // namespace bofx
