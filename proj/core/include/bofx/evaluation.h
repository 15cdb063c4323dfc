#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bofx/bag_of_features.h"
#include "bofx/shap.h"
#include "bofx/telemetry.h"

namespace bofx {

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), one point per distinct score
  double auc = 0.0;
};

// Trapezoidal ROC with equal scores grouped. Throws kEvaluation for a single class.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

// Per-well fold assignment, stratified by a label (e.g. accident type).
class FoldPlan {
 public:
  FoldPlan(std::size_t folds, std::map<std::string, std::size_t> fold_of);

  std::size_t folds() const { return folds_; }
  std::size_t fold_of(const std::string& well_id) const;
  std::vector<std::string> test_wells(std::size_t fold) const;
  std::vector<std::string> train_wells(std::size_t fold) const;

 private:
  std::size_t folds_;
  std::map<std::string, std::size_t> fold_of_;
};

// Order-independent: depends only on the set of (well, stratum) pairs and the seed.
// Throws kEvaluation with fewer wells than folds.
FoldPlan make_fold_plan(std::span<const std::pair<std::string, std::string>> well_strata, std::size_t folds,
                        std::uint64_t seed);

// Model probability on the 10-s grid for one well and one accident type.
struct ProbabilitySeries {
  std::string well_id;
  AccidentType type = AccidentType::Stuck;
  double start_time = 0.0;  // time of prob[0]
  double step = kStepSeconds;
  std::vector<double> prob;

  double time_at(std::size_t i) const { return start_time + step * static_cast<double>(i); }
  double duration() const { return step * static_cast<double>(prob.size()); }
};

struct AlarmTypeResult {
  std::size_t events = 0;
  std::size_t covered = 0;
  std::size_t false_alarms = 0;  // debounced to one per minute
  std::size_t alarm_moments = 0;  // grid points at or above threshold
  double days = 0.0;

  double coverage() const { return events ? static_cast<double>(covered) / static_cast<double>(events) : 0.0; }
  double false_alarms_per_day() const { return days > 0.0 ? static_cast<double>(false_alarms) / days : 0.0; }
};

struct AlarmResult {
  std::array<AlarmTypeResult, kNumAccidentTypes> per_type;
};

using Thresholds = std::array<double, kNumAccidentTypes>;

// An accident is covered when its own type's series reaches the threshold inside
// its region; every other alarm minute counts as a false alarm.
AlarmResult alarm_eval(std::span<const ProbabilitySeries> series, std::span<const AccidentEvent> events,
                       const Thresholds& thresholds);

// Maximum of the event's own-type probability inside its region (0 if no grid point falls inside).
std::vector<double> event_region_max(std::span<const ProbabilitySeries> series,
                                     std::span<const AccidentEvent> events);

// Largest threshold whose coverage reaches `target` given per-event maxima.
double threshold_for_coverage(std::span<const double> event_max, double target);

struct ThresholdTable {
  Thresholds threshold{};
  std::array<double, kNumAccidentTypes> target_coverage{};
  std::array<double, kNumAccidentTypes> coverage{};
  std::array<double, kNumAccidentTypes> false_alarms_per_day{};
};

// Coverage targets used for alarm thresholds: KickFlow 70%, Stuck 60%, Washout 60%, Mudloss 55%.
std::array<double, kNumAccidentTypes> default_coverage_targets();

ThresholdTable choose_thresholds(std::span<const ProbabilitySeries> series, std::span<const AccidentEvent> events,
                                 const std::array<double, kNumAccidentTypes>& targets);

// Channels that may be highlighted for an accident type in extended mode.
std::span<const Mnemonic> extended_channels(AccidentType type);

enum class PrMode { kStrict, kExtended };
std::string_view to_string(PrMode mode);

struct PrCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  PrCounts& operator+=(const PrCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const PrCounts&, const PrCounts&) = default;
};

// Reference intervals of one explained moment, per channel, in segment sample offsets.
using ReferenceRanges = std::array<std::vector<SampleRange>, kNumChannels>;

ReferenceRanges reference_ranges(std::span<const ReferenceInterval> refs, double segment_start_time,
                                 double step = kStepSeconds);

// One alarm moment to score: which tau-segments were highlighted, against which references.
struct ExplainedMoment {
  AccidentType type = AccidentType::Stuck;
  TauConfig tau;
  // highlighted[c][k] is true when tau-segment k of channel c is highlighted.
  std::array<std::vector<bool>, kNumChannels> highlighted;
  ReferenceRanges references;
};

std::array<std::vector<bool>, kNumChannels> highlighted_mask(const HighlightSet& highlights, const TauConfig& tau);

struct PrResult {
  std::array<PrCounts, kNumAccidentTypes> per_type;
  PrCounts micro;
  // Alternative reading: share of (moment, reference channel) pairs with at least one correct highlight.
  std::size_t reference_channels = 0;
  std::size_t reference_channels_hit = 0;

  double reference_hit_rate() const {
    return reference_channels ? static_cast<double>(reference_channels_hit) / static_cast<double>(reference_channels)
                              : 0.0;
  }
};

// Counts for a single moment. Throws kEvaluation when the moment has no references.
PrCounts explanation_counts(const ExplainedMoment& moment, PrMode mode, std::size_t* ref_channels = nullptr,
                            std::size_t* ref_channels_hit = nullptr);
PrResult explanation_pr(std::span<const ExplainedMoment> moments, PrMode mode);

// Importance vectors for the random explainer: i.i.d. uniform [0,1].
std::vector<std::vector<double>> random_importance(std::size_t draws, std::size_t width, std::uint64_t seed);
// Uniform explainer: every feature selected.
std::vector<std::size_t> uniform_selection(std::size_t width = kFeatureWidth);

}  // namespace bofx
