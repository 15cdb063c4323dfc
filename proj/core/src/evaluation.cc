#include "bofx/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "bofx/error.h"

namespace bofx {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::array<Mnemonic, 6> kKickChannels = {Mnemonic::GASA, Mnemonic::TVT,  Mnemonic::MFIA,
                                                   Mnemonic::MFOA, Mnemonic::DBTM, Mnemonic::DMEA};
constexpr std::array<Mnemonic, 6> kMudlossChannels = {Mnemonic::TVT,  Mnemonic::SPPA, Mnemonic::MFIA,
                                                      Mnemonic::MFOA, Mnemonic::DBTM, Mnemonic::DMEA};
constexpr std::array<Mnemonic, 7> kStuckChannels = {Mnemonic::HKLA, Mnemonic::BPOS, Mnemonic::WOB, Mnemonic::TQA,
                                                    Mnemonic::RPMA, Mnemonic::DBTM, Mnemonic::DMEA};
constexpr std::array<Mnemonic, 7> kWashoutChannels = {Mnemonic::TVT,  Mnemonic::SPPA, Mnemonic::MFIA, Mnemonic::MFOA,
                                                      Mnemonic::TQA,  Mnemonic::DBTM, Mnemonic::DMEA};

}  // namespace

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::kUsage, "roc_auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorCode::kEvaluation, "AUC is undefined with a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area, in units of (1/pos)(1/neg)
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t gtp = 0, gfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? gtp : gfp) += 1;
    area2 += static_cast<double>(gfp) * static_cast<double>(2 * tp + gtp);
    tp += gtp;
    fp += gfp;
    curve.points.push_back(
        {s, static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

FoldPlan::FoldPlan(std::size_t folds, std::map<std::string, std::size_t> fold_of)
    : folds_(folds), fold_of_(std::move(fold_of)) {
  for (const auto& [well, f] : fold_of_)
    if (f >= folds_) fail(ErrorCode::kEvaluation, "well '" + well + "' assigned to a fold outside the plan");
}

std::size_t FoldPlan::fold_of(const std::string& well_id) const {
  auto it = fold_of_.find(well_id);
  if (it == fold_of_.end()) fail(ErrorCode::kEvaluation, "well '" + well_id + "' is not in the fold plan");
  return it->second;
}

std::vector<std::string> FoldPlan::test_wells(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [well, f] : fold_of_)
    if (f == fold) out.push_back(well);
  return out;
}

std::vector<std::string> FoldPlan::train_wells(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [well, f] : fold_of_)
    if (f != fold) out.push_back(well);
  return out;
}

FoldPlan make_fold_plan(std::span<const std::pair<std::string, std::string>> well_strata, std::size_t folds,
                        std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::kEvaluation, "cross-validation needs at least 2 folds");
  if (well_strata.size() < folds)
    fail(ErrorCode::kEvaluation, "cross-validation needs at least " + std::to_string(folds) + " wells, got " +
                                     std::to_string(well_strata.size()));
  // (stratum, hash, well) ordering is independent of input order.
  std::vector<std::tuple<std::string, std::uint64_t, std::string>> keyed;
  for (const auto& [well, stratum] : well_strata) keyed.emplace_back(stratum, splitmix64(seed ^ fnv1a(well)), well);
  std::sort(keyed.begin(), keyed.end());
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    const auto& well = std::get<2>(keyed[i]);
    if (!fold_of.emplace(well, i % folds).second) fail(ErrorCode::kEvaluation, "duplicate well '" + well + "'");
  }
  return FoldPlan(folds, std::move(fold_of));
}

AlarmResult alarm_eval(std::span<const ProbabilitySeries> series, std::span<const AccidentEvent> events,
                       const Thresholds& thresholds) {
  AlarmResult out;
  for (const auto& e : events) out.per_type[index_of(e.type)].events += 1;
  std::vector<bool> covered(events.size(), false);
  for (const auto& s : series) {
    auto& res = out.per_type[index_of(s.type)];
    res.days += s.duration() / 86400.0;
    const double thr = thresholds[index_of(s.type)];
    std::set<long long> fa_minutes;
    for (std::size_t i = 0; i < s.prob.size(); ++i) {
      if (!(s.prob[i] >= thr)) continue;
      res.alarm_moments += 1;
      const double t = s.time_at(i);
      bool inside = false;
      for (std::size_t e = 0; e < events.size(); ++e) {
        const auto& ev = events[e];
        if (ev.type == s.type && ev.well_id == s.well_id && ev.region_contains(t)) {
          covered[e] = true;
          inside = true;
        }
      }
      if (!inside) fa_minutes.insert(static_cast<long long>(std::floor(t / 60.0)));
    }
    res.false_alarms += fa_minutes.size();
  }
  for (std::size_t e = 0; e < events.size(); ++e)
    if (covered[e]) out.per_type[index_of(events[e].type)].covered += 1;
  return out;
}

std::vector<double> event_region_max(std::span<const ProbabilitySeries> series,
                                     std::span<const AccidentEvent> events) {
  std::vector<double> out(events.size(), 0.0);
  for (std::size_t e = 0; e < events.size(); ++e) {
    for (const auto& s : series) {
      if (s.type != events[e].type || s.well_id != events[e].well_id) continue;
      for (std::size_t i = 0; i < s.prob.size(); ++i)
        if (events[e].region_contains(s.time_at(i))) out[e] = std::max(out[e], s.prob[i]);
    }
  }
  return out;
}

double threshold_for_coverage(std::span<const double> event_max, double target) {
  if (!(target > 0.0 && target <= 1.0)) fail(ErrorCode::kConfig, "coverage target must lie in (0, 1]");
  if (event_max.empty()) return 0.5;
  std::vector<double> sorted(event_max.begin(), event_max.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(target * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return std::clamp(sorted[k - 1], 1e-12, 1.0 - 1e-12);
}

std::array<double, kNumAccidentTypes> default_coverage_targets() {
  std::array<double, kNumAccidentTypes> t{};
  t[index_of(AccidentType::KickFlow)] = 0.70;
  t[index_of(AccidentType::Stuck)] = 0.60;
  t[index_of(AccidentType::Washout)] = 0.60;
  t[index_of(AccidentType::Mudloss)] = 0.55;
  return t;
}

ThresholdTable choose_thresholds(std::span<const ProbabilitySeries> series, std::span<const AccidentEvent> events,
                                 const std::array<double, kNumAccidentTypes>& targets) {
  ThresholdTable table;
  table.target_coverage = targets;
  const auto maxima = event_region_max(series, events);
  for (AccidentType type : kAllAccidentTypes) {
    std::vector<double> m;
    for (std::size_t e = 0; e < events.size(); ++e)
      if (events[e].type == type) m.push_back(maxima[e]);
    table.threshold[index_of(type)] = threshold_for_coverage(m, targets[index_of(type)]);
  }
  const auto result = alarm_eval(series, events, table.threshold);
  for (std::size_t t = 0; t < kNumAccidentTypes; ++t) {
    table.coverage[t] = result.per_type[t].coverage();
    table.false_alarms_per_day[t] = result.per_type[t].false_alarms_per_day();
  }
  return table;
}

std::span<const Mnemonic> extended_channels(AccidentType type) {
  switch (type) {
    case AccidentType::KickFlow: return kKickChannels;
    case AccidentType::Mudloss: return kMudlossChannels;
    case AccidentType::Stuck: return kStuckChannels;
    case AccidentType::Washout: return kWashoutChannels;
  }
  return {};
}

std::string_view to_string(PrMode mode) { return mode == PrMode::kStrict ? "strict" : "extended"; }

ReferenceRanges reference_ranges(std::span<const ReferenceInterval> refs, double segment_start_time, double step) {
  ReferenceRanges out;
  constexpr double kEps = 1e-9;
  for (const auto& r : refs) {
    const double b = std::ceil((r.start - segment_start_time) / step - kEps);
    const double e = std::ceil((r.end - segment_start_time) / step - kEps);
    const double lo = std::clamp(b, 0.0, static_cast<double>(kSegmentSamples));
    const double hi = std::clamp(e, 0.0, static_cast<double>(kSegmentSamples));
    if (hi > lo) out[index_of(r.channel)].push_back({static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)});
  }
  for (auto& v : out) std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
  return out;
}

std::array<std::vector<bool>, kNumChannels> highlighted_mask(const HighlightSet& highlights, const TauConfig& tau) {
  std::array<std::vector<bool>, kNumChannels> mask;
  for (auto& m : mask) m.assign(tau.count(), false);
  for (const auto& t : highlights.taus) {
    const std::size_t k = t.start / tau.stride;
    if (k < tau.count()) mask[index_of(t.channel)][k] = true;
  }
  return mask;
}

PrCounts explanation_counts(const ExplainedMoment& moment, PrMode mode, std::size_t* ref_channels,
                            std::size_t* ref_channels_hit) {
  const auto& refs = moment.references;
  bool any = false;
  for (const auto& r : refs) any = any || !r.empty();
  if (!any) fail(ErrorCode::kEvaluation, "explained moment has no reference intervals");

  std::array<bool, kNumChannels> eligible{};
  for (std::size_t c = 0; c < kNumChannels; ++c) eligible[c] = !refs[c].empty();
  if (mode == PrMode::kExtended)
    for (Mnemonic m : extended_channels(moment.type)) eligible[index_of(m)] = true;

  auto hits = [](const std::vector<SampleRange>& ranges, const SampleRange& span) {
    for (const auto& r : ranges)
      if (r.intersects(span)) return true;
    return false;
  };

  PrCounts counts;
  const std::size_t count = moment.tau.count();
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto& hl = moment.highlighted[c];
    bool channel_hit = false;
    for (std::size_t k = 0; k < count; ++k) {
      const SampleRange span{k * moment.tau.stride, k * moment.tau.stride + moment.tau.tau_len};
      const bool own = hits(refs[c], span);
      bool positive = false;
      if (mode == PrMode::kStrict) {
        positive = own;
      } else if (eligible[c]) {
        for (std::size_t o = 0; o < kNumChannels && !positive; ++o) positive = hits(refs[o], span);
      }
      const bool highlighted = k < hl.size() && hl[k];
      if (highlighted && own) channel_hit = true;
      if (highlighted && positive) ++counts.tp;
      else if (highlighted) ++counts.fp;
      else if (positive) ++counts.fn;
    }
    if (!refs[c].empty()) {
      if (ref_channels) ++*ref_channels;
      if (ref_channels_hit && channel_hit) ++*ref_channels_hit;
    }
  }
  return counts;
}

PrResult explanation_pr(std::span<const ExplainedMoment> moments, PrMode mode) {
  PrResult out;
  for (const auto& m : moments) {
    const PrCounts c = explanation_counts(m, mode, &out.reference_channels, &out.reference_channels_hit);
    out.per_type[index_of(m.type)] += c;
    out.micro += c;
  }
  return out;
}

std::vector<std::vector<double>> random_importance(std::size_t draws, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out(draws, std::vector<double>(width));
  for (auto& v : out)
    for (double& x : v) x = u(rng);
  return out;
}

std::vector<std::size_t> uniform_selection(std::size_t width) {
  std::vector<std::size_t> out(width);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

}  // namespace bofx
