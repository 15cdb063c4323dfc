#include "bofx/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bofx/error.h"
#include "json.hpp"

namespace bofx {

namespace {

using ojson = nlohmann::ordered_json;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix(mix(mix(seed ^ mix(a)) ^ mix(b + 0x51)) ^ mix(c + 0xa3));
}

std::size_t minutes_to_samples(double minutes) {
  return static_cast<std::size_t>(std::llround(minutes * 60.0 / kStepSeconds));
}

std::vector<ReferenceInterval> references_for(const AccidentEvent& e, std::span<const ReferenceInterval> refs) {
  std::vector<ReferenceInterval> out;
  for (const auto& r : refs)
    if (r.well_id == e.well_id && r.event_time == e.event_time) out.push_back(r);
  return out;
}

struct FoldState {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::unique_ptr<CodebookSet> codebooks;
  std::unique_ptr<TypeModels> models;
  std::vector<std::unique_ptr<LabelTrack>> tracks;  // parallel to test
  std::vector<std::array<ProbabilitySeries, kNumAccidentTypes>> series;  // parallel to test
};

ojson counts_json(const PrCounts& c) {
  return {{"precision", c.precision()}, {"recall", c.recall()}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

ojson pr_json(const PrResult& r) {
  ojson j = counts_json(r.micro);
  j["reference_hit_rate"] = r.reference_hit_rate();
  auto& per = j["per_type"] = ojson::object();
  for (AccidentType t : kAllAccidentTypes) per[std::string(to_string(t))] = counts_json(r.per_type[index_of(t)]);
  return j;
}

std::vector<double> normalized_taus(const Segment& seg, const CodebookSet& books, Mnemonic m) {
  const TauConfig& tau = books.tau();
  const Codebook& book = books[m];
  const auto values = seg.channel(m);
  std::vector<double> out;
  out.reserve(tau.count() * tau.tau_len);
  for (std::size_t k = 0; k < tau.count(); ++k)
    for (std::size_t i = 0; i < tau.tau_len; ++i)
      out.push_back((values[k * tau.stride + i] - book.mean()) / book.stddev());
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  tau.validate();
  gbm.validate();
  if (run_fcmh) {
    fcmh.validate();
    fcmh_train.validate();
  }
  if (folds < 2) fail(ErrorCode::kConfig, "folds must be at least 2");
  for (double m : {shap_m, fcmh_m, random_m})
    if (!(m > 0.0 && m <= 100.0)) fail(ErrorCode::kConfig, "M must lie in (0, 100]");
  for (double s : {corpus_stride_minutes, positive_stride_minutes, negative_stride_minutes, roc_stride_minutes})
    if (!(s > 0.0)) fail(ErrorCode::kConfig, "window strides must be positive");
  if (random_draws == 0 || consistency_null_reps == 0 || consistency_random_runs == 0)
    fail(ErrorCode::kConfig, "baseline draw counts must be positive");
}

WindowKind classify_window(double end_time, const std::string& well_id, std::span<const AccidentEvent> events,
                           AccidentType type, double positive_offset_seconds) {
  WindowKind kind = WindowKind::kNegative;
  for (const auto& e : events) {
    if (e.type != type || e.well_id != well_id) continue;
    if (end_time >= e.region_start + positive_offset_seconds && end_time <= e.event_time) return WindowKind::kPositive;
    // The hour ending at end_time overlaps the accident's region.
    if (end_time > e.region_start && end_time - 3600.0 <= e.region_end) kind = WindowKind::kGray;
  }
  return kind;
}

std::vector<WindowSample> training_windows(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                                           std::span<const AccidentEvent> events, AccidentType type,
                                           const ExperimentConfig& config) {
  const std::size_t pos_stride = std::max<std::size_t>(1, minutes_to_samples(config.positive_stride_minutes));
  const std::size_t neg_stride = std::max<std::size_t>(1, minutes_to_samples(config.negative_stride_minutes));
  const double offset = config.positive_offset_minutes * 60.0;
  std::vector<WindowSample> out;
  for (std::size_t id : log_ids) {
    const TelemetryLog& log = logs[id];
    for (std::size_t end = kSegmentSamples; end <= log.size(); ++end) {
      const std::size_t rel = end - kSegmentSamples;
      const bool pos_grid = rel % pos_stride == 0;
      const bool neg_grid = rel % neg_stride == 0;
      if (!pos_grid && !neg_grid) continue;
      const WindowKind kind = classify_window(log.time_at(end), log.well_id(), events, type, offset);
      if (kind == WindowKind::kPositive && pos_grid) out.push_back({id, end, 1});
      if (kind == WindowKind::kNegative && neg_grid) out.push_back({id, end, 0});
    }
  }
  return out;
}

CodebookSet fit_codebooks(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                          const ExperimentConfig& config, std::uint64_t seed, CodebookTrainReport* report) {
  const std::size_t stride = std::max<std::size_t>(1, minutes_to_samples(config.corpus_stride_minutes));
  std::vector<Segment> corpus;
  for (std::size_t id : log_ids)
    for (std::size_t end = kSegmentSamples; end <= logs[id].size(); end += stride) corpus.emplace_back(logs[id], end);
  if (corpus.empty()) fail(ErrorCode::kTraining, "no one-hour windows available for codebook training");
  CodebookTrainConfig cfg = config.codebooks;
  cfg.seed = seed;
  return train_codebooks(corpus, config.tau, cfg, report);
}

WindowTable build_window_table(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                               std::span<const AccidentEvent> events, const CodebookSet& codebooks,
                               const ExperimentConfig& config) {
  std::map<std::pair<std::size_t, std::size_t>, std::array<int, kNumAccidentTypes>> rows;
  for (AccidentType t : kAllAccidentTypes) {
    for (const auto& w : training_windows(logs, log_ids, events, t, config)) {
      auto [it, inserted] = rows.try_emplace({w.log, w.end_index});
      if (inserted) it->second.fill(-1);
      it->second[index_of(t)] = w.label;
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> ends;
  for (const auto& [key, labels] : rows) ends[key.first].push_back(key.second);

  WindowTable table;
  table.x = FeatureMatrix(rows.size(), kFeatureWidth);
  std::size_t r = 0;
  for (const auto& [id, v] : ends) {
    const LabelTrack track(logs[id], codebooks, v);
    for (std::size_t end : v) {
      const auto f = track.featurize(end);
      std::copy(f.features.counts.begin(), f.features.counts.end(), table.x.row(r).begin());
      table.well_id.push_back(logs[id].well_id());
      table.end_time.push_back(logs[id].time_at(end));
      table.log.push_back(id);
      table.end_index.push_back(end);
      const auto& labels = rows.at({id, end});
      for (AccidentType t : kAllAccidentTypes) table.labels[index_of(t)].push_back(labels[index_of(t)]);
      ++r;
    }
  }
  return table;
}

void write_window_table(const WindowTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << "well_id,end_time";
  for (AccidentType t : kAllAccidentTypes) out << ',' << to_string(t);
  out << ",features\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.well_id[r] << ',' << format_double(table.end_time[r]);
    for (AccidentType t : kAllAccidentTypes) out << ',' << table.labels[index_of(t)][r];
    out << ',';
    bool first = true;
    const auto row = table.x.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) {
      if (row[f] == 0.0f) continue;
      out << (first ? "" : " ") << f << ':' << row[f];
      first = false;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

WindowTable read_window_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingArtifact, "feature table '" + path + "' not found");
  std::string line;
  std::getline(in, line);
  std::string expected = "well_id,end_time";
  for (AccidentType t : kAllAccidentTypes) expected += "," + std::string(to_string(t));
  expected += ",features";
  if (line != expected) fail(ErrorCode::kFormat, path + ": unexpected header");
  WindowTable table;
  std::size_t line_no = 1;
  std::vector<float> row(kFeatureWidth);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = [&] { return path + ":" + std::to_string(line_no) + ": "; };
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 3 + kNumAccidentTypes) fail(ErrorCode::kFormat, where() + "wrong number of fields");
    try {
      table.well_id.push_back(cells[0]);
      table.end_time.push_back(std::stod(cells[1]));
      for (std::size_t t = 0; t < kNumAccidentTypes; ++t) {
        const int v = std::stoi(cells[2 + t]);
        if (v < -1 || v > 1) fail(ErrorCode::kFormat, where() + "label must be -1, 0 or 1");
        table.labels[t].push_back(v);
      }
      std::fill(row.begin(), row.end(), 0.0f);
      std::stringstream fs(cells.back());
      std::string pair;
      while (fs >> pair) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) fail(ErrorCode::kFormat, where() + "bad feature entry '" + pair + "'");
        const std::size_t f = std::stoul(pair.substr(0, colon));
        if (f >= kFeatureWidth) fail(ErrorCode::kFormat, where() + "feature index out of range");
        row[f] = std::stof(pair.substr(colon + 1));
      }
    } catch (const std::logic_error&) {
      fail(ErrorCode::kFormat, where() + "unparseable number");
    }
    table.x.add_row(row);
    table.log.push_back(0);
    table.end_index.push_back(0);
  }
  return table;
}

namespace {

void type_rows(const WindowTable& table, AccidentType type, std::vector<std::size_t>& rows, std::vector<int>& y) {
  const auto& labels = table.labels[index_of(type)];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (labels[r] < 0) continue;
    rows.push_back(r);
    y.push_back(labels[r]);
  }
  const std::size_t positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (positives == 0 || positives == y.size())
    fail(ErrorCode::kTraining, std::string("training wells contain no ") + (positives == 0 ? "positive" : "negative") +
                                   " windows for " + std::string(to_string(type)));
}

FeatureMatrix gather(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  FeatureMatrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace

GbmModel train_type_gbm(const WindowTable& table, AccidentType type, const ExperimentConfig& config,
                        std::uint64_t seed) {
  std::vector<std::size_t> rows;
  std::vector<int> y;
  type_rows(table, type, rows, y);
  TrainConfig gcfg = config.gbm;
  gcfg.seed = derive(seed, 1, index_of(type));
  return train_gbm(gather(table.x, rows), y, gcfg);
}

FcmhModel train_type_fcmh(const WindowTable& table, AccidentType type, const ExperimentConfig& config,
                          std::uint64_t seed) {
  std::vector<std::size_t> rows;
  std::vector<int> y;
  type_rows(table, type, rows, y);
  // All positives up to half the budget, negatives fill the rest.
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < rows.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  std::mt19937_64 rng(derive(seed, 2, index_of(type)));
  const std::size_t budget = std::max<std::size_t>(config.fcmh_max_rows, 2);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  pos.resize(std::min(pos.size(), budget / 2));
  neg.resize(std::min(neg.size(), budget - pos.size()));
  std::vector<std::size_t> pick = pos;
  pick.insert(pick.end(), neg.begin(), neg.end());
  std::sort(pick.begin(), pick.end());
  std::vector<std::size_t> sel(pick.size());
  std::vector<int> ys(pick.size());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    sel[i] = rows[pick[i]];
    ys[i] = y[pick[i]];
  }
  FcmhConfig mcfg = config.fcmh;
  mcfg.num_features = kFeatureWidth;
  FcmhTrainConfig tcfg = config.fcmh_train;
  tcfg.seed = derive(seed, 3, index_of(type));
  return train_fcmh(gather(table.x, sel), ys, mcfg, tcfg);
}

TypeModels train_type_models(std::span<const TelemetryLog> logs, std::span<const std::size_t> log_ids,
                             std::span<const AccidentEvent> events, const CodebookSet& codebooks,
                             const ExperimentConfig& config, std::uint64_t seed) {
  const WindowTable table = build_window_table(logs, log_ids, events, codebooks, config);
  TypeModels out;
  for (AccidentType t : kAllAccidentTypes) {
    out.gbm.push_back(train_type_gbm(table, t, config, seed));
    if (config.run_fcmh) out.fcmh.push_back(train_type_fcmh(table, t, config, seed));
  }
  return out;
}

std::array<ProbabilitySeries, kNumAccidentTypes> probability_series(const TelemetryLog& log, const LabelTrack& track,
                                                                    const std::vector<GbmModel>& models) {
  if (models.size() != kNumAccidentTypes) fail(ErrorCode::kUsage, "need one model per accident type");
  std::array<ProbabilitySeries, kNumAccidentTypes> out;
  for (AccidentType t : kAllAccidentTypes) {
    auto& s = out[index_of(t)];
    s.well_id = log.well_id();
    s.type = t;
    s.start_time = log.time_at(kSegmentSamples);
    s.step = log.step();
  }
  for (std::size_t end = kSegmentSamples; end <= log.size(); ++end) {
    const auto f = track.featurize(end);
    for (std::size_t t = 0; t < kNumAccidentTypes; ++t) out[t].prob.push_back(models[t].predict_proba(f.features));
  }
  return out;
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const auto& logs = data.logs;
  std::map<std::string, std::size_t> log_of;
  for (std::size_t i = 0; i < logs.size(); ++i)
    if (!log_of.emplace(logs[i].well_id(), i).second)
      fail(ErrorCode::kFormat, "duplicate well id '" + logs[i].well_id() + "'");
  for (const auto& e : data.events)
    if (!log_of.count(e.well_id)) fail(ErrorCode::kFormat, "event references unknown well '" + e.well_id + "'");

  std::vector<std::pair<std::string, std::string>> strata;
  for (const auto& log : logs) {
    std::string s = "none";
    for (const auto& e : data.events)
      if (e.well_id == log.well_id()) {
        s = std::string(to_string(e.type));
        break;
      }
    strata.emplace_back(log.well_id(), s);
  }
  const FoldPlan plan = make_fold_plan(strata, config.folds, config.seed);

  ExperimentResult result;
  std::vector<std::unique_ptr<FoldState>> folds;
  std::vector<ProbabilitySeries> all_series;
  for (std::size_t f = 0; f < config.folds; ++f) {
    auto st = std::make_unique<FoldState>();
    for (const auto& w : plan.train_wells(f)) st->train.push_back(log_of.at(w));
    for (const auto& w : plan.test_wells(f)) st->test.push_back(log_of.at(w));
    say("fold " + std::to_string(f + 1) + "/" + std::to_string(config.folds) + ": codebooks");
    st->codebooks = std::make_unique<CodebookSet>(fit_codebooks(logs, st->train, config, derive(config.seed, 10, f)));
    say("fold " + std::to_string(f + 1) + "/" + std::to_string(config.folds) + ": classifiers");
    st->models = std::make_unique<TypeModels>(
        train_type_models(logs, st->train, data.events, *st->codebooks, config, derive(config.seed, 11, f)));
    FoldSummary summary;
    for (AccidentType t : kAllAccidentTypes) {
      for (const auto& w : training_windows(logs, st->train, data.events, t, config))
        (w.label ? summary.train_positives : summary.train_negatives)[index_of(t)] += 1;
    }
    say("fold " + std::to_string(f + 1) + "/" + std::to_string(config.folds) + ": held-out scoring");
    for (std::size_t id : st->test) {
      summary.test_wells.push_back(logs[id].well_id());
      st->tracks.push_back(std::make_unique<LabelTrack>(logs[id], *st->codebooks));
      st->series.push_back(probability_series(logs[id], *st->tracks.back(), st->models->gbm));
      for (const auto& s : st->series.back()) all_series.push_back(s);
    }
    result.folds.push_back(std::move(summary));
    folds.push_back(std::move(st));
  }

  // Pooled (micro) ROC over all held-out moments and accident types.
  {
    const std::size_t stride = std::max<std::size_t>(1, minutes_to_samples(config.roc_stride_minutes));
    const double offset = config.positive_offset_minutes * 60.0;
    std::vector<double> scores;
    std::vector<int> labels;
    std::array<std::vector<double>, kNumAccidentTypes> ts;
    std::array<std::vector<int>, kNumAccidentTypes> tl;
    for (const auto& s : all_series) {
      for (std::size_t i = 0; i < s.prob.size(); i += stride) {
        const WindowKind kind = classify_window(s.time_at(i), s.well_id, data.events, s.type, offset);
        if (kind == WindowKind::kGray) continue;
        const int label = kind == WindowKind::kPositive ? 1 : 0;
        scores.push_back(s.prob[i]);
        labels.push_back(label);
        ts[index_of(s.type)].push_back(s.prob[i]);
        tl[index_of(s.type)].push_back(label);
      }
    }
    result.micro_roc = roc_auc(scores, labels);
    result.roc_positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    result.roc_negatives = labels.size() - result.roc_positives;
    for (std::size_t t = 0; t < kNumAccidentTypes; ++t) {
      const auto pos = std::count(tl[t].begin(), tl[t].end(), 1);
      result.type_auc[t] = pos > 0 && pos < static_cast<std::ptrdiff_t>(tl[t].size())
                               ? roc_auc(ts[t], tl[t]).auc
                               : std::numeric_limits<double>::quiet_NaN();
    }
  }

  result.thresholds = choose_thresholds(all_series, data.events, config.coverage_targets);
  result.alarms = alarm_eval(all_series, data.events, result.thresholds.threshold);

  say("explaining alarm moments");
  std::vector<ExplainedMoment> shap_m, fcmh_m, random_m, uniform_m;
  std::vector<ConsistencyMoment> cmoments;
  std::vector<std::vector<std::array<std::vector<bool>, kNumChannels>>> random_masks(config.consistency_random_runs);
  std::array<bool, kNumAccidentTypes> have_case{};
  const std::vector<std::size_t> everything = uniform_selection();
  ExplainConfig shap_cfg;
  shap_cfg.m_percent = config.shap_m;
  std::size_t sequence = 0;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const FoldState& st = *folds[f];
    for (std::size_t ti = 0; ti < st.test.size(); ++ti) {
      const TelemetryLog& log = logs[st.test[ti]];
      for (std::size_t ei = 0; ei < data.events.size(); ++ei) {
        const AccidentEvent& ev = data.events[ei];
        if (ev.well_id != log.well_id()) continue;
        const auto refs = references_for(ev, data.references);
        if (refs.empty()) continue;
        const auto& series = st.series[ti][index_of(ev.type)];
        const double thr = result.thresholds.threshold[index_of(ev.type)];
        std::vector<std::size_t> moments;
        long long last_minute = std::numeric_limits<long long>::min();
        for (std::size_t i = 0; i < series.prob.size(); ++i) {
          const double t = series.time_at(i);
          if (!ev.region_contains(t) || !(series.prob[i] >= thr)) continue;
          const auto minute = static_cast<long long>(std::floor(t / 60.0));
          if (minute == last_minute) continue;
          last_minute = minute;
          moments.push_back(i + kSegmentSamples);
        }
        const std::size_t seq = sequence++;
        std::size_t case_moment = moments.empty() ? 0 : moments.back();
        for (std::size_t end : moments) {
          const Segment seg(log, end);
          const Featurization feat = st.tracks[ti]->featurize(end);
          const TauConfig& tau = st.codebooks->tau();
          const ReferenceRanges rr = reference_ranges(refs, log.time_at(seg.begin_index()), log.step());
          // Alarms at the very start of a region can precede every reference sample.
          if (std::all_of(rr.begin(), rr.end(), [](const auto& r) { return r.empty(); })) continue;
          ++result.explained_moments;

          const Explanation ex = explain(st.models->gbm[index_of(ev.type)], feat, shap_cfg);
          result.max_local_accuracy_error =
              std::max(result.max_local_accuracy_error, std::abs(ex.attribution.total() - ex.logit));
          if (ex.selected.empty()) ++result.empty_shap_explanations;
          shap_m.push_back({ev.type, tau, highlighted_mask(ex.highlights, tau), rr});
          ExplanationRecord rec{log.well_id(), log.time_at(end), ev.type, log.time_at(seg.begin_index()), log.step(), ex};
          result.explanations.push_back(to_json(rec));

          if (config.run_fcmh) {
            const auto imp = st.models->fcmh[index_of(ev.type)].importance(feat.features);
            const auto hl = highlight(select_top(imp, config.fcmh_m), feat.index);
            fcmh_m.push_back({ev.type, tau, highlighted_mask(hl, tau), rr});
          }
          const auto draws = random_importance(config.random_draws, kFeatureWidth,
                                               derive(config.seed, 20, ei, end));
          for (const auto& imp : draws) {
            const auto hl = highlight(select_top(imp, config.random_m), feat.index);
            random_m.push_back({ev.type, tau, highlighted_mask(hl, tau), rr});
          }
          uniform_m.push_back({ev.type, tau, highlighted_mask(highlight(everything, feat.index), tau), rr});

          if (ev.type == AccidentType::Stuck) {
            ConsistencyMoment cm;
            cm.sequence = seq;
            cm.tau_len = tau.tau_len;
            for (Mnemonic m : kAllChannels) cm.taus[index_of(m)] = normalized_taus(seg, *st.codebooks, m);
            cm.highlighted = shap_m.back().highlighted;
            for (std::size_t r = 0; r < config.consistency_random_runs; ++r) {
              const auto imp = random_importance(1, kFeatureWidth, derive(config.seed, 30 + r, ei, end)).front();
              random_masks[r].push_back(highlighted_mask(highlight(select_top(imp, config.random_m), feat.index), tau));
            }
            cmoments.push_back(std::move(cm));
          }

          if (end == case_moment && !have_case[index_of(ev.type)] && !ex.highlights.empty()) {
            have_case[index_of(ev.type)] = true;
            CaseFigure c;
            c.well_id = log.well_id();
            c.type = ev.type;
            c.time = log.time_at(end);
            c.segment_start_time = log.time_at(seg.begin_index());
            c.step = log.step();
            for (Mnemonic m : kAllChannels) {
              const auto v = seg.channel(m);
              c.values[index_of(m)].assign(v.begin(), v.end());
            }
            c.probability.assign(kSegmentSamples, std::numeric_limits<double>::quiet_NaN());
            for (std::size_t j = 0; j < kSegmentSamples; ++j) {
              const std::size_t idx = seg.begin_index() + j;
              if (idx >= kSegmentSamples) c.probability[j] = series.prob[idx - kSegmentSamples];
            }
            c.threshold = thr;
            c.region_start = ev.region_start;
            c.region_end = ev.region_end;
            c.highlights = ex.highlights;
            c.references = rr;
            result.cases.push_back(std::move(c));
          }
        }
      }
    }
  }

  if (!shap_m.empty()) {
    result.methods.push_back({"SHAP", explanation_pr(shap_m, PrMode::kStrict), explanation_pr(shap_m, PrMode::kExtended)});
    if (config.run_fcmh)
      result.methods.push_back(
          {"FCMH", explanation_pr(fcmh_m, PrMode::kStrict), explanation_pr(fcmh_m, PrMode::kExtended)});
    result.methods.push_back(
        {"Random", explanation_pr(random_m, PrMode::kStrict), explanation_pr(random_m, PrMode::kExtended)});
    result.methods.push_back(
        {"Baseline", explanation_pr(uniform_m, PrMode::kStrict), explanation_pr(uniform_m, PrMode::kExtended)});
  }

  say("consistency analysis");
  auto& cons = result.consistency;
  cons.moments = cmoments.size();
  {
    std::set<std::size_t> seqs;
    for (const auto& m : cmoments) seqs.insert(m.sequence);
    cons.sequences = seqs.size();
  }
  cons.shap = consistency_score(cmoments, config.consistency_null_reps, derive(config.seed, 40));
  std::size_t not_larger = 0;
  for (std::size_t r = 0; r < config.consistency_random_runs; ++r) {
    for (std::size_t i = 0; i < cmoments.size(); ++i) cmoments[i].highlighted = random_masks[r][i];
    const auto s = consistency_score(cmoments, config.consistency_null_reps, derive(config.seed, 41, r));
    cons.random_scores.push_back(s.score);
    if (s.score <= cons.shap.score) ++not_larger;
  }
  cons.p_value = static_cast<double>(1 + not_larger) / static_cast<double>(1 + config.consistency_random_runs);
  std::sort(result.cases.begin(), result.cases.end(),
            [](const CaseFigure& a, const CaseFigure& b) { return a.type < b.type; });
  return result;
}

std::string metrics_json(const ExperimentResult& r) {
  ojson j;
  j["format"] = "bofx.metrics";
  j["version"] = 1;
  auto& folds = j["folds"] = ojson::array();
  for (const auto& f : r.folds) {
    ojson fj;
    fj["test_wells"] = f.test_wells;
    for (AccidentType t : kAllAccidentTypes) {
      fj["train_windows"][std::string(to_string(t))] = {{"positive", f.train_positives[index_of(t)]},
                                                         {"negative", f.train_negatives[index_of(t)]}};
    }
    folds.push_back(fj);
  }
  auto& roc = j["roc"];
  roc["micro_auc"] = r.micro_roc.auc;
  roc["positives"] = r.roc_positives;
  roc["negatives"] = r.roc_negatives;
  for (AccidentType t : kAllAccidentTypes) {
    const double a = r.type_auc[index_of(t)];
    roc["type_auc"][std::string(to_string(t))] = std::isnan(a) ? ojson(nullptr) : ojson(a);
  }
  auto& curve = roc["curve"] = ojson::array();
  const auto& pts = r.micro_roc.points;
  const std::size_t keep = std::min<std::size_t>(pts.size(), 201);
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t i = keep > 1 ? k * (pts.size() - 1) / (keep - 1) : 0;
    curve.push_back({pts[i].fpr, pts[i].tpr});
  }
  auto& thr = j["thresholds"];
  for (AccidentType t : kAllAccidentTypes) {
    const std::size_t i = index_of(t);
    const auto& a = r.alarms.per_type[i];
    thr[std::string(to_string(t))] = {{"threshold", r.thresholds.threshold[i]},
                                      {"target_coverage", r.thresholds.target_coverage[i]},
                                      {"coverage", a.coverage()},
                                      {"events", a.events},
                                      {"covered", a.covered},
                                      {"false_alarms", a.false_alarms},
                                      {"days", a.days},
                                      {"false_alarms_per_day", a.false_alarms_per_day()}};
  }
  auto& ex = j["explanations"];
  ex["moments"] = r.explained_moments;
  ex["empty_shap"] = r.empty_shap_explanations;
  ex["max_local_accuracy_error"] = r.max_local_accuracy_error;
  auto& methods = ex["methods"] = ojson::array();
  for (const auto& m : r.methods) methods.push_back({{"method", m.name}, {"strict", pr_json(m.strict)}, {"extended", pr_json(m.extended)}});
  auto& c = j["consistency"];
  c["moments"] = r.consistency.moments;
  c["sequences"] = r.consistency.sequences;
  c["shap_score"] = r.consistency.shap.score;
  auto& chans = c["shap_channels"] = ojson::object();
  for (Mnemonic m : kAllChannels) {
    const auto& ch = r.consistency.shap.channels[index_of(m)];
    if (!ch.present) continue;
    chans[std::string(to_string(m))] = {
        {"pairs", ch.pairs}, {"drift", ch.drift}, {"null_drift", ch.null_drift}, {"ratio", ch.ratio}};
  }
  c["random_scores"] = r.consistency.random_scores;
  c["p_value"] = r.consistency.p_value;
  return j.dump(2) + "\n";
}

namespace {

ojson nullable(double v) { return std::isnan(v) ? ojson(nullptr) : ojson(v); }

}  // namespace

std::string cases_json(const std::vector<CaseFigure>& cases) {
  ojson j;
  j["format"] = "bofx.cases";
  j["version"] = 1;
  auto& arr = j["cases"] = ojson::array();
  for (const auto& c : cases) {
    ojson cj;
    cj["well_id"] = c.well_id;
    cj["type"] = std::string(to_string(c.type));
    cj["time"] = c.time;
    cj["segment_start_time"] = c.segment_start_time;
    cj["step"] = c.step;
    cj["threshold"] = c.threshold;
    cj["region"] = {c.region_start, c.region_end};
    for (Mnemonic m : kAllChannels) cj["values"][std::string(to_string(m))] = c.values[index_of(m)];
    auto& p = cj["probability"] = ojson::array();
    for (double v : c.probability) p.push_back(nullable(v));
    auto& hl = cj["highlights"] = ojson::object();
    for (const auto& ch : c.highlights.channels) {
      auto& a = hl[std::string(to_string(ch.channel))] = ojson::array();
      for (const auto& iv : ch.intervals) a.push_back({iv.begin, iv.end});
    }
    auto& refs = cj["references"] = ojson::object();
    for (Mnemonic m : kAllChannels) {
      const auto& rr = c.references[index_of(m)];
      if (rr.empty()) continue;
      auto& a = refs[std::string(to_string(m))] = ojson::array();
      for (const auto& iv : rr) a.push_back({iv.begin, iv.end});
    }
    arr.push_back(std::move(cj));
  }
  return j.dump() + "\n";
}

std::vector<CaseFigure> cases_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("cases file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "bofx.cases" || j.value("version", -1) != 1)
    fail(ErrorCode::kFormat, "not a bofx cases file (version 1)");
  std::vector<CaseFigure> out;
  try {
    for (const auto& cj : j.at("cases")) {
      CaseFigure c;
      c.well_id = cj.at("well_id").get<std::string>();
      const auto type = parse_accident_type(cj.at("type").get<std::string>());
      if (!type) fail(ErrorCode::kFormat, "unknown accident type in cases file");
      c.type = *type;
      c.time = cj.at("time").get<double>();
      c.segment_start_time = cj.at("segment_start_time").get<double>();
      c.step = cj.at("step").get<double>();
      c.threshold = cj.at("threshold").get<double>();
      c.region_start = cj.at("region").at(0).get<double>();
      c.region_end = cj.at("region").at(1).get<double>();
      for (Mnemonic m : kAllChannels) c.values[index_of(m)] = cj.at("values").at(std::string(to_string(m))).get<std::vector<double>>();
      for (const auto& p : cj.at("probability"))
        c.probability.push_back(p.is_null() ? std::numeric_limits<double>::quiet_NaN() : p.get<double>());
      for (const auto& [name, arr] : cj.at("highlights").items()) {
        const auto m = parse_mnemonic(name);
        if (!m) fail(ErrorCode::kFormat, "unknown channel '" + name + "' in cases file");
        ChannelHighlight ch;
        ch.channel = *m;
        for (const auto& iv : arr) ch.intervals.push_back({iv.at(0).get<std::size_t>(), iv.at(1).get<std::size_t>()});
        c.highlights.channels.push_back(std::move(ch));
      }
      std::sort(c.highlights.channels.begin(), c.highlights.channels.end(),
                [](const ChannelHighlight& a, const ChannelHighlight& b) { return a.channel < b.channel; });
      for (const auto& [name, arr] : cj.at("references").items()) {
        const auto m = parse_mnemonic(name);
        if (!m) fail(ErrorCode::kFormat, "unknown channel '" + name + "' in cases file");
        for (const auto& iv : arr)
          c.references[index_of(*m)].push_back({iv.at(0).get<std::size_t>(), iv.at(1).get<std::size_t>()});
      }
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("cases file: ") + e.what());
  }
  return out;
}

}  // namespace bofx

namespace bofx {

std::vector<HighlightedMoment> read_highlighted_moments(const std::string& jsonl_text) {
  std::vector<HighlightedMoment> out;
  std::stringstream in(jsonl_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      HighlightedMoment m;
      m.well_id = j.at("well_id").get<std::string>();
      m.time = j.at("time").get<double>();
      const auto type = parse_accident_type(j.at("type").get<std::string>());
      if (!type) fail(ErrorCode::kFormat, "explanations line " + std::to_string(line_no) + ": unknown type");
      m.type = *type;
      if (j.contains("taus")) {
        for (const auto& [name, starts] : j.at("taus").items()) {
          const auto ch = parse_mnemonic(name);
          if (!ch) fail(ErrorCode::kFormat, "explanations line " + std::to_string(line_no) + ": unknown channel " + name);
          m.tau_starts[index_of(*ch)] = starts.get<std::vector<std::size_t>>();
        }
      }
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kFormat, "explanations line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace {

const TelemetryLog* find_log(const Dataset& data, const std::string& well_id) {
  for (const auto& log : data.logs)
    if (log.well_id() == well_id) return &log;
  return nullptr;
}

void append_tau(std::vector<double>& out, const Codebook& book, const TelemetryLog& log, Mnemonic channel,
                std::size_t begin, std::size_t len) {
  const auto raw = log.channel(channel).subspan(begin, len);
  const auto z = book.normalize(raw);
  out.insert(out.end(), z.begin(), z.end());
}

void cap_rows(std::vector<double>& rows, std::size_t tau_len, std::size_t max_rows, std::mt19937_64& rng) {
  const std::size_t n = rows.size() / tau_len;
  if (n <= max_rows) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  std::vector<double> kept;
  kept.reserve(max_rows * tau_len);
  for (std::size_t r : idx)
    kept.insert(kept.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * tau_len),
                rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * tau_len));
  rows = std::move(kept);
}

}  // namespace

EmbeddingInputs embedding_inputs(const Dataset& data, const CodebookSet& codebooks,
                                 std::span<const HighlightedMoment> moments, AccidentType type, Mnemonic channel,
                                 const ExperimentConfig& config, std::size_t max_group, std::uint64_t seed) {
  const std::size_t len = config.tau.tau_len;
  const Codebook& book = codebooks[channel];
  EmbeddingInputs in;
  for (const auto& m : moments) {
    if (m.type != type) continue;
    const TelemetryLog* log = find_log(data, m.well_id);
    if (!log) fail(ErrorCode::kMissingArtifact, "explanation refers to unknown well '" + m.well_id + "'");
    const Segment seg = window(*log, m.time);
    for (std::size_t start : m.tau_starts[index_of(channel)]) {
      if (start + len > kSegmentSamples) fail(ErrorCode::kFormat, "highlighted tau start out of range");
      append_tau(in.highlighted, book, *log, channel, seg.begin_index() + start, len);
    }
  }
  const std::size_t stride = std::max<std::size_t>(1, minutes_to_samples(config.corpus_stride_minutes));
  for (const auto& log : data.logs)
    for (std::size_t end = kSegmentSamples; end <= log.size(); end += stride)
      for (std::size_t s = end - kSegmentSamples; s + len <= end; s += config.tau.stride)
        append_tau(in.codebook, book, log, channel, s, len);
  for (const auto& ev : data.events) {
    if (ev.type != type) continue;
    const TelemetryLog* log = find_log(data, ev.well_id);
    if (!log) continue;
    for (const auto& r : data.references) {
      if (r.well_id != ev.well_id || r.event_time != ev.event_time || r.channel != channel) continue;
      const std::size_t first = log->index_at_or_before(r.start);
      for (std::size_t s = first; s + len <= log->size(); s += config.tau.stride) {
        if (log->time_at(s) < r.start) continue;
        if (log->time_at(s + len) > r.end) break;
        append_tau(in.expert, book, *log, channel, s, len);
      }
    }
  }
  std::mt19937_64 rng(seed);
  cap_rows(in.highlighted, len, max_group, rng);
  cap_rows(in.expert, len, max_group, rng);
  return in;
}

}  // namespace bofx

namespace bofx {

CaseFigure make_case(const Dataset& data, const TelemetryLog& log, std::size_t end_index, AccidentType type,
                     const CodebookSet& codebooks, const GbmModel& model, const Explanation& explanation,
                     double threshold) {
  const Segment seg(log, end_index);
  CaseFigure c;
  c.well_id = log.well_id();
  c.type = type;
  c.time = log.time_at(end_index);
  c.segment_start_time = log.time_at(seg.begin_index());
  c.step = log.step();
  for (Mnemonic m : kAllChannels) {
    const auto v = seg.channel(m);
    c.values[index_of(m)].assign(v.begin(), v.end());
  }
  c.probability.assign(kSegmentSamples, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> ends;
  for (std::size_t j = 0; j < kSegmentSamples; ++j)
    if (seg.begin_index() + j >= kSegmentSamples) ends.push_back(seg.begin_index() + j);
  const LabelTrack track(log, codebooks, ends);
  for (std::size_t e : ends)
    c.probability[e - seg.begin_index()] = model.predict_proba(track.featurize(e).features.counts);
  c.threshold = threshold;
  for (const auto& ev : data.events) {
    if (ev.well_id != log.well_id() || ev.type != type || !ev.region_contains(c.time)) continue;
    c.region_start = ev.region_start;
    c.region_end = ev.region_end;
    c.references = reference_ranges(references_for(ev, data.references), c.segment_start_time, c.step);
    break;
  }
  c.highlights = explanation.highlights;
  return c;
}

}  // namespace bofx
