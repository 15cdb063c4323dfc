#include "settings.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "bofx/error.h"

namespace bofx::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

class Reader {
 public:
  Reader(const json* section, std::string name) : section_(section), name_(std::move(name)) {}

  template <class T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    if (!section_ || !section_->contains(key)) return;
    const json& v = section_->at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) fail(ErrorCode::kConfig, where(key) + " must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(ErrorCode::kConfig, where(key) + " must be true or false");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(ErrorCode::kConfig, where(key) + " must be a number");
    }
    try {
      value = v.get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kConfig, where(key) + " has the wrong type");
    }
  }

  template <class T>
  void operator()(const char* key, std::array<T, kNumAccidentTypes>& values) {
    seen_.insert(key);
    if (!section_ || !section_->contains(key)) return;
    const json& v = section_->at(key);
    if (!v.is_object()) fail(ErrorCode::kConfig, where(key) + " must map accident types to values");
    Reader inner(&v, name_ + "." + key);
    for (AccidentType t : kAllAccidentTypes) inner(std::string(to_string(t)).c_str(), values[index_of(t)]);
    inner.finish();
  }

  void finish() const {
    if (!section_) return;
    if (!section_->is_object()) fail(ErrorCode::kConfig, "config section '" + name_ + "' must be an object");
    for (const auto& [key, _] : section_->items())
      if (!seen_.count(key)) fail(ErrorCode::kConfig, "unknown config key '" + name_ + "." + key + "'");
  }

 private:
  std::string where(const char* key) const { return "config key '" + name_ + "." + key + "'"; }

  const json* section_;
  std::string name_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(ojson& out) : out_(out) {}

  template <class T>
  void operator()(const char* key, T& value) {
    out_[key] = value;
  }

  template <class T>
  void operator()(const char* key, std::array<T, kNumAccidentTypes>& values) {
    ojson m = ojson::object();
    for (AccidentType t : kAllAccidentTypes) m[std::string(to_string(t))] = values[index_of(t)];
    out_[key] = m;
  }

 private:
  ojson& out_;
};

template <class V>
void visit_gen(V& v, GenConfig& g) {
  v("seed", g.seed);
  v("wells", g.wells);
  v("hours", g.hours);
  v("schedule", g.schedule);
  v("noise_scale", g.noise_scale);
  v("lead_min_minutes", g.lead_min_minutes);
  v("lead_max_minutes", g.lead_max_minutes);
  v("region_tail_minutes", g.region_tail_minutes);
  v("excursions", g.excursions);
  v("start_time", g.start_time);
}

template <class V>
void visit_windows(V& v, ExperimentConfig& e) {
  v("tau_len", e.tau.tau_len);
  v("tau_stride", e.tau.stride);
  v("corpus_stride_minutes", e.corpus_stride_minutes);
  v("positive_offset_minutes", e.positive_offset_minutes);
  v("positive_stride_minutes", e.positive_stride_minutes);
  v("negative_stride_minutes", e.negative_stride_minutes);
  v("roc_stride_minutes", e.roc_stride_minutes);
}

template <class V>
void visit_codebooks(V& v, CodebookTrainConfig& c) {
  v("k", c.k);
  v("max_iterations", c.max_iterations);
  v("max_points_per_channel", c.max_points_per_channel);
  v("seed", c.seed);
}

template <class V>
void visit_gbm(V& v, TrainConfig& c) {
  v("estimators", c.estimators);
  v("learning_rate", c.learning_rate);
  v("max_depth", c.max_depth);
  v("subsample", c.subsample);
  v("colsample_bytree", c.colsample_bytree);
  v("positive_weight", c.positive_weight);
  v("lambda", c.lambda);
  v("min_child_weight", c.min_child_weight);
  v("seed", c.seed);
}

template <class V>
void visit_fcmh(V& v, ExperimentConfig& e) {
  v("enabled", e.run_fcmh);
  v("embed_dim", e.fcmh.embed_dim);
  v("heads", e.fcmh.heads);
  v("hidden", e.fcmh.hidden);
  v("dropout", e.fcmh.dropout);
  v("input_scale", e.fcmh.input_scale);
  v("learning_rate", e.fcmh_train.learning_rate);
  v("epochs", e.fcmh_train.epochs);
  v("batch_size", e.fcmh_train.batch_size);
  v("positive_weight", e.fcmh_train.positive_weight);
  v("seed", e.fcmh_train.seed);
  v("max_rows", e.fcmh_max_rows);
}

template <class V>
void visit_experiment(V& v, ExperimentConfig& e) {
  v("folds", e.folds);
  v("seed", e.seed);
  v("coverage_targets", e.coverage_targets);
  v("shap_m", e.shap_m);
  v("fcmh_m", e.fcmh_m);
  v("random_m", e.random_m);
  v("random_draws", e.random_draws);
  v("consistency_null_reps", e.consistency_null_reps);
  v("consistency_random_runs", e.consistency_random_runs);
}

template <class V>
void visit_tsne(V& v, Settings& s) {
  v("perplexity", s.tsne.perplexity);
  v("iterations", s.tsne.iterations);
  v("exaggeration", s.tsne.exaggeration);
  v("exaggeration_iterations", s.tsne.exaggeration_iterations);
  v("learning_rate", s.tsne.learning_rate);
  v("momentum", s.tsne.momentum);
  v("final_momentum", s.tsne.final_momentum);
  v("momentum_switch", s.tsne.momentum_switch);
  v("seed", s.tsne.seed);
  v("max_codebook", s.tsne_max_codebook);
  v("max_group", s.tsne_max_group);
}

template <class Fn>
void for_each_section(Settings& s, Fn&& fn) {
  fn("gen", [&](auto& v) { visit_gen(v, s.gen); });
  fn("windows", [&](auto& v) { visit_windows(v, s.experiment); });
  fn("codebooks", [&](auto& v) { visit_codebooks(v, s.experiment.codebooks); });
  fn("gbm", [&](auto& v) { visit_gbm(v, s.experiment.gbm); });
  fn("fcmh", [&](auto& v) { visit_fcmh(v, s.experiment); });
  fn("experiment", [&](auto& v) { visit_experiment(v, s.experiment); });
  fn("tsne", [&](auto& v) { visit_tsne(v, s); });
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Settings settings_from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, origin + ": config must be a JSON object");
  Settings s;
  std::set<std::string> known = {"limits"};
  for_each_section(s, [&](const char* name, auto&& visit) {
    known.insert(name);
    const json* section = doc.contains(name) ? &doc.at(name) : nullptr;
    Reader r(section, name);
    if (section && section->is_object()) visit(r);
    r.finish();
  });
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) fail(ErrorCode::kConfig, origin + ": unknown config section '" + key + "'");
  if (doc.contains("limits")) {
    if (!doc.at("limits").is_string()) fail(ErrorCode::kConfig, origin + ": 'limits' must be a file path");
    s.limits_path = doc.at("limits").get<std::string>();
    s.limits = ValidityLimits::load(s.limits_path);
  }
  s.validate();
  return s;
}

Settings load_settings(const std::string& path) {
  if (path.empty()) return Settings{};
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingArtifact, "config file '" + path + "' not found");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return settings_from_json(doc, path);
}

void apply_override(Settings& settings, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    fail(ErrorCode::kUsage, "--set expects section.key=value, got '" + assignment + "'");
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json doc = json::parse(settings.effective().dump());
  if (section == "limits" || !doc.contains(section))
    fail(ErrorCode::kConfig, "unknown config section '" + section + "'");
  doc[section][key] = value;
  settings = settings_from_json(doc, "--set " + assignment);
}

ojson Settings::effective() const {
  Settings copy = *this;
  ojson out = ojson::object();
  for_each_section(copy, [&](const char* name, auto&& visit) {
    ojson section = ojson::object();
    Writer w(section);
    visit(w);
    out[name] = section;
  });
  if (!limits_path.empty()) out["limits"] = limits_path;
  return out;
}

std::string Settings::hash() const {
  std::string canonical = json::parse(effective().dump()).dump();  // sorted keys
  for (Mnemonic m : kAllChannels)
    canonical += "\n" + std::string(to_string(m)) + " " + format_double(limits[m].min) + " " +
                 format_double(limits[m].max);
  return fnv1a_hex(canonical);
}

void Settings::validate() const {
  gen.validate();
  experiment.validate();
  experiment.gbm.validate();
  experiment.fcmh.validate();
  experiment.fcmh_train.validate();
  experiment.tau.validate();
  tsne.validate();
  if (tsne_max_group == 0) fail(ErrorCode::kConfig, "tsne.max_group must be positive");
}

}  // namespace bofx::cli
