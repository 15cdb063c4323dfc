#include "commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bofx/error.h"
#include "bofx/report.h"
#include "manifest.h"

namespace bofx::cli {

namespace fs = std::filesystem;

bool g_quiet = false;

namespace {

void say(const std::string& msg) {
  if (!g_quiet) std::cerr << "bofx: " << msg << '\n';
}

std::string slurp(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingArtifact, what + " '" + path + "' not found");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorCode::kUsage, std::string(flag) + " is required");
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

Dataset load_data(const Settings& s, const std::string& dir) {
  need(dir, "--data");
  if (!fs::is_directory(dir)) fail(ErrorCode::kMissingArtifact, "data directory '" + dir + "' not found");
  return read_dataset(dir, s.limits);
}

CodebookSet load_codebooks(const std::string& path) {
  need(path, "--codebooks");
  if (!fs::exists(path)) fail(ErrorCode::kMissingArtifact, "codebook artifact '" + path + "' not found (run train-codebooks)");
  return CodebookSet::load(path);
}

std::string gbm_path(const std::string& dir, AccidentType t) {
  return in_dir(dir, "gbm-" + std::string(to_string(t)) + ".json");
}
std::string fcmh_path(const std::string& dir, AccidentType t) {
  return in_dir(dir, "fcmh-" + std::string(to_string(t)) + ".json");
}

GbmModel load_gbm(const std::string& dir, AccidentType t) {
  const std::string path = gbm_path(dir, t);
  if (!fs::exists(path)) fail(ErrorCode::kMissingArtifact, "GBM model artifact '" + path + "' not found (run train-gbm)");
  return GbmModel::load(path);
}

FcmhModel load_fcmh(const std::string& dir, AccidentType t) {
  const std::string path = fcmh_path(dir, t);
  if (!fs::exists(path))
    fail(ErrorCode::kMissingArtifact, "FCMH model artifact '" + path + "' not found (run train-fcmh)");
  return FcmhModel::load(path);
}

AccidentType type_arg(const std::string& name) {
  const auto t = parse_accident_type(name);
  if (!t) fail(ErrorCode::kUsage, "unknown accident type '" + name + "' (Stuck, Mudloss, KickFlow, Washout)");
  return *t;
}

std::vector<AccidentType> types_arg(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllAccidentTypes.begin(), kAllAccidentTypes.end()};
  std::vector<AccidentType> out;
  for (const auto& n : names) out.push_back(type_arg(n));
  return out;
}

const TelemetryLog& find_well(const Dataset& data, const std::string& id) {
  for (const auto& log : data.logs)
    if (log.well_id() == id) return log;
  fail(ErrorCode::kMissingArtifact, "well '" + id + "' not found in the dataset");
}

void check_codebooks(const CodebookSet& cb, const Settings& s) {
  if (!(cb.tau() == s.experiment.tau))
    fail(ErrorCode::kModelIntegrity, "codebooks were trained with a different tau configuration");
}

}  // namespace

void cmd_gen(const Settings& s, const Paths& p) {
  need(p.out, "--out");
  Manifest m("gen", s);
  m.seed("gen", s.gen.seed);
  say("generating " + std::to_string(s.gen.wells) + " wells");
  const SyntheticData data = generate(s.gen);
  fs::create_directories(p.out);
  write_dataset(data, p.out);
  m.output(p.out);
  m.write(in_dir(p.out, "manifest-gen.json"));
  say("wrote " + p.out);
}

void cmd_train_codebooks(const Settings& s, const Paths& p) {
  need(p.out, "--out");
  const Dataset data = load_data(s, p.data);
  Manifest m("train-codebooks", s);
  m.seed("codebooks", s.experiment.codebooks.seed);
  m.input(p.data);
  std::vector<std::size_t> ids(data.logs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  say("fitting codebooks on " + std::to_string(ids.size()) + " wells");
  const CodebookSet cb = fit_codebooks(data.logs, ids, s.experiment, s.experiment.codebooks.seed);
  spit(p.out, cb.to_json());
  m.output(p.out);
  m.write(p.out + ".manifest.json");
}

void cmd_featurize(const Settings& s, const Paths& p) {
  need(p.out, "--out");
  const Dataset data = load_data(s, p.data);
  const CodebookSet cb = load_codebooks(p.codebooks);
  check_codebooks(cb, s);
  Manifest m("featurize", s);
  m.input(p.data);
  m.input(p.codebooks);
  std::vector<std::size_t> ids(data.logs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const WindowTable table = build_window_table(data.logs, ids, data.events, cb, s.experiment);
  const fs::path parent = fs::path(p.out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_window_table(table, p.out);
  say("wrote " + std::to_string(table.rows()) + " windows to " + p.out);
  m.output(p.out);
  m.write(p.out + ".manifest.json");
}

void cmd_train_gbm(const Settings& s, const Paths& p, const std::vector<std::string>& types) {
  need(p.features, "--features");
  need(p.out_dir, "--out-dir");
  const auto ts = types_arg(types);
  const WindowTable table = read_window_table(p.features);
  Manifest m("train-gbm", s);
  m.seed("gbm", s.experiment.gbm.seed);
  m.input(p.features);
  fs::create_directories(p.out_dir);
  for (AccidentType t : ts) {
    say("training GBM for " + std::string(to_string(t)));
    const GbmModel model = train_type_gbm(table, t, s.experiment, s.experiment.gbm.seed);
    model.save(gbm_path(p.out_dir, t));
    m.output(gbm_path(p.out_dir, t));
  }
  m.write(in_dir(p.out_dir, "manifest-train-gbm.json"));
}

void cmd_train_fcmh(const Settings& s, const Paths& p, const std::vector<std::string>& types) {
  need(p.features, "--features");
  need(p.out_dir, "--out-dir");
  const auto ts = types_arg(types);
  const WindowTable table = read_window_table(p.features);
  Manifest m("train-fcmh", s);
  m.seed("fcmh", s.experiment.fcmh_train.seed);
  m.input(p.features);
  fs::create_directories(p.out_dir);
  for (AccidentType t : ts) {
    say("training FCMH for " + std::string(to_string(t)));
    const FcmhModel model = train_type_fcmh(table, t, s.experiment, s.experiment.fcmh_train.seed);
    model.save(fcmh_path(p.out_dir, t));
    m.output(fcmh_path(p.out_dir, t));
  }
  m.write(in_dir(p.out_dir, "manifest-train-fcmh.json"));
}

void cmd_predict(const Settings& s, const Paths& p) {
  need(p.out, "--out");
  need(p.models, "--models");
  const Dataset data = load_data(s, p.data);
  const CodebookSet cb = load_codebooks(p.codebooks);
  check_codebooks(cb, s);
  std::vector<GbmModel> models;
  for (AccidentType t : kAllAccidentTypes) models.push_back(load_gbm(p.models, t));
  Manifest m("predict", s);
  m.input(p.data);
  m.input(p.codebooks);
  m.input(p.models);
  const std::size_t stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s.experiment.roc_stride_minutes * 6.0)));
  std::ostringstream out;
  out << "well_id,time";
  for (AccidentType t : kAllAccidentTypes) out << ',' << to_string(t);
  out << '\n';
  for (const auto& log : data.logs) {
    if (log.size() < kSegmentSamples) continue;
    const LabelTrack track(log, cb);
    const auto series = probability_series(log, track, models);
    for (std::size_t i = 0; i < series[0].prob.size(); i += stride) {
      out << log.well_id() << ',' << format_double(series[0].time_at(i));
      for (AccidentType t : kAllAccidentTypes) out << ',' << format_double(series[index_of(t)].prob[i]);
      out << '\n';
    }
  }
  spit(p.out, out.str());
  m.output(p.out);
  m.write(p.out + ".manifest.json");
}

void cmd_explain(const Settings& s, const Paths& p, const ExplainTarget& target) {
  need(p.models, "--models");
  need(target.well, "--well");
  need(target.time, "--time");
  const AccidentType type = type_arg(target.type);
  if (target.method != "shap" && target.method != "fcmh")
    fail(ErrorCode::kUsage, "--method must be shap or fcmh");
  // Artifacts first: a missing model is reported before any data is read.
  const GbmModel gbm = load_gbm(p.models, type);
  std::optional<FcmhModel> fcmh;
  if (target.method == "fcmh") fcmh = load_fcmh(p.models, type);
  const CodebookSet cb = load_codebooks(p.codebooks);
  check_codebooks(cb, s);
  const Dataset data = load_data(s, p.data);
  Manifest m("explain", s);
  m.input(p.data);
  m.input(p.codebooks);
  m.input(p.models);

  const TelemetryLog& log = find_well(data, target.well);
  const Segment seg = window(log, parse_time(target.time));
  const std::size_t end = seg.begin_index() + kSegmentSamples;
  const Featurization feat = featurize(seg, cb);
  Explanation ex;
  if (fcmh) {
    const double m_percent = target.m_percent.value_or(s.experiment.fcmh_m);
    ex.probability = fcmh->predict_proba(feat.features.counts);
    const double pc = std::clamp(ex.probability, 1e-15, 1.0 - 1e-15);
    ex.logit = std::log(pc / (1.0 - pc));
    ex.attribution.phi = fcmh->importance(feat.features.counts);
    ex.selected = select_top(ex.attribution.phi, m_percent);
    ex.highlights = highlight(ex.selected, feat.index);
  } else {
    ExplainConfig cfg;
    cfg.m_percent = target.m_percent.value_or(s.experiment.shap_m);
    ex = explain(gbm, feat, cfg);
  }
  const ExplanationRecord rec{log.well_id(), log.time_at(end), type, log.time_at(seg.begin_index()), log.step(), ex};
  auto j = nlohmann::ordered_json::parse(to_json(rec));
  j["method"] = target.method;
  const std::string text = j.dump() + "\n";
  if (p.out.empty()) {
    std::cout << text;
  } else {
    spit(p.out, text);
    m.output(p.out);
  }
  if (!target.case_out.empty()) {
    const CaseFigure c = make_case(data, log, end, type, cb, gbm, ex, target.threshold);
    spit(target.case_out, cases_json({c}));
    m.output(target.case_out);
  }
  if (!p.out.empty()) m.write(p.out + ".manifest.json");
}

void cmd_evaluate(const Settings& s, const Paths& p) {
  need(p.out_dir, "--out-dir");
  const Dataset data = load_data(s, p.data);
  Manifest m("evaluate", s);
  m.seed("experiment", s.experiment.seed);
  m.input(p.data);
  const ExperimentResult r = run_experiment(data, s.experiment, [](const std::string& msg) { say(msg); });
  fs::create_directories(p.out_dir);
  const std::string metrics = metrics_json(r);
  spit(in_dir(p.out_dir, "metrics.json"), metrics);
  spit(in_dir(p.out_dir, "cases.json"), cases_json(r.cases));
  std::string lines;
  for (const auto& e : r.explanations) lines += e + "\n";
  spit(in_dir(p.out_dir, "explanations.jsonl"), lines);
  for (const char* f : {"metrics.json", "cases.json", "explanations.jsonl"}) m.output(in_dir(p.out_dir, f));
  m.write(in_dir(p.out_dir, "manifest-evaluate.json"));

  std::printf("micro ROC AUC %.4f (%zu positive, %zu negative windows)\n", r.micro_roc.auc, r.roc_positives,
              r.roc_negatives);
  std::printf("%-10s %10s %10s %10s %10s\n", "method", "strict P", "strict R", "ext P", "ext R");
  for (const auto& mp : r.methods)
    std::printf("%-10s %10.3f %10.3f %10.3f %10.3f\n", mp.name.c_str(), mp.strict.micro.precision(), mp.strict.micro.recall(),
                mp.extended.micro.precision(), mp.extended.micro.recall());
  std::printf("consistency: SHAP %.4f, p = %.4f over %zu moments\n", r.consistency.shap.score,
              r.consistency.p_value, r.consistency.moments);
}

void cmd_tsne(const Settings& s, const Paths& p, const TsneTarget& target) {
  need(p.out, "--out");
  need(p.explanations, "--explanations");
  const AccidentType type = type_arg(target.type);
  std::vector<Mnemonic> channels;
  for (const auto& name : target.channels) {
    const auto ch = parse_mnemonic(name);
    if (!ch) fail(ErrorCode::kUsage, "unknown channel '" + name + "'");
    channels.push_back(*ch);
  }
  if (channels.empty()) channels = signature_channels(type);
  const CodebookSet cb = load_codebooks(p.codebooks);
  check_codebooks(cb, s);
  const auto moments = read_highlighted_moments(slurp(p.explanations, "explanations file"));
  const Dataset data = load_data(s, p.data);
  Manifest m("tsne", s);
  m.seed("tsne", s.tsne.seed);
  m.input(p.data);
  m.input(p.codebooks);
  m.input(p.explanations);
  std::vector<ChannelEmbedding> out;
  for (Mnemonic ch : channels) {
    say("embedding " + std::string(to_string(ch)));
    const EmbeddingInputs in =
        embedding_inputs(data, cb, moments, type, ch, s.experiment, s.tsne_max_group, s.tsne.seed);
    out.push_back(embed_channel(ch, s.experiment.tau.tau_len, in.highlighted, in.codebook, in.expert, s.tsne,
                                s.tsne_max_codebook));
  }
  spit(p.out, embeddings_json(out));
  m.output(p.out);
  m.write(p.out + ".manifest.json");
}

void cmd_report(const Settings& s, const Paths& p) {
  need(p.metrics, "--metrics");
  need(p.out_dir, "--out-dir");
  const std::string metrics = slurp(p.metrics, "metrics file");
  std::vector<CaseFigure> cases;
  if (!p.cases.empty()) cases = cases_from_json(slurp(p.cases, "cases file"));
  std::vector<ChannelEmbedding> embeddings;
  if (!p.tsne.empty()) embeddings = embeddings_from_json(slurp(p.tsne, "t-SNE file"));
  Manifest m("report", s);
  m.input(p.metrics);
  if (!p.cases.empty()) m.input(p.cases);
  if (!p.tsne.empty()) m.input(p.tsne);
  fs::create_directories(p.out_dir);
  auto emit = [&](const std::string& name, const std::string& text) {
    spit(in_dir(p.out_dir, name), text);
    m.output(in_dir(p.out_dir, name));
  };
  emit("report.html", render_report(metrics, cases, embeddings));
  emit("roc.svg", roc_svg(metrics));
  for (const auto& c : cases) emit("case-" + c.well_id + "-" + std::string(to_string(c.type)) + ".svg", case_svg(c));
  for (const auto& e : embeddings) emit("tsne-" + std::string(to_string(e.channel)) + ".svg", tsne_svg(e));
  m.write(in_dir(p.out_dir, "manifest-report.json"));
  say("wrote " + in_dir(p.out_dir, "report.html"));
}

}  // namespace bofx::cli
