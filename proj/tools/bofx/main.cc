#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bofx/error.h"
#include "commands.h"
#include "settings.h"

namespace {

using namespace bofx;
using namespace bofx::cli;

// 0 ok, 1 usage or configuration, 2 data or artifacts, 3 internal.
int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kConfig: return 1;
    case ErrorCode::kSchema:
    case ErrorCode::kFormat:
    case ErrorCode::kGap:
    case ErrorCode::kWindow:
    case ErrorCode::kTraining:
    case ErrorCode::kModelIntegrity:
    case ErrorCode::kCapacity:
    case ErrorCode::kEvaluation:
    case ErrorCode::kEmbedding:
    case ErrorCode::kMissingArtifact:
    case ErrorCode::kIo: return 2;
  }
  return 3;
}

template <class T>
void push_set(std::vector<std::string>& sets, const char* key, const std::optional<T>& v) {
  if (v) sets.push_back(std::string(key) + "=" + nlohmann::json(*v).dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bofx: interpretable drilling-accident alarms from bag-of-features telemetry models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", BOFX_VERSION);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "JSON config file with per-command sections");
  app.add_option("--set", sets, "Override a config value, e.g. gbm.estimators=100");
  app.add_flag("-q,--quiet", g_quiet, "No progress messages");

  Paths p;
  std::vector<std::string> types;
  ExplainTarget target;
  TsneTarget tsne_target;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> wells, epochs;
  std::optional<double> hours, noise_scale, perplexity;
  bool no_fcmh = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--out", p.out, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--wells", wells, "Number of wells");
  gen->add_option("--hours", hours, "Hours per well");
  gen->add_option("--noise-scale", noise_scale, "Multiplier on channel noise");

  auto* cb = app.add_subcommand("train-codebooks", "Fit per-channel codebooks");
  cb->add_option("--data", p.data, "Dataset directory")->required();
  cb->add_option("--out", p.out, "Codebook artifact (JSON)")->required();
  cb->add_option("--seed", seed, "Codebook seed");

  auto* feat = app.add_subcommand("featurize", "Bag-of-features table of the training windows");
  feat->add_option("--data", p.data, "Dataset directory")->required();
  feat->add_option("--codebooks", p.codebooks, "Codebook artifact")->required();
  feat->add_option("--out", p.out, "Feature table (CSV)")->required();

  auto* tg = app.add_subcommand("train-gbm", "Train one boosted-tree classifier per accident type");
  tg->add_option("--features", p.features, "Feature table from featurize")->required();
  tg->add_option("--out-dir", p.out_dir, "Model directory")->required();
  tg->add_option("--type", types, "Accident types (default: all)");
  tg->add_option("--seed", seed, "Training seed");

  auto* tf = app.add_subcommand("train-fcmh", "Train one attention classifier per accident type");
  tf->add_option("--features", p.features, "Feature table from featurize")->required();
  tf->add_option("--out-dir", p.out_dir, "Model directory")->required();
  tf->add_option("--type", types, "Accident types (default: all)");
  tf->add_option("--seed", seed, "Training seed");
  tf->add_option("--epochs", epochs, "Training epochs");

  auto* pr = app.add_subcommand("predict", "Alarm probabilities for every well");
  pr->add_option("--data", p.data, "Dataset directory")->required();
  pr->add_option("--codebooks", p.codebooks, "Codebook artifact")->required();
  pr->add_option("--models", p.models, "Model directory")->required();
  pr->add_option("--out", p.out, "Probability table (CSV)")->required();

  auto* ex = app.add_subcommand("explain", "Explain one alarm moment");
  ex->add_option("--data", p.data, "Dataset directory")->required();
  ex->add_option("--codebooks", p.codebooks, "Codebook artifact")->required();
  ex->add_option("--models", p.models, "Model directory")->required();
  ex->add_option("--well", target.well, "Well id")->required();
  ex->add_option("--time", target.time, "Window end (ISO-8601 UTC or epoch seconds)")->required();
  ex->add_option("--type", target.type, "Accident type")->capture_default_str();
  ex->add_option("--method", target.method, "shap or fcmh")->capture_default_str();
  ex->add_option("--m", target.m_percent, "Selection threshold in percent of the maximum importance");
  ex->add_option("--threshold", target.threshold, "Alarm threshold drawn on the case plot")->capture_default_str();
  ex->add_option("--out", p.out, "Explanation record (JSON); stdout when omitted");
  ex->add_option("--case-out", target.case_out, "Case figure data for report");

  auto* ev = app.add_subcommand("evaluate", "Cross-validated evaluation of the whole pipeline");
  ev->add_option("--data", p.data, "Dataset directory")->required();
  ev->add_option("--out-dir", p.out_dir, "Output directory")->required();
  ev->add_option("--seed", seed, "Experiment seed");
  ev->add_option("--fcmh-epochs", epochs, "FCMH training epochs");
  ev->add_flag("--no-fcmh", no_fcmh, "Skip the attention explainer");

  auto* ts = app.add_subcommand("tsne", "Embed highlighted, codebook and expert tau-segments");
  ts->add_option("--data", p.data, "Dataset directory")->required();
  ts->add_option("--codebooks", p.codebooks, "Codebook artifact")->required();
  ts->add_option("--explanations", p.explanations, "explanations.jsonl from evaluate")->required();
  ts->add_option("--type", tsne_target.type, "Accident type")->capture_default_str();
  ts->add_option("--channels", tsne_target.channels, "Channels (default: the type's signature channels)")
      ->delimiter(',');
  ts->add_option("--perplexity", perplexity, "t-SNE perplexity");
  ts->add_option("--seed", seed, "t-SNE seed");
  ts->add_option("--out", p.out, "Embedding file (JSON)")->required();

  auto* rp = app.add_subcommand("report", "Render HTML report with SVG figures");
  rp->add_option("--metrics", p.metrics, "metrics.json from evaluate")->required();
  rp->add_option("--cases", p.cases, "cases.json from evaluate or explain --case-out");
  rp->add_option("--tsne", p.tsne, "Embedding file from tsne");
  rp->add_option("--out-dir", p.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    const std::string seed_key = cmd == "gen"               ? "gen.seed"
                                 : cmd == "train-codebooks" ? "codebooks.seed"
                                 : cmd == "train-gbm"       ? "gbm.seed"
                                 : cmd == "train-fcmh"      ? "fcmh.seed"
                                 : cmd == "tsne"            ? "tsne.seed"
                                                            : "experiment.seed";
    push_set(sets, seed_key.c_str(), seed);
    push_set(sets, "gen.wells", wells);
    push_set(sets, "gen.hours", hours);
    push_set(sets, "gen.noise_scale", noise_scale);
    push_set(sets, "fcmh.epochs", epochs);
    push_set(sets, "tsne.perplexity", perplexity);
    if (no_fcmh) sets.push_back("fcmh.enabled=false");

    Settings s = load_settings(config_path);
    for (const auto& a : sets) apply_override(s, a);

    if (cmd == "gen") cmd_gen(s, p);
    else if (cmd == "train-codebooks") cmd_train_codebooks(s, p);
    else if (cmd == "featurize") cmd_featurize(s, p);
    else if (cmd == "train-gbm") cmd_train_gbm(s, p, types);
    else if (cmd == "train-fcmh") cmd_train_fcmh(s, p, types);
    else if (cmd == "predict") cmd_predict(s, p);
    else if (cmd == "explain") cmd_explain(s, p, target);
    else if (cmd == "evaluate") cmd_evaluate(s, p);
    else if (cmd == "tsne") cmd_tsne(s, p, tsne_target);
    else if (cmd == "report") cmd_report(s, p);
    return 0;
  } catch (const Error& e) {
    std::cerr << "bofx: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "bofx: internal error: " << e.what() << '\n';
    return 3;
  }
}
