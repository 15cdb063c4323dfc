// Acceptance harness: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "bofx/evaluation.h"
#include "bofx/fcmh.h"
#include "bofx/gbm.h"
#include "bofx/pipeline.h"
#include "bofx/shap.h"
#include "bofx/synthgen.h"
#include "bofx/tsne.h"
#include "support/toy.h"

namespace {

using namespace bofx;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::size_t models = 0, inputs = 0;
  for (; models < 200; ++models) {
    const GbmModel m = testing::random_toy_model(rng);
    for (int i = 0; i < 10; ++i, ++inputs) {
      const auto x = testing::random_input(rng, m.num_features());
      const Attribution fast = tree_shap(m, x);
      const Attribution slow = brute_force_shapley(m, x, iota_n(m.num_features()));
      worst = std::max(worst, std::abs(fast.base_value - slow.base_value));
      for (std::size_t j = 0; j < m.num_features(); ++j) worst = std::max(worst, std::abs(fast.phi[j] - slow.phi[j]));
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-9 && secs < 60.0,
         fmt("%zu models x 10 inputs (%zu), max |tree_shap - brute force| = %.3g, %.2f s", models, inputs, worst, secs));
}

void criterion3() {
  bool ok = true;
  std::string detail;
  TrainConfig plain;
  plain.subsample = 1.0;
  plain.colsample_bytree = 1.0;
  plain.positive_weight = 1.0;

  {  // four-point Newton fixture
    FeatureMatrix x(1);
    for (float v : {1.f, 2.f, 3.f, 4.f}) x.add_row(std::vector<float>{v});
    const std::vector<int> y = {0, 0, 1, 1};
    TrainConfig c = plain;
    c.estimators = 1;
    c.max_depth = 1;
    c.learning_rate = 1.0;
    c.lambda = 0.0;
    c.min_child_weight = 0.0;
    const GbmModel m = train_gbm(x, y, c);
    const double expected[] = {-2, -2, 2, 2};
    double err = 0;
    for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(m.predict_logit(x.row(i)) - expected[i]));
    ok = ok && err <= 1e-12;
    detail += fmt("Newton leaves err %.2g; ", err);
  }
  {  // log-loss per round with subsample 1
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMatrix x(6);
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
      std::vector<float> r(6);
      for (auto& v : r) v = float(std::round(n(rng) * 2));
      y.push_back(r[0] + r[1] + n(rng) > 0);
      x.add_row(r);
    }
    TrainConfig c = plain;
    c.estimators = 60;
    c.max_depth = 3;
    c.positive_weight = 3.0;
    GbmTrainTrace trace;
    train_gbm(x, y, c, &trace);
    std::size_t increases = 0;
    for (std::size_t i = 1; i < trace.weighted_logloss.size(); ++i)
      increases += trace.weighted_logloss[i] > trace.weighted_logloss[i - 1] + 1e-12;
    ok = ok && increases == 0;
    detail += fmt("log-loss %.4f -> %.4f over %zu rounds, %zu increases; ", trace.weighted_logloss.front(),
                  trace.weighted_logloss.back(), trace.weighted_logloss.size() - 1, increases);
  }
  {  // separable toy
    FeatureMatrix x(1);
    std::vector<int> y;
    for (int i = 0; i <= 20; ++i) {
      x.add_row(std::vector<float>{float(i)});
      y.push_back(i > 9);
    }
    TrainConfig c = plain;
    c.estimators = 10;
    c.max_depth = 1;
    const GbmModel m = train_gbm(x, y, c);
    std::vector<double> s;
    for (std::size_t r = 0; r < x.rows(); ++r) s.push_back(m.predict_proba(x.row(r)));
    const double auc = roc_auc(s, y).auc;
    ok = ok && auc == 1.0;
    detail += fmt("separable AUC %.3f", auc);
  }
  report(3, ok, detail);
}

void criterion4(const Dataset& data) {
  bool ok = true;
  std::size_t segments = 0;
  std::string detail;
  for (std::size_t tau_len : {30u, 24u}) {
    ExperimentConfig cfg;
    cfg.tau.tau_len = tau_len;
    cfg.codebooks.max_points_per_channel = 1500;
    cfg.codebooks.max_iterations = 30;
    const std::size_t n_logs = tau_len == 30 ? data.logs.size() : 3;
    const CodebookSet books = fit_codebooks(data.logs, iota_n(n_logs), cfg, 5);
    const std::size_t expected = (kSegmentSamples - tau_len) / 6 + 1;
    for (std::size_t l = 0; l < n_logs; ++l) {
      const TelemetryLog& log = data.logs[l];
      const LabelTrack track(log, books);
      for (std::size_t end = kSegmentSamples; end <= log.size(); ++end, ++segments) {
        const Featurization f = track.featurize(end);
        for (std::size_t c = 0; c < kNumChannels; ++c) {
          double s = 0;
          for (std::size_t k = 0; k < kClustersPerChannel; ++k) s += f.features[c * kClustersPerChannel + k];
          if (s != double(expected)) ok = false;
        }
      }
    }
    detail += fmt("tau_len %zu: every channel sums to %zu; ", tau_len, expected);
  }
  report(4, ok, detail + fmt("%zu segments checked", segments));
}

void criterion5() {
  bool ok = true;
  std::string detail;
  {
    const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y = {0, 0, 1, 1};
    const double auc = roc_auc(s, y).auc;
    ok = ok && auc == 0.75;
    detail += fmt("hand AUC %.4f; ", auc);
  }
  {
    std::mt19937_64 rng(11);
    std::size_t mismatches = 0, cases = 0;
    for (; cases < 500; ++cases) {
      const std::size_t n = 2 + rng() % 49;
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = double(rng() % 10) / 10.0;
        y[i] = int(rng() % 2);
      }
      y[0] = 0;
      y[1] = 1;
      double num = 0, pairs = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (y[i] == 1 && y[j] == 0) {
            pairs += 1;
            num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
          }
      mismatches += roc_auc(s, y).auc != num / pairs;
    }
    ok = ok && mismatches == 0;
    detail += fmt("%zu/%zu brute-force AUC mismatches; ", mismatches, cases);
  }
  {
    ExplainedMoment m;
    m.tau = {60, 60};
    for (auto& h : m.highlighted) h.assign(6, false);
    m.highlighted[index_of(Mnemonic::HKLA)][3] = m.highlighted[index_of(Mnemonic::HKLA)][5] = true;
    m.references[index_of(Mnemonic::HKLA)] = {{0, 240}};
    const PrResult r = explanation_pr(std::vector<ExplainedMoment>{m}, PrMode::kStrict);
    ok = ok && r.micro.precision() == 0.5 && r.micro.recall() == 0.25;
    detail += fmt("PR fixture precision %.2f recall %.2f", r.micro.precision(), r.micro.recall());
  }
  report(5, ok, detail);
}

void criterion7() {
  const std::vector<double> v = {10, 3, 1.9};
  const bool fixtures = select_top(v, 20.0) == std::vector<std::size_t>{0, 1} &&
                        select_top(v, 100.0) == std::vector<std::size_t>{0};
  std::mt19937_64 rng(7);
  std::size_t violations = 0;
  for (int k = 0; k < 500; ++k) {
    std::vector<double> imp(1 + rng() % 40);
    for (double& x : imp) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    const double a = std::uniform_real_distribution<double>(1, 100)(rng);
    const double b = std::uniform_real_distribution<double>(a, 100)(rng);
    const auto sa = select_top(imp, a), sb = select_top(imp, b);
    violations += !std::includes(sa.begin(), sa.end(), sb.begin(), sb.end());
  }
  report(7, fixtures && violations == 0,
         fmt("fixtures %s; %zu monotonicity violations in 500 draws", fixtures ? "exact" : "wrong", violations));
}

void criterion8(const ExperimentResult& result) {
  FcmhConfig cfg;
  cfg.num_features = 6;
  cfg.embed_dim = 2;
  cfg.heads = 2;
  cfg.hidden = 4;
  cfg.dropout = 0.0;
  cfg.input_scale = 1.0;
  FcmhModel model(cfg, 5);
  std::mt19937_64 rng(2);
  FeatureMatrix x(6);
  std::vector<int> y;
  for (int i = 0; i < 5; ++i) {
    std::vector<float> r(6);
    for (auto& v : r) v = float(rng() % 4);
    y.push_back(r[0] > r[1]);
    x.add_row(r);
  }
  const auto rows = iota_n(5);
  FcmhParams grad = FcmhParams::zeros(cfg);
  fcmh_loss(model, x, rows, y, 2.0, &grad);
  std::vector<std::vector<double>*> analytic, weights;
  grad.for_each([&](const char*, std::vector<double>& v) { analytic.push_back(&v); });
  model.mutable_params().for_each([&](const char*, std::vector<double>& v) { weights.push_back(&v); });
  double worst = 0;
  const double h = 1e-5;
  for (std::size_t p = 0; p < weights.size(); ++p)
    for (std::size_t i = 0; i < weights[p]->size(); ++i) {
      double& w = (*weights[p])[i];
      const double keep = w;
      w = keep + h;
      const double up = fcmh_loss(model, x, rows, y, 2.0, nullptr);
      w = keep - h;
      const double down = fcmh_loss(model, x, rows, y, 2.0, nullptr);
      w = keep;
      const double fd = (up - down) / (2 * h);
      const double a = (*analytic[p])[i];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }

  FcmhModel full(FcmhConfig{}, 3);
  double sum_err = 0;
  for (int k = 0; k < 5; ++k) {
    std::vector<float> v(kFeatureWidth, 0.0f);
    for (int j = 0; j < 672; ++j) v[rng() % kFeatureWidth] += 1.0f;
    const auto imp = full.importance(v);
    sum_err = std::max(sum_err, std::abs(std::accumulate(imp.begin(), imp.end(), 0.0) - 1.0));
  }

  std::printf("  explanation precision / recall (micro):\n  %-9s %-22s %-22s\n", "method", "strict P / R",
              "extended P / R");
  bool have_fcmh = false;
  for (const auto& m : result.methods) {
    have_fcmh = have_fcmh || m.name == "FCMH";
    std::printf("  %-9s %.3f / %.3f          %.3f / %.3f\n", m.name.c_str(), m.strict.micro.precision(),
                m.strict.micro.recall(), m.extended.micro.precision(), m.extended.micro.recall());
  }
  report(8, worst <= 1e-4 && sum_err <= 1e-6 && have_fcmh,
         fmt("gradient max rel err %.2g; importance sum err %.2g; FCMH row %s", worst, sum_err,
             have_fcmh ? "reported" : "missing"));
}

void criterion9(const ExperimentResult& result) {
  const std::size_t n = 12;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<double> pts(n * 3), y(n * 2);
  for (double& v : pts) v = g(rng);
  for (double& v : y) v = g(rng);
  const Affinities a = tsne_affinities(pairwise_distances(pts, 3), 3.0);
  const auto grad = tsne_gradient(a.p, y, n);
  double worst = 0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double keep = y[k];
    y[k] = keep + h;
    const double up = tsne_kl(a.p, y, n);
    y[k] = keep - h;
    const double down = tsne_kl(a.p, y, n);
    y[k] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1e-8}));
  }
  double perp_err = 0;
  for (double p : a.perplexity) perp_err = std::max(perp_err, std::abs(p - 3.0));

  const auto& c = result.consistency;
  const double mean_random =
      c.random_scores.empty() ? 0.0
                              : std::accumulate(c.random_scores.begin(), c.random_scores.end(), 0.0) /
                                    double(c.random_scores.size());
  const bool consistent = c.shap.present_channels > 0 && c.shap.score < mean_random && c.p_value < 0.05;
  report(9, worst <= 1e-4 && perp_err <= 1e-4 && consistent,
         fmt("KL gradient max rel err %.2g; perplexity err %.2g; consistency SHAP %.3f vs random mean %.3f over %zu "
             "draws, p = %.4f (%zu stuck moments)",
             worst, perp_err, c.shap.score, mean_random, c.random_scores.size(), c.p_value, c.moments));
}

const MethodPr* method(const ExperimentResult& r, const std::string& name) {
  for (const auto& m : r.methods)
    if (m.name == name) return &m;
  return nullptr;
}

void criterion6(const ExperimentResult& r, double secs) {
  const MethodPr* shap = method(r, "SHAP");
  const MethodPr* rnd = method(r, "Random");
  const MethodPr* uni = method(r, "Baseline");
  if (!shap || !rnd || !uni) {
    report(6, false, "explainer results missing");
    return;
  }
  const double auc = r.micro_roc.auc;
  const double ps = shap->strict.micro.precision(), pr = rnd->strict.micro.precision();
  const double rs = shap->strict.micro.recall(), rr = rnd->strict.micro.recall();
  const double ru = uni->strict.micro.recall();
  const bool auc_ok = auc >= 0.9, prec_ok = ps >= 2.0 * pr, recall_ok = std::abs(rs - rr) <= 0.10,
             uni_ok = ru == 1.0, time_ok = secs < 15 * 60;
  std::printf("  micro AUC %.4f [%s]; SHAP precision %.3f vs 2 x random %.3f [%s]; SHAP recall %.3f vs random %.3f "
              "(|diff| %.3f) [%s]; uniform recall %.6f [%s]; run %.0f s [%s]\n",
              auc, auc_ok ? "ok" : "no", ps, 2 * pr, prec_ok ? "ok" : "no", rs, rr, std::abs(rs - rr),
              recall_ok ? "ok" : "no", ru, uni_ok ? "ok" : "no", secs, time_ok ? "ok" : "no");
  bool stuck_signature = false;
  for (const auto& c : r.cases)
    if (c.type == AccidentType::Stuck)
      stuck_signature = c.highlights.find(Mnemonic::HKLA) || c.highlights.find(Mnemonic::BPOS);
  std::printf("  stuck case highlights HKLA or BPOS: %s\n", stuck_signature ? "yes" : "no");
  report(6, auc_ok && prec_ok && recall_ok && uni_ok && time_ok,
         fmt("AUC %.3f, precision ratio %.1f, recall gap %.3f, uniform recall %.1f, %.0f s", auc,
             pr > 0 ? ps / pr : 0.0, std::abs(rs - rr), ru, secs));
}

}  // namespace

int main() {
  criterion1();
  criterion3();
  criterion5();
  criterion7();

  const GenConfig gen;  // seeded, 20 wells, 10/4/3/3 accidents
  const SyntheticData syn = generate(gen);
  const Dataset data{syn.logs, syn.events, syn.references};
  criterion4(data);

  const ExperimentConfig config;
  auto progress = [](const std::string& s) { std::fprintf(stderr, "  .. %s\n", s.c_str()); };
  auto t0 = Clock::now();
  const ExperimentResult first = run_experiment(data, config, progress);
  const double secs = seconds_since(t0);

  report(2, first.explained_moments > 0 && first.max_local_accuracy_error <= 1e-6,
         fmt("%zu explanations, max |phi0 + sum(phi) - logit| = %.3g", first.explained_moments,
             first.max_local_accuracy_error));
  criterion6(first, secs);
  criterion8(first);
  criterion9(first);

  const auto dir = std::filesystem::temp_directory_path();
  const auto path_a = dir / "bofx-acceptance-metrics-a.json", path_b = dir / "bofx-acceptance-metrics-b.json";
  std::ofstream(path_a, std::ios::binary) << metrics_json(first);
  const ExperimentResult second = run_experiment(data, config, progress);
  std::ofstream(path_b, std::ios::binary) << metrics_json(second);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(path_a), b = slurp(path_b);
  report(10, !a.empty() && a == b, fmt("metrics files %zu and %zu bytes, %s", a.size(), b.size(),
                                       a == b ? "identical" : "different"));
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);

  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
