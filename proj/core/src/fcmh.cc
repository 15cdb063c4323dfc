#include "bofx/fcmh.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bofx/error.h"
#include "json.hpp"
#include "json_io.h"

namespace bofx {

namespace {

constexpr int kFormatVersion = 1;

// Zero-count features share one token, so they are folded into a single row
// with multiplicity; keys carry log(multiplicity) in the softmax.
struct Rows {
  std::vector<std::size_t> feature;  // feature index, or npos for the zero group
  std::vector<double> x;
  std::vector<double> mult;
  std::size_t zero_count = 0;

  std::size_t size() const { return feature.size(); }
};

constexpr std::size_t kGroup = static_cast<std::size_t>(-1);

Rows make_rows(std::span<const float> x) {
  Rows r;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0f) {
      r.feature.push_back(j);
      r.x.push_back(x[j]);
      r.mult.push_back(1.0);
    }
  }
  r.zero_count = x.size() - r.feature.size();
  if (r.zero_count > 0) {
    r.feature.push_back(kGroup);
    r.x.push_back(0.0);
    r.mult.push_back(static_cast<double>(r.zero_count));
  }
  return r;
}

struct Cache {
  Rows rows;
  std::vector<double> t, q, k, v, o;  // R x d
  std::vector<double> attn;           // H x R x R
  std::vector<double> z;              // R
  std::vector<double> u;              // R x hidden: effective W1 column per row
  std::vector<double> pre1, h;        // hidden
  double z0 = 0.0;                    // pooled value of a zero-count feature
  double logits[2] = {0.0, 0.0};
  double prob[2] = {0.5, 0.5};
};

void project(const std::vector<double>& t, std::size_t rows, std::size_t d, const std::vector<double>& w,
             const std::vector<double>& b, std::vector<double>& out) {
  out.assign(rows * d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = &out[r * d];
    for (std::size_t c = 0; c < d; ++c) o[c] = b[c];
    for (std::size_t i = 0; i < d; ++i) {
      const double ti = t[r * d + i];
      if (ti == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) o[c] += ti * w[i * d + c];
    }
  }
}

void forward_pass(const FcmhConfig& cfg, const FcmhParams& p, std::span<const double> w1_colsum,
                  std::span<const float> x, std::span<const double> mask, Cache& c) {
  const std::size_t d = cfg.embed_dim;
  const std::size_t nh = cfg.heads;
  const std::size_t dh = d / nh;
  const std::size_t n = cfg.num_features;
  const std::size_t hid = cfg.hidden;
  c.rows = make_rows(x);
  const std::size_t rn = c.rows.size();

  c.t.assign(rn * d, 0.0);
  for (std::size_t r = 0; r < rn; ++r) {
    const std::size_t f = c.rows.feature[r];
    if (f == kGroup) continue;
    const double s = cfg.input_scale * c.rows.x[r];
    for (std::size_t i = 0; i < d; ++i) c.t[r * d + i] = s * p.embed[f * d + i];
  }
  project(c.t, rn, d, p.wq, p.bq, c.q);
  project(c.t, rn, d, p.wk, p.bk, c.k);
  project(c.t, rn, d, p.wv, p.bv, c.v);

  std::vector<double> log_mult(rn);
  for (std::size_t r = 0; r < rn; ++r) log_mult[r] = std::log(c.rows.mult[r]);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.attn.assign(nh * rn * rn, 0.0);
  c.o.assign(rn * d, 0.0);
  for (std::size_t hd = 0; hd < nh; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t r = 0; r < rn; ++r) {
      double* a = &c.attn[(hd * rn + r) * rn];
      const double* qr = &c.q[r * d + off];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < rn; ++u) {
        const double* ku = &c.k[u * d + off];
        double s = 0.0;
        for (std::size_t i = 0; i < dh; ++i) s += qr[i] * ku[i];
        a[u] = s * scale + log_mult[u];
        mx = std::max(mx, a[u]);
      }
      double sum = 0.0;
      for (std::size_t u = 0; u < rn; ++u) sum += (a[u] = std::exp(a[u] - mx));
      for (std::size_t u = 0; u < rn; ++u) a[u] /= sum;
      double* orow = &c.o[r * d + off];
      for (std::size_t u = 0; u < rn; ++u) {
        const double* vu = &c.v[u * d + off];
        for (std::size_t i = 0; i < dh; ++i) orow[i] += a[u] * vu[i];
      }
    }
  }

  c.z.assign(rn, 0.0);
  for (std::size_t r = 0; r < rn; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += c.t[r * d + i] + c.o[r * d + i];
    c.z[r] = s / static_cast<double>(d);
  }
  c.z0 = c.rows.zero_count > 0 ? c.z[rn - 1] : 0.0;

  c.u.assign(rn * hid, 0.0);
  for (std::size_t k = 0; k < hid; ++k) {
    double nonzero_sum = 0.0;
    for (std::size_t r = 0; r < rn; ++r) {
      const std::size_t f = c.rows.feature[r];
      if (f == kGroup) continue;
      c.u[r * hid + k] = p.w1[k * n + f];
      nonzero_sum += p.w1[k * n + f];
    }
    if (c.rows.zero_count > 0) c.u[(rn - 1) * hid + k] = w1_colsum[k] - nonzero_sum;
  }
  c.pre1.assign(hid, 0.0);
  c.h.assign(hid, 0.0);
  for (std::size_t k = 0; k < hid; ++k) {
    double s = p.b1[k];
    for (std::size_t r = 0; r < rn; ++r) s += c.u[r * hid + k] * c.z[r];
    c.pre1[k] = s;
    c.h[k] = std::max(s, 0.0) * (mask.empty() ? 1.0 : mask[k]);
  }
  for (std::size_t cls = 0; cls < 2; ++cls) {
    double s = p.b2[cls];
    for (std::size_t k = 0; k < hid; ++k) s += p.w2[cls * hid + k] * c.h[k];
    c.logits[cls] = s;
  }
  const double mx = std::max(c.logits[0], c.logits[1]);
  const double e0 = std::exp(c.logits[0] - mx);
  const double e1 = std::exp(c.logits[1] - mx);
  c.prob[0] = e0 / (e0 + e1);
  c.prob[1] = e1 / (e0 + e1);
}

std::vector<double> importance_from(const FcmhConfig& cfg, const Cache& c) {
  const std::size_t rn = c.rows.size();
  const std::size_t nh = cfg.heads;
  std::vector<double> received(rn, 0.0);
  for (std::size_t hd = 0; hd < nh; ++hd)
    for (std::size_t r = 0; r < rn; ++r) {
      const double* a = &c.attn[(hd * rn + r) * rn];
      for (std::size_t u = 0; u < rn; ++u) received[u] += c.rows.mult[r] * a[u];
    }
  const double norm = static_cast<double>(cfg.num_features) * static_cast<double>(nh);
  std::vector<double> imp(cfg.num_features, 0.0);
  for (std::size_t u = 0; u < rn; ++u)
    if (c.rows.feature[u] == kGroup) std::fill(imp.begin(), imp.end(), received[u] / norm / c.rows.mult[u]);
  for (std::size_t u = 0; u < rn; ++u)
    if (c.rows.feature[u] != kGroup) imp[c.rows.feature[u]] = received[u] / norm;
  return imp;
}

void backward_pass(const FcmhConfig& cfg, const FcmhParams& p, const Cache& c, int label, double weight,
                   std::span<const double> mask, FcmhParams& g, std::vector<double>& w1_dense) {
  const std::size_t d = cfg.embed_dim;
  const std::size_t nh = cfg.heads;
  const std::size_t dh = d / nh;
  const std::size_t n = cfg.num_features;
  const std::size_t hid = cfg.hidden;
  const std::size_t rn = c.rows.size();

  double dlogit[2];
  for (int cls = 0; cls < 2; ++cls) dlogit[cls] = weight * (c.prob[cls] - (cls == label ? 1.0 : 0.0));
  std::vector<double> dpre1(hid, 0.0);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    g.b2[cls] += dlogit[cls];
    for (std::size_t k = 0; k < hid; ++k) {
      g.w2[cls * hid + k] += dlogit[cls] * c.h[k];
      dpre1[k] += p.w2[cls * hid + k] * dlogit[cls];
    }
  }
  for (std::size_t k = 0; k < hid; ++k) {
    if (!(c.pre1[k] > 0.0)) dpre1[k] = 0.0;
    else if (!mask.empty()) dpre1[k] *= mask[k];
    g.b1[k] += dpre1[k];
    w1_dense[k] += dpre1[k] * c.z0;
  }
  std::vector<double> dz(rn, 0.0);
  for (std::size_t r = 0; r < rn; ++r) {
    const std::size_t f = c.rows.feature[r];
    double s = 0.0;
    for (std::size_t k = 0; k < hid; ++k) {
      s += c.u[r * hid + k] * dpre1[k];
      if (f != kGroup) g.w1[k * n + f] += dpre1[k] * (c.z[r] - c.z0);
    }
    dz[r] = s;
  }

  std::vector<double> dt(rn * d), dout(rn * d), dq(rn * d, 0.0), dk(rn * d, 0.0), dv(rn * d, 0.0);
  for (std::size_t r = 0; r < rn; ++r)
    for (std::size_t i = 0; i < d; ++i) dt[r * d + i] = dout[r * d + i] = dz[r] / static_cast<double>(d);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> da(rn);
  for (std::size_t hd = 0; hd < nh; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t r = 0; r < rn; ++r) {
      const double* a = &c.attn[(hd * rn + r) * rn];
      const double* dor = &dout[r * d + off];
      double dot = 0.0;
      for (std::size_t u = 0; u < rn; ++u) {
        const double* vu = &c.v[u * d + off];
        double s = 0.0;
        for (std::size_t i = 0; i < dh; ++i) {
          s += dor[i] * vu[i];
          dv[u * d + off + i] += a[u] * dor[i];
        }
        da[u] = s;
        dot += a[u] * s;
      }
      const double* qr = &c.q[r * d + off];
      for (std::size_t u = 0; u < rn; ++u) {
        const double ds = a[u] * (da[u] - dot) * scale;
        if (ds == 0.0) continue;
        const double* ku = &c.k[u * d + off];
        for (std::size_t i = 0; i < dh; ++i) {
          dq[r * d + off + i] += ds * ku[i];
          dk[u * d + off + i] += ds * qr[i];
        }
      }
    }
  }

  auto back_project = [&](const std::vector<double>& dy, const std::vector<double>& w, std::vector<double>& gw,
                          std::vector<double>& gb) {
    for (std::size_t r = 0; r < rn; ++r) {
      for (std::size_t col = 0; col < d; ++col) gb[col] += dy[r * d + col];
      for (std::size_t i = 0; i < d; ++i) {
        const double ti = c.t[r * d + i];
        double s = 0.0;
        for (std::size_t col = 0; col < d; ++col) {
          gw[i * d + col] += ti * dy[r * d + col];
          s += w[i * d + col] * dy[r * d + col];
        }
        dt[r * d + i] += s;
      }
    }
  };
  back_project(dq, p.wq, g.wq, g.bq);
  back_project(dk, p.wk, g.wk, g.bk);
  back_project(dv, p.wv, g.wv, g.bv);

  for (std::size_t r = 0; r < rn; ++r) {
    const std::size_t f = c.rows.feature[r];
    if (f == kGroup) continue;
    const double s = cfg.input_scale * c.rows.x[r];
    for (std::size_t i = 0; i < d; ++i) g.embed[f * d + i] += s * dt[r * d + i];
  }
}

std::vector<double> w1_column_sums(const FcmhConfig& cfg, const FcmhParams& p) {
  std::vector<double> s(cfg.hidden, 0.0);
  for (std::size_t k = 0; k < cfg.hidden; ++k)
    for (std::size_t j = 0; j < cfg.num_features; ++j) s[k] += p.w1[k * cfg.num_features + j];
  return s;
}

void check_width(const FcmhConfig& cfg, std::size_t width) {
  if (width != cfg.num_features)
    fail(ErrorCode::kUsage, "feature vector width " + std::to_string(width) + " != FCMH width " +
                                std::to_string(cfg.num_features));
}

}  // namespace

void FcmhConfig::validate() const {
  if (num_features == 0 || embed_dim == 0 || heads == 0 || hidden == 0)
    fail(ErrorCode::kConfig, "FCMH dimensions must be positive");
  if (embed_dim % heads != 0) fail(ErrorCode::kConfig, "FCMH embed_dim must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kConfig, "FCMH dropout must lie in [0, 1)");
  if (!(input_scale > 0.0)) fail(ErrorCode::kConfig, "FCMH input_scale must be positive");
}

void FcmhTrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) fail(ErrorCode::kConfig, "FCMH learning rate must be non-negative");
  if (batch_size == 0) fail(ErrorCode::kConfig, "FCMH batch size must be positive");
  if (!(positive_weight > 0.0)) fail(ErrorCode::kConfig, "FCMH positive weight must be positive");
}

FcmhParams FcmhParams::zeros(const FcmhConfig& cfg) {
  const std::size_t d = cfg.embed_dim;
  FcmhParams p;
  p.embed.assign(cfg.num_features * d, 0.0);
  for (auto* w : {&p.wq, &p.wk, &p.wv}) w->assign(d * d, 0.0);
  for (auto* b : {&p.bq, &p.bk, &p.bv}) b->assign(d, 0.0);
  p.w1.assign(cfg.hidden * cfg.num_features, 0.0);
  p.b1.assign(cfg.hidden, 0.0);
  p.w2.assign(2 * cfg.hidden, 0.0);
  p.b2.assign(2, 0.0);
  return p;
}

void FcmhParams::for_each(const std::function<void(const char*, std::vector<double>&)>& fn) {
  fn("embed", embed);
  fn("wq", wq);
  fn("bq", bq);
  fn("wk", wk);
  fn("bk", bk);
  fn("wv", wv);
  fn("bv", bv);
  fn("w1", w1);
  fn("b1", b1);
  fn("w2", w2);
  fn("b2", b2);
}

void FcmhParams::for_each(const std::function<void(const char*, const std::vector<double>&)>& fn) const {
  const_cast<FcmhParams*>(this)->for_each(
      [&](const char* name, std::vector<double>& v) { fn(name, v); });
}

FcmhModel::FcmhModel(FcmhConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  params_ = FcmhParams::zeros(config_);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::vector<double>& v, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
  };
  const auto d = static_cast<double>(config_.embed_dim);
  fill(params_.embed, 1.0);
  fill(params_.wq, d);
  fill(params_.bq, d);
  fill(params_.wk, d);
  fill(params_.bk, d);
  fill(params_.wv, d);
  fill(params_.bv, d);
  fill(params_.w1, static_cast<double>(config_.num_features));
  fill(params_.b1, static_cast<double>(config_.num_features));
  fill(params_.w2, static_cast<double>(config_.hidden));
  fill(params_.b2, static_cast<double>(config_.hidden));
}

FcmhModel::FcmhModel(FcmhConfig config, FcmhParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
  const FcmhParams shape = FcmhParams::zeros(config_);
  std::vector<std::size_t> expected;
  shape.for_each([&](const char*, const std::vector<double>& v) { expected.push_back(v.size()); });
  std::size_t i = 0;
  params_.for_each([&](const char* name, const std::vector<double>& v) {
    if (v.size() != expected[i++])
      fail(ErrorCode::kFormat, std::string("FCMH parameter '") + name + "' has the wrong size");
  });
}

FcmhOutput FcmhModel::forward(std::span<const float> x) const {
  check_width(config_, x.size());
  Cache c;
  const auto colsum = w1_column_sums(config_, params_);
  forward_pass(config_, params_, colsum, x, {}, c);
  FcmhOutput out;
  out.probability[0] = c.prob[0];
  out.probability[1] = c.prob[1];
  out.importance = importance_from(config_, c);
  return out;
}

std::vector<double> FcmhModel::importance(std::span<const float> x) const { return forward(x).importance; }

double FcmhModel::predict_proba(std::span<const float> x) const { return forward(x).probability[1]; }

// Field order: format, version, config, then one array per parameter group.
std::string FcmhModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "bofx.fcmh";
  j["version"] = kFormatVersion;
  j["config"] = {{"num_features", config_.num_features}, {"embed_dim", config_.embed_dim},
                 {"heads", config_.heads},               {"hidden", config_.hidden},
                 {"dropout", config_.dropout},           {"input_scale", config_.input_scale}};
  auto& params = j["params"] = nlohmann::ordered_json::object();
  params_.for_each([&](const char* name, const std::vector<double>& v) { params[name] = v; });
  return j.dump();
}

FcmhModel FcmhModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("FCMH file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "bofx.fcmh") fail(ErrorCode::kFormat, "not an FCMH model file");
  if (j.value("version", -1) != kFormatVersion) fail(ErrorCode::kFormat, "unsupported FCMH model version");
  try {
    const auto& jc = j.at("config");
    FcmhConfig cfg;
    cfg.num_features = jc.at("num_features").get<std::size_t>();
    cfg.embed_dim = jc.at("embed_dim").get<std::size_t>();
    cfg.heads = jc.at("heads").get<std::size_t>();
    cfg.hidden = jc.at("hidden").get<std::size_t>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.input_scale = jc.at("input_scale").get<double>();
    FcmhParams p;
    p.for_each([&](const char* name, std::vector<double>& v) {
      v = j.at("params").at(name).get<std::vector<double>>();
    });
    return FcmhModel(cfg, std::move(p));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("FCMH file: ") + e.what());
  }
}

void FcmhModel::save(const std::string& path) const { detail::write_text(path, to_json() + "\n"); }

FcmhModel FcmhModel::load(const std::string& path) {
  return from_json(detail::read_text(path, "FCMH model file"));
}

double fcmh_loss(const FcmhModel& model, const FeatureMatrix& x, std::span<const std::size_t> rows,
                 std::span<const int> y, double positive_weight, FcmhParams* grad,
                 std::span<const double> dropout_masks) {
  const FcmhConfig& cfg = model.config();
  check_width(cfg, x.cols());
  const auto colsum = w1_column_sums(cfg, model.params());
  double total_weight = 0.0;
  for (std::size_t r : rows) total_weight += y[r] == 1 ? positive_weight : 1.0;
  if (!(total_weight > 0.0)) return 0.0;
  std::vector<double> w1_dense(cfg.hidden, 0.0);
  double loss = 0.0;
  Cache c;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const std::size_t r = rows[b];
    const std::span<const double> mask =
        dropout_masks.empty() ? std::span<const double>() : dropout_masks.subspan(b * cfg.hidden, cfg.hidden);
    forward_pass(cfg, model.params(), colsum, x.row(r), mask, c);
    const double w = (y[r] == 1 ? positive_weight : 1.0) / total_weight;
    const double pt = c.prob[y[r] == 1 ? 1 : 0];
    loss -= w * std::log(std::max(pt, 1e-300));
    if (grad) backward_pass(cfg, model.params(), c, y[r] == 1 ? 1 : 0, w, mask, *grad, w1_dense);
  }
  if (grad) {
    for (std::size_t k = 0; k < cfg.hidden; ++k) {
      if (w1_dense[k] == 0.0) continue;
      double* row = &grad->w1[k * cfg.num_features];
      for (std::size_t j = 0; j < cfg.num_features; ++j) row[j] += w1_dense[k];
    }
  }
  return loss;
}

FcmhModel train_fcmh(const FeatureMatrix& x, std::span<const int> y, const FcmhConfig& model_config,
                     const FcmhTrainConfig& config, std::vector<FcmhEpoch>* log) {
  config.validate();
  if (x.rows() != y.size()) fail(ErrorCode::kUsage, "FCMH training: row count != label count");
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (positives == 0 || positives == y.size())
    fail(ErrorCode::kTraining, "FCMH training needs both classes");
  FcmhModel model(model_config, config.seed);
  const FcmhConfig& cfg = model.config();
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const double keep_scale = 1.0 / (1.0 - cfg.dropout);
  FcmhParams grad = FcmhParams::zeros(cfg);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::vector<double> masks(batch.size() * cfg.hidden, 1.0);
      if (cfg.dropout > 0.0)
        for (double& m : masks) m = keep(rng) ? keep_scale : 0.0;
      grad.for_each([](const char*, std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); });
      const double loss = fcmh_loss(model, x, batch, y, config.positive_weight, &grad, masks);
      if (!std::isfinite(loss))
        fail(ErrorCode::kTraining, "FCMH training diverged at epoch " + std::to_string(epoch + 1) +
                                       " (non-finite loss); lower the learning rate");
      loss_sum += loss;
      ++batches;
      std::vector<const std::vector<double>*> gs;
      grad.for_each([&](const char*, const std::vector<double>& v) { gs.push_back(&v); });
      std::size_t gi = 0;
      model.mutable_params().for_each([&](const char*, std::vector<double>& v) {
        const auto& g = *gs[gi++];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= config.learning_rate * g[i];
      });
    }
    if (log) {
      std::size_t correct = 0;
      for (std::size_t r = 0; r < x.rows(); ++r)
        correct += ((model.predict_proba(x.row(r)) >= 0.5) ? 1 : 0) == (y[r] == 1 ? 1 : 0);
      log->push_back({epoch + 1, batches ? loss_sum / static_cast<double>(batches) : 0.0,
                      static_cast<double>(correct) / static_cast<double>(x.rows())});
    }
  }
  return model;
}

}  // namespace bofx
