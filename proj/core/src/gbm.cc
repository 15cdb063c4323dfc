#include "bofx/gbm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "bofx/error.h"
#include "json.hpp"

namespace bofx {

namespace {

constexpr int kModelFormatVersion = 1;

struct ColumnEntry {
  float value;
  std::uint32_t row;
};

// Nonzero entries of every column, sorted by value (then row).
std::vector<std::vector<ColumnEntry>> sparse_columns(const FeatureMatrix& x) {
  std::vector<std::vector<ColumnEntry>> cols(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      if (row[c] != 0.0f) cols[c].push_back({row[c], static_cast<std::uint32_t>(r)});
  }
  for (auto& col : cols)
    std::sort(col.begin(), col.end(), [](const ColumnEntry& a, const ColumnEntry& b) {
      return a.value < b.value || (a.value == b.value && a.row < b.row);
    });
  return cols;
}

struct BuildNode {
  double g = 0.0, h = 0.0, w = 0.0;
  std::size_t count = 0;
  std::size_t depth = 0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1, right = -1;
  double value = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

// Per-node scratch state while scanning one column.
struct ScanState {
  double nz_g = 0.0, nz_h = 0.0;
  std::size_t nz_count = 0;
  double left_g = 0.0, left_h = 0.0;
  float prev = 0.0f;
  bool started = false;
  bool zero_added = false;
  bool touched = false;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const std::vector<std::vector<ColumnEntry>>& columns,
              const TrainConfig& config)
      : x_(x), columns_(columns), config_(config) {}

  std::vector<BuildNode> build(std::span<const double> grad, std::span<const double> hess,
                               std::span<const double> weight, std::span<const std::uint32_t> rows,
                               std::span<const std::size_t> features) {
    nodes_.clear();
    node_of_.assign(x_.rows(), -1);
    BuildNode root;
    for (auto r : rows) {
      node_of_[r] = 0;
      root.g += grad[r];
      root.h += hess[r];
      root.w += weight[r];
      ++root.count;
    }
    nodes_.push_back(root);

    std::vector<std::int32_t> frontier = {0};
    while (!frontier.empty()) {
      std::vector<std::int32_t> active;
      for (auto id : frontier)
        if (nodes_[id].depth < config_.max_depth && nodes_[id].count >= 2) active.push_back(id);
      std::vector<SplitCandidate> best(active.size());
      if (!active.empty()) find_splits(active, grad, hess, features, best);

      std::vector<std::int32_t> next;
      std::vector<std::int32_t> split_slot(nodes_.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (best[s].feature < 0) continue;
        const std::int32_t id = active[s];
        BuildNode child;
        child.depth = nodes_[id].depth + 1;
        nodes_[id].feature = best[s].feature;
        nodes_[id].threshold = best[s].threshold;
        nodes_[id].left = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(child);
        nodes_[id].right = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(child);
        next.push_back(nodes_[id].left);
        next.push_back(nodes_[id].right);
      }
      for (auto r : rows) {
        const std::int32_t id = node_of_[r];
        if (id < 0 || nodes_[id].feature < 0 || nodes_[id].left < 0) continue;
        if (nodes_[id].depth + 1 != nodes_[nodes_[id].left].depth) continue;
        const BuildNode& parent = nodes_[id];
        const bool go_left = static_cast<double>(x_(r, static_cast<std::size_t>(parent.feature))) < parent.threshold;
        const std::int32_t child = go_left ? parent.left : parent.right;
        node_of_[r] = child;
        nodes_[child].g += grad[r];
        nodes_[child].h += hess[r];
        nodes_[child].w += weight[r];
        ++nodes_[child].count;
      }
      frontier = std::move(next);
    }
    for (auto& n : nodes_)
      if (n.feature < 0) n.value = -n.g / (n.h + config_.lambda);
    return nodes_;
  }

 private:
  void find_splits(const std::vector<std::int32_t>& active, std::span<const double> grad,
                   std::span<const double> hess, std::span<const std::size_t> features,
                   std::vector<SplitCandidate>& best) {
    std::vector<std::int32_t> slot_of(nodes_.size(), -1);
    for (std::size_t s = 0; s < active.size(); ++s) slot_of[active[s]] = static_cast<std::int32_t>(s);
    std::vector<ScanState> state(active.size());
    std::vector<std::size_t> touched;

    for (std::size_t f : features) {
      const auto& col = columns_[f];
      touched.clear();
      for (const auto& e : col) {
        const std::int32_t id = node_of_[e.row];
        if (id < 0 || slot_of[id] < 0) continue;
        const auto s = static_cast<std::size_t>(slot_of[id]);
        ScanState& st = state[s];
        if (!st.touched) {
          st = ScanState{};
          st.touched = true;
          touched.push_back(s);
        }
        st.nz_g += grad[e.row];
        st.nz_h += hess[e.row];
        ++st.nz_count;
      }
      for (const auto& e : col) {
        const std::int32_t id = node_of_[e.row];
        if (id < 0 || slot_of[id] < 0) continue;
        const auto s = static_cast<std::size_t>(slot_of[id]);
        ScanState& st = state[s];
        if (e.value > 0.0f && !st.zero_added) add_zero_bucket(active[s], f, st, best[s]);
        if (st.started && e.value != st.prev)
          consider(active[s], f, 0.5 * (static_cast<double>(st.prev) + e.value), st, best[s]);
        st.left_g += grad[e.row];
        st.left_h += hess[e.row];
        st.prev = e.value;
        st.started = true;
      }
      for (std::size_t s : touched) {
        ScanState& st = state[s];
        if (!st.zero_added) add_zero_bucket(active[s], f, st, best[s]);
        st.touched = false;
      }
    }
  }

  void add_zero_bucket(std::int32_t id, std::size_t f, ScanState& st, SplitCandidate& best) {
    st.zero_added = true;
    const BuildNode& node = nodes_[id];
    if (node.count == st.nz_count) return;
    if (st.started) consider(id, f, 0.5 * static_cast<double>(st.prev), st, best);
    st.left_g += node.g - st.nz_g;
    st.left_h += node.h - st.nz_h;
    st.prev = 0.0f;
    st.started = true;
  }

  void consider(std::int32_t id, std::size_t f, double threshold, const ScanState& st,
                SplitCandidate& best) const {
    const BuildNode& node = nodes_[id];
    const double gl = st.left_g, hl = st.left_h;
    const double gr = node.g - gl, hr = node.h - hl;
    if (hl < config_.min_child_weight || hr < config_.min_child_weight) return;
    const double lambda = config_.lambda;
    const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - node.g * node.g / (node.h + lambda);
    if (gain > best.gain) best = {gain, static_cast<std::int32_t>(f), threshold};
  }

  const FeatureMatrix& x_;
  const std::vector<std::vector<ColumnEntry>>& columns_;
  const TrainConfig& config_;
  std::vector<BuildNode> nodes_;
  std::vector<std::int32_t> node_of_;
};

void to_preorder(const std::vector<BuildNode>& built, std::int32_t id, std::vector<TreeNode>& out) {
  const BuildNode& b = built[id];
  const auto self = out.size();
  out.push_back({});
  if (b.feature < 0) {
    out[self] = {-1, 0.0, -1, -1, b.w, b.value};
    return;
  }
  out[self].feature = b.feature;
  out[self].threshold = b.threshold;
  out[self].left = static_cast<std::int32_t>(out.size());
  to_preorder(built, b.left, out);
  out[self].right = static_cast<std::int32_t>(out.size());
  to_preorder(built, b.right, out);
  out[self].cover = out[out[self].left].cover + out[out[self].right].cover;
}

double weighted_logloss(std::span<const double> margin, std::span<const int> y, std::span<const double> w) {
  double loss = 0.0, total = 0.0;
  for (std::size_t i = 0; i < margin.size(); ++i) {
    // log(1 + exp(-s)) for s = +-margin, computed stably.
    const double s = y[i] ? margin[i] : -margin[i];
    const double l = s > 0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
    loss += w[i] * l;
    total += w[i];
  }
  return loss / total;
}

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["estimators"] = c.estimators;
  j["learning_rate"] = c.learning_rate;
  j["max_depth"] = c.max_depth;
  j["subsample"] = c.subsample;
  j["colsample_bytree"] = c.colsample_bytree;
  j["positive_weight"] = c.positive_weight;
  j["lambda"] = c.lambda;
  j["min_child_weight"] = c.min_child_weight;
  j["seed"] = c.seed;
  j["loss"] = "logistic";
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.estimators = j.at("estimators").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.subsample = j.at("subsample").get<double>();
  c.colsample_bytree = j.at("colsample_bytree").get<double>();
  c.positive_weight = j.at("positive_weight").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void FeatureMatrix::add_row(std::span<const float> values) {
  if (values.size() != cols_) fail(ErrorCode::kUsage, "row width does not match matrix");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void TrainConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(learning_rate) || !in_unit(subsample) || !in_unit(colsample_bytree))
    fail(ErrorCode::kConfig, "learning rate and subsample rates must lie in (0, 1]");
  if (!(positive_weight > 0.0)) fail(ErrorCode::kConfig, "positive class weight must be positive");
  if (lambda < 0.0 || min_child_weight < 0.0) fail(ErrorCode::kConfig, "regularization must be >= 0");
}

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) fail(ErrorCode::kModelIntegrity, "tree has no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) continue;
    const auto sz = static_cast<std::int32_t>(nodes_.size());
    if (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) || n.left >= sz ||
        n.right >= sz)
      fail(ErrorCode::kModelIntegrity, "tree child index out of range");
  }
}

std::size_t Tree::leaf_index(std::span<const float> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<double>(x[static_cast<std::size_t>(n.feature)]) < n.threshold ? n.left : n.right;
  }
  return i;
}

double Tree::evaluate(std::span<const float> x) const { return nodes_[leaf_index(x)].value; }

std::size_t Tree::max_depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, depth[i]);
    if (!nodes_[i].is_leaf()) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return best;
}

GbmModel::GbmModel(std::size_t num_features, double base_score, std::vector<Tree> trees,
                   std::vector<double> tree_weights, TrainConfig config)
    : num_features_(num_features),
      base_score_(base_score),
      trees_(std::move(trees)),
      tree_weights_(std::move(tree_weights)),
      config_(config) {
  if (trees_.size() != tree_weights_.size())
    fail(ErrorCode::kModelIntegrity, "one weight per tree is required");
  for (const auto& t : trees_)
    for (const auto& n : t.nodes())
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= num_features_)
        fail(ErrorCode::kModelIntegrity, "split feature outside model width");
}

double GbmModel::predict_logit(std::span<const float> x) const {
  if (x.size() != num_features_)
    fail(ErrorCode::kUsage, "feature vector width " + std::to_string(x.size()) + " != model width " +
                                std::to_string(num_features_));
  double f = base_score_;
  for (std::size_t i = 0; i < trees_.size(); ++i) f += tree_weights_[i] * trees_[i].evaluate(x);
  return f;
}

double GbmModel::predict_proba(std::span<const float> x) const { return sigmoid(predict_logit(x)); }

double sigmoid(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

// Field order: format, version, config, num_features, base_score, trees[{weight, nodes}],
// where nodes are preorder [feature, threshold, cover, value] with feature -1 for leaves.
std::string GbmModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "bofx.gbm";
  j["version"] = kModelFormatVersion;
  j["config"] = config_to_json(config_);
  j["num_features"] = num_features_;
  j["base_score"] = base_score_;
  auto& trees = j["trees"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < trees_.size(); ++i) {
    nlohmann::ordered_json t;
    t["weight"] = tree_weights_[i];
    auto& nodes = t["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : trees_[i].nodes())
      nodes.push_back(nlohmann::ordered_json::array({n.feature, n.threshold, n.cover, n.value}));
    trees.push_back(std::move(t));
  }
  return j.dump();
}

GbmModel GbmModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("model file: ") + e.what());
  }
  if (j.value("format", "") != "bofx.gbm") fail(ErrorCode::kFormat, "not a GBM model file");
  if (j.value("version", -1) != kModelFormatVersion) fail(ErrorCode::kFormat, "unsupported GBM model version");
  try {
    std::vector<Tree> trees;
    std::vector<double> weights;
    for (const auto& t : j.at("trees")) {
      weights.push_back(t.at("weight").get<double>());
      const auto& flat = t.at("nodes");
      std::vector<TreeNode> nodes(flat.size());
      for (std::size_t i = 0; i < flat.size(); ++i) {
        nodes[i].feature = flat[i].at(0).get<std::int32_t>();
        nodes[i].threshold = flat[i].at(1).get<double>();
        nodes[i].cover = flat[i].at(2).get<double>();
        nodes[i].value = flat[i].at(3).get<double>();
      }
      // Rebuild child links from preorder: left child follows its parent, right
      // child follows the left subtree.
      std::vector<std::size_t> stack;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!stack.empty()) {
          auto& parent = nodes[stack.back()];
          if (parent.left < 0) {
            parent.left = static_cast<std::int32_t>(i);
          } else {
            parent.right = static_cast<std::int32_t>(i);
            stack.pop_back();
          }
        } else if (i != 0) {
          fail(ErrorCode::kModelIntegrity, "preorder node list has trailing nodes");
        }
        if (!nodes[i].is_leaf()) stack.push_back(i);
      }
      if (!stack.empty()) fail(ErrorCode::kModelIntegrity, "preorder node list is truncated");
      trees.emplace_back(std::move(nodes));
    }
    return GbmModel(j.at("num_features").get<std::size_t>(), j.at("base_score").get<double>(),
                    std::move(trees), std::move(weights), config_from_json(j.at("config")));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("model file: ") + e.what());
  }
}

void GbmModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << to_json() << '\n';
}

GbmModel GbmModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingArtifact, "model file '" + path + "' not found");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

GbmModel train_gbm(const FeatureMatrix& x, std::span<const int> y, const TrainConfig& config,
                   GbmTrainTrace* trace) {
  config.validate();
  const std::size_t n = x.rows();
  if (n != y.size()) fail(ErrorCode::kUsage, "label count does not match row count");
  if (n < 2) fail(ErrorCode::kTraining, "at least two training rows are required");
  std::size_t positives = 0;
  for (int label : y) {
    if (label != 0 && label != 1) fail(ErrorCode::kUsage, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == n) fail(ErrorCode::kTraining, "training labels contain a single class");

  std::vector<double> weight(n);
  double wpos = 0.0, wall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = y[i] ? config.positive_weight : 1.0;
    wpos += y[i] ? weight[i] : 0.0;
    wall += weight[i];
  }
  const double base_rate = wpos / wall;
  const double base_score = std::log(base_rate / (1.0 - base_rate));

  std::vector<double> margin(n, base_score);
  if (trace) trace->weighted_logloss = {weighted_logloss(margin, y, weight)};

  const auto columns = sparse_columns(x);
  TreeBuilder builder(x, columns, config);
  std::mt19937_64 rng(config.seed);
  std::vector<double> grad(n), hess(n);
  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0u);
  std::vector<std::size_t> all_features(x.cols());
  std::iota(all_features.begin(), all_features.end(), std::size_t{0});

  std::vector<Tree> trees;
  trees.reserve(config.estimators);
  for (std::size_t t = 0; t < config.estimators; ++t) {
    std::vector<std::uint32_t> rows = all_rows;
    if (config.subsample < 1.0) {
      const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.subsample * n)));
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(keep);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<std::size_t> features = all_features;
    if (config.colsample_bytree < 1.0) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config.colsample_bytree * static_cast<double>(x.cols()))));
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(keep);
      std::sort(features.begin(), features.end());
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = weight[i] * (p - y[i]);
      hess[i] = weight[i] * p * (1.0 - p);
    }
    const auto built = builder.build(grad, hess, weight, rows, features);
    std::vector<TreeNode> nodes;
    nodes.reserve(built.size());
    to_preorder(built, 0, nodes);
    Tree tree(std::move(nodes));
    for (std::size_t i = 0; i < n; ++i) margin[i] += config.learning_rate * tree.evaluate(x.row(i));
    trees.push_back(std::move(tree));
    if (trace) trace->weighted_logloss.push_back(weighted_logloss(margin, y, weight));
  }
  std::vector<double> weights(trees.size(), config.learning_rate);
  return GbmModel(x.cols(), base_score, std::move(trees), std::move(weights), config);
}

}  // namespace bofx
