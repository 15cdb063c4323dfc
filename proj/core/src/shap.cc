#include "bofx/shap.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bofx/error.h"
#include "json.hpp"

namespace bofx {

namespace {

// One element of the unique feature path from the root to the current node.
struct PathElement {
  std::int64_t feature = -1;
  double zero_fraction = 0.0;  // fraction of paths where the feature is unknown
  double one_fraction = 0.0;   // fraction of paths where the feature is known (follows x)
  double pweight = 0.0;        // permutation weight
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction,
                 std::int64_t feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].pweight += one_fraction * path[k].pweight * static_cast<double>(k + 1) /
                           static_cast<double>(depth + 1);
    path[k].pweight = zero_fraction * path[k].pweight * static_cast<double>(depth - k) /
                      static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].pweight;
      path[k].pweight = next_one_portion * static_cast<double>(depth + 1) / (static_cast<double>(k + 1) * one);
      next_one_portion = tmp - path[k].pweight * zero * static_cast<double>(depth - k) /
                                   static_cast<double>(depth + 1);
    } else {
      path[k].pweight = path[k].pweight * static_cast<double>(depth + 1) /
                        (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
}

// Total permutation weight if the element at `index` were unwound.
double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one_portion * static_cast<double>(depth + 1) / (static_cast<double>(k + 1) * one);
      total += tmp;
      next_one_portion = path[k].pweight - tmp * zero * (static_cast<double>(depth - k) /
                                                         static_cast<double>(depth + 1));
    } else if (zero != 0.0) {
      total += (path[k].pweight / zero) / (static_cast<double>(depth - k) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

class TreeShapRunner {
 public:
  TreeShapRunner(const Tree& tree, std::span<const float> x, std::span<double> phi, double scale)
      : tree_(tree), x_(x), phi_(phi), scale_(scale) {
    const std::size_t d = tree.max_depth() + 2;
    storage_.resize(d * (d + 1) / 2 + d);
  }

  void run() { recurse(0, 0, storage_.data(), 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node_index, std::size_t depth, PathElement* parent_path, double zero_fraction,
               double one_fraction, std::int64_t feature) {
    const TreeNode& node = tree_.node(node_index);
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const PathElement& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] +=
            scale_ * w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }

    const auto split = static_cast<std::size_t>(node.feature);
    const bool go_left = static_cast<double>(x_[split]) < node.threshold;
    const std::size_t hot = static_cast<std::size_t>(go_left ? node.left : node.right);
    const std::size_t cold = static_cast<std::size_t>(go_left ? node.right : node.left);
    const double hot_zero = tree_.node(hot).cover / node.cover;
    const double cold_zero = tree_.node(cold).cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature already on the path is unwound and re-extended at this split.
    std::size_t path_index = 0;
    for (; path_index <= depth; ++path_index)
      if (path[path_index].feature == static_cast<std::int64_t>(split)) break;
    if (path_index != depth + 1) {
      incoming_zero = path[path_index].zero_fraction;
      incoming_one = path[path_index].one_fraction;
      unwind_path(path, depth, path_index);
      depth -= 1;
    }
    recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, static_cast<std::int64_t>(split));
    recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, static_cast<std::int64_t>(split));
  }

  const Tree& tree_;
  std::span<const float> x_;
  std::span<double> phi_;
  double scale_;
  std::vector<PathElement> storage_;
};

void check_covers(const Tree& tree) {
  for (const auto& n : tree.nodes())
    if (!(n.cover > 0.0)) fail(ErrorCode::kModelIntegrity, "tree node with zero cover");
}

// Cover-weighted mean leaf value.
double expected_value(const Tree& tree) {
  double total = 0.0;
  const double root = tree.node(0).cover;
  for (const auto& n : tree.nodes())
    if (n.is_leaf()) total += n.value * n.cover / root;
  return total;
}

// Path-dependent conditional expectation with `known[f]` features following x.
double conditional_value(const Tree& tree, std::size_t node_index, std::span<const float> x,
                         const std::vector<char>& known) {
  const TreeNode& n = tree.node(node_index);
  if (n.is_leaf()) return n.value;
  const auto f = static_cast<std::size_t>(n.feature);
  if (known[f]) {
    const bool go_left = static_cast<double>(x[f]) < n.threshold;
    return conditional_value(tree, static_cast<std::size_t>(go_left ? n.left : n.right), x, known);
  }
  const TreeNode& l = tree.node(static_cast<std::size_t>(n.left));
  const TreeNode& r = tree.node(static_cast<std::size_t>(n.right));
  return (l.cover * conditional_value(tree, static_cast<std::size_t>(n.left), x, known) +
          r.cover * conditional_value(tree, static_cast<std::size_t>(n.right), x, known)) /
         n.cover;
}

void check_width(const GbmModel& model, std::span<const float> x) {
  if (x.size() != model.num_features())
    fail(ErrorCode::kUsage, "feature vector width " + std::to_string(x.size()) + " != model width " +
                                std::to_string(model.num_features()));
}

}  // namespace

double Attribution::total() const {
  return base_value + std::accumulate(phi.begin(), phi.end(), 0.0);
}

Attribution tree_shap(const GbmModel& model, std::span<const float> x) {
  check_width(model, x);
  Attribution out;
  out.base_value = model.base_score();
  out.phi.assign(model.num_features(), 0.0);
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const Tree& tree = model.trees()[t];
    check_covers(tree);
    const double weight = model.tree_weight(t);
    out.base_value += weight * expected_value(tree);
    TreeShapRunner(tree, x, out.phi, weight).run();
  }
  return out;
}

Attribution brute_force_shapley(const GbmModel& model, std::span<const float> x,
                                std::span<const std::size_t> features_in_scope) {
  check_width(model, x);
  const std::size_t n = features_in_scope.size();
  if (n > kMaxBruteForceFeatures)
    fail(ErrorCode::kCapacity, "brute-force Shapley supports at most 20 features, got " + std::to_string(n));
  for (const auto& tree : model.trees()) check_covers(tree);
  for (std::size_t f : features_in_scope)
    if (f >= model.num_features()) fail(ErrorCode::kUsage, "feature in scope outside model width");

  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> value(subsets);
  std::vector<char> known(model.num_features(), 0);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < n; ++i) known[features_in_scope[i]] = (mask >> i) & 1u;
    double v = model.base_score();
    for (std::size_t t = 0; t < model.trees().size(); ++t)
      v += model.tree_weight(t) * conditional_value(model.trees()[t], 0, x, known);
    value[mask] = v;
  }
  // Shapley kernel weight |S|! (n-|S|-1)! / n! by subset size.
  std::vector<double> kernel(n > 0 ? n : 1, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    kernel[s] = std::exp(std::lgamma(static_cast<double>(s) + 1) +
                         std::lgamma(static_cast<double>(n - s)) - std::lgamma(static_cast<double>(n) + 1));

  Attribution out;
  out.base_value = value[0];
  out.phi.assign(model.num_features(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      phi += kernel[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.phi[features_in_scope[i]] += phi;
  }
  return out;
}

void ExplainConfig::validate() const {
  if (!(m_percent > 0.0 && m_percent <= 100.0))
    fail(ErrorCode::kConfig, "M must lie in (0, 100]");
}

std::vector<double> importance(const Attribution& attribution, ImportanceMode mode) {
  std::vector<double> out(attribution.phi.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = mode == ImportanceMode::kPositive ? std::max(attribution.phi[i], 0.0) : std::abs(attribution.phi[i]);
  return out;
}

std::vector<std::size_t> select_top(std::span<const double> importance, double m_percent) {
  if (!(m_percent > 0.0 && m_percent <= 100.0)) fail(ErrorCode::kConfig, "M must lie in (0, 100]");
  double max_imp = 0.0;
  for (double v : importance) max_imp = std::max(max_imp, v);
  std::vector<std::size_t> out;
  if (!(max_imp > 0.0)) return out;
  const double cutoff = std::min(max_imp, max_imp * (m_percent / 100.0));
  for (std::size_t i = 0; i < importance.size(); ++i)
    if (importance[i] >= cutoff) out.push_back(i);
  return out;
}

std::vector<std::size_t> select_top(const Attribution& attribution, const ExplainConfig& config) {
  config.validate();
  return select_top(importance(attribution, config.mode), config.m_percent);
}

const ChannelHighlight* HighlightSet::find(Mnemonic m) const {
  for (const auto& c : channels)
    if (c.channel == m) return &c;
  return nullptr;
}

HighlightSet highlight(std::span<const std::size_t> selected, const SegmentIndex& index) {
  std::array<std::vector<std::size_t>, kNumChannels> features;
  std::array<std::vector<std::size_t>, kNumChannels> starts;
  HighlightSet out;
  std::vector<std::size_t> sorted(selected.begin(), selected.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t f : sorted) {
    if (f >= kFeatureWidth) fail(ErrorCode::kUsage, "selected feature outside 0..2399");
    const auto s = index.starts_for(f);
    if (s.empty()) continue;
    const std::size_t c = f / kClustersPerChannel;
    features[c].push_back(f);
    starts[c].insert(starts[c].end(), s.begin(), s.end());
  }
  const std::size_t len = index.tau().tau_len;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (starts[c].empty()) continue;
    auto& st = starts[c];
    std::sort(st.begin(), st.end());
    ChannelHighlight ch;
    ch.channel = kAllChannels[c];
    ch.features = features[c];
    for (std::size_t s : st) {
      if (!ch.intervals.empty() && s <= ch.intervals.back().end)
        ch.intervals.back().end = std::max(ch.intervals.back().end, s + len);
      else
        ch.intervals.push_back({s, s + len});
    }
    out.channels.push_back(std::move(ch));
  }
  // Tau list in (channel, start) order.
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (std::size_t f : features[c])
      for (std::size_t s : index.starts_for(f)) out.taus.push_back({kAllChannels[c], s, f});
  }
  std::sort(out.taus.begin(), out.taus.end(), [](const HighlightedTau& a, const HighlightedTau& b) {
    return a.channel != b.channel ? a.channel < b.channel : a.start < b.start;
  });
  return out;
}

Explanation explain(const GbmModel& model, const Featurization& featurization, const ExplainConfig& config) {
  config.validate();
  Explanation out;
  const std::span<const float> x = featurization.features;
  out.logit = model.predict_logit(x);
  out.probability = sigmoid(out.logit);
  out.attribution = tree_shap(model, x);
  out.selected = select_top(out.attribution, config);
  out.highlights = highlight(out.selected, featurization.index);
  return out;
}

Explanation explain(const GbmModel& model, const Segment& segment, const CodebookSet& codebooks,
                    const ExplainConfig& config) {
  return explain(model, featurize(segment, codebooks), config);
}

std::string to_json(const ExplanationRecord& record, std::size_t max_features) {
  const Explanation& e = record.explanation;
  nlohmann::ordered_json j;
  j["well_id"] = record.well_id;
  j["time"] = record.time;
  j["type"] = std::string(to_string(record.type));
  j["probability"] = e.probability;
  j["logit"] = e.logit;
  j["base_value"] = e.attribution.base_value;
  auto& hl = j["highlights"] = nlohmann::ordered_json::object();
  for (const auto& ch : e.highlights.channels) {
    auto& arr = hl[std::string(to_string(ch.channel))] = nlohmann::ordered_json::array();
    for (const auto& iv : ch.intervals) {
      arr.push_back({{"begin", iv.begin},
                     {"end", iv.end},
                     {"start_time", record.segment_start_time + record.step * static_cast<double>(iv.begin)},
                     {"end_time", record.segment_start_time + record.step * static_cast<double>(iv.end)}});
    }
  }
  auto& taus = j["taus"] = nlohmann::ordered_json::object();
  for (const auto& t : e.highlights.taus) {
    auto key = std::string(to_string(t.channel));
    if (!taus.contains(key)) taus[key] = nlohmann::ordered_json::array();
    taus[key].push_back(t.start);
  }
  std::vector<std::size_t> order = e.selected;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return e.attribution.phi[a] > e.attribution.phi[b];
  });
  if (order.size() > max_features) order.resize(max_features);
  auto& top = j["top_features"] = nlohmann::ordered_json::array();
  for (std::size_t f : order)
    top.push_back({{"feature", f},
                   {"channel", std::string(to_string(channel_of_feature(f)))},
                   {"cluster", cluster_of_feature(f)},
                   {"phi", e.attribution.phi[f]}});
  return j.dump();
}

}  // namespace bofx
