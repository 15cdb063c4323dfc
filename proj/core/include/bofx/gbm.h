#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bofx {

// Dense row-major float matrix used as GBM training input.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * cols_, cols_);
  }
  std::span<float> row(std::size_t i) { return std::span<float>(data_).subspan(i * cols_, cols_); }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  void add_row(std::span<const float> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct TrainConfig {
  std::size_t estimators = 250;
  double learning_rate = 0.05;
  std::size_t max_depth = 10;
  double subsample = 0.9;
  double colsample_bytree = 0.9;
  double positive_weight = 5.0;
  double lambda = 1.0;            // L2 on leaf values
  double min_child_weight = 1.0;  // minimum hessian sum per child
  std::uint64_t seed = 0;

  void validate() const;
};

// Internal nodes send x[feature] < threshold left. Leaves have feature == -1.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double cover = 0.0;  // sum of training sample weights reaching the node
  double value = 0.0;  // leaf log-odds contribution

  bool is_leaf() const { return feature < 0; }
};

// Nodes are stored in preorder; the root is node 0.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  double evaluate(std::span<const float> x) const;
  std::size_t leaf_index(std::span<const float> x) const;
  std::size_t max_depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// F(x) = const + sum_i weight_i * h_i(x); P(y=1) = sigmoid(F(x)).
class GbmModel {
 public:
  GbmModel(std::size_t num_features, double base_score, std::vector<Tree> trees,
           std::vector<double> tree_weights, TrainConfig config);

  std::size_t num_features() const { return num_features_; }
  double base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }
  double tree_weight(std::size_t i) const { return tree_weights_[i]; }
  const TrainConfig& config() const { return config_; }

  double predict_logit(std::span<const float> x) const;
  double predict_proba(std::span<const float> x) const;

  std::string to_json() const;
  static GbmModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static GbmModel load(const std::string& path);

 private:
  std::size_t num_features_;
  double base_score_;
  std::vector<Tree> trees_;
  std::vector<double> tree_weights_;
  TrainConfig config_;
};

double sigmoid(double logit);

struct GbmTrainTrace {
  // Weighted mean log-loss on the training set: entry 0 for the constant
  // model, then one entry after every boosting round.
  std::vector<double> weighted_logloss;
};

// Labels are 0/1. Throws kTraining when only one class is present.
GbmModel train_gbm(const FeatureMatrix& x, std::span<const int> y, const TrainConfig& config,
                   GbmTrainTrace* trace = nullptr);

}  // namespace bofx
