#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bofx/gbm.h"

namespace bofx {

struct FcmhConfig {
  std::size_t num_features = 2400;
  std::size_t embed_dim = 8;
  std::size_t heads = 2;
  std::size_t hidden = 64;
  double dropout = 0.05;
  double input_scale = 0.1;  // token_j = input_scale * x_j * E_j

  void validate() const;
};

struct FcmhTrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double positive_weight = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// All weights, row-major. Projections map row vectors: q = t * wq + bq.
struct FcmhParams {
  std::vector<double> embed;  // num_features x embed_dim
  std::vector<double> wq, bq, wk, bk, wv, bv;  // embed_dim x embed_dim, embed_dim
  std::vector<double> w1, b1;  // hidden x num_features, hidden
  std::vector<double> w2, b2;  // 2 x hidden, 2

  static FcmhParams zeros(const FcmhConfig& config);
  void for_each(const std::function<void(const char* name, std::vector<double>&)>& fn);
  void for_each(const std::function<void(const char* name, const std::vector<double>&)>& fn) const;
};

struct FcmhOutput {
  double probability[2] = {0.5, 0.5};
  std::vector<double> importance;  // attention mass received per feature, sums to 1
};

class FcmhModel {
 public:
  // Uniform init scaled by fan-in, seeded.
  FcmhModel(FcmhConfig config, std::uint64_t seed);
  FcmhModel(FcmhConfig config, FcmhParams params);

  const FcmhConfig& config() const { return config_; }
  const FcmhParams& params() const { return params_; }
  FcmhParams& mutable_params() { return params_; }

  // Evaluation mode (no dropout).
  FcmhOutput forward(std::span<const float> x) const;
  std::vector<double> importance(std::span<const float> x) const;
  double predict_proba(std::span<const float> x) const;

  std::string to_json() const;
  static FcmhModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static FcmhModel load(const std::string& path);

 private:
  FcmhConfig config_;
  FcmhParams params_;
};

// Weighted mean cross-entropy over the rows and, when `grad` is non-null,
// its exact gradient (accumulated into zero-initialized `grad`).
// `dropout_masks` (rows x hidden, already scaled) enables dropout; empty disables it.
double fcmh_loss(const FcmhModel& model, const FeatureMatrix& x, std::span<const std::size_t> rows,
                 std::span<const int> y, double positive_weight, FcmhParams* grad,
                 std::span<const double> dropout_masks = {});

struct FcmhEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean weighted training loss over the epoch's batches
  double accuracy = 0.0;  // training accuracy at 0.5 after the epoch
};

// Plain minibatch SGD. Throws kTraining on a single class or a non-finite loss.
FcmhModel train_fcmh(const FeatureMatrix& x, std::span<const int> y, const FcmhConfig& model_config,
                     const FcmhTrainConfig& config, std::vector<FcmhEpoch>* log = nullptr);

}  // namespace bofx
