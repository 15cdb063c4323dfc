#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bofx/bag_of_features.h"

namespace bofx {

// Symmetric n x n matrix of squared Euclidean distances.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// Points are row-major n x dim.
DistanceMatrix pairwise_distances(std::span<const double> points, std::size_t dim);
// Uses normalized values; all tau-segments must share channel and length (kUsage otherwise).
DistanceMatrix pairwise_distances(std::span<const TauSegment> taus);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 750;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 100;
  double learning_rate = 100.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Affinities {
  std::vector<double> p;           // n x n joint probabilities, symmetric, sum 1
  std::vector<double> beta;        // per-row precision found by bisection
  std::vector<double> perplexity;  // per-row achieved perplexity exp(H)
};

// Throws kEmbedding when all distances are zero.
Affinities tsne_affinities(const DistanceMatrix& dist, double perplexity);

double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n);
// Exact gradient of KL(P || Q) with respect to the 2-D coordinates.
std::vector<double> tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n);

struct Embedding2D {
  std::vector<double> y;  // n x 2
  TsneConfig config;
  double kl_initial = 0.0;
  double kl = 0.0;

  std::size_t size() const { return y.size() / 2; }
};

// Exact t-SNE. Requires n >= 3 * perplexity (kConfig). Initialized from
// classical MDS so the result is equivariant under point permutation.
Embedding2D tsne(const DistanceMatrix& dist, const TsneConfig& config);

}  // namespace bofx
