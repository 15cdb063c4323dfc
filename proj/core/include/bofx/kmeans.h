#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bofx {

struct KMeansConfig {
  std::size_t k = 200;
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::size_t dim = 0;
  std::vector<double> centroids;          // k x dim, row-major
  std::vector<std::uint32_t> assignments;  // one per point
  // Sum of squared distances after every assignment step.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding. Points are row-major n x dim.
// Throws kTraining when there are fewer distinct points than k.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansConfig& config);

// Index of the closest centroid by squared Euclidean distance; ties go to the lowest index.
std::size_t nearest_centroid(std::span<const double> centroids, std::size_t dim,
                             std::span<const double> x);

std::size_t count_distinct_rows(std::span<const double> points, std::size_t dim);

}  // namespace bofx
