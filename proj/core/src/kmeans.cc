#include "bofx/kmeans.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "bofx/error.h"

namespace bofx {

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::size_t nearest_centroid(std::span<const double> centroids, std::size_t dim,
                             std::span<const double> x) {
  const std::size_t k = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_distance(centroids.data() + c * dim, x.data(), dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::size_t count_distinct_rows(std::span<const double> points, std::size_t dim) {
  const std::size_t n = points.size() / dim;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row = [&](std::size_t i) { return points.begin() + static_cast<std::ptrdiff_t>(i * dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + static_cast<std::ptrdiff_t>(dim), row(b),
                                        row(b) + static_cast<std::ptrdiff_t>(dim));
  });
  std::size_t distinct = n > 0 ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i)
    if (!std::equal(row(order[i]), row(order[i]) + static_cast<std::ptrdiff_t>(dim), row(order[i - 1])))
      ++distinct;
  return distinct;
}

KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansConfig& config) {
  if (dim == 0 || points.size() % dim != 0)
    fail(ErrorCode::kUsage, "point buffer is not a multiple of the dimension");
  if (config.k == 0) fail(ErrorCode::kConfig, "k-means needs k >= 1");
  const std::size_t n = points.size() / dim;
  const std::size_t k = config.k;
  if (const std::size_t distinct = count_distinct_rows(points, dim); distinct < k)
    fail(ErrorCode::kTraining, "only " + std::to_string(distinct) + " distinct points for k=" +
                                   std::to_string(k));

  std::mt19937_64 rng(config.seed);
  KMeansResult result;
  result.dim = dim;
  result.centroids.resize(k * dim);
  const double* data = points.data();

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(data + chosen * dim, dim, result.centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data + i * dim, result.centroids.data() + c * dim, dim));
      total += d2[i];
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    chosen = n;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      target -= d2[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen == n) chosen = last_positive;
  }

  result.assignments.assign(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> x(data + i * dim, dim);
      const auto c = static_cast<std::uint32_t>(nearest_centroid(result.centroids, dim, x));
      objective += squared_distance(x.data(), result.centroids.data() + c * dim, dim);
      if (c != result.assignments[i]) {
        result.assignments[i] = c;
        changed = true;
      }
    }
    result.objective_history.push_back(objective);
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignments[i];
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += data[i * dim + d];
    }
    // Empty clusters keep their previous centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d)
        result.centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
    }
  }
  return result;
}

}  // namespace bofx
