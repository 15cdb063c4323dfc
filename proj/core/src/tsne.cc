#include "bofx/tsne.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bofx/error.h"

namespace bofx {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    const double s = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= s * b[i];
  }
}

bool normalize(std::vector<double>& v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 1e-300)) return false;
  for (double& x : v) x /= norm;
  return true;
}

// Top eigenvector of the PSD matrix b, orthogonal to `basis`.
std::vector<double> power_iteration(const std::vector<double>& b, std::size_t n, std::vector<double> v,
                                    const std::vector<std::vector<double>>& basis, std::mt19937_64& rng) {
  orthogonalize(v, basis);
  std::vector<double> w(n);
  auto multiply = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &b[i * n];
      for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
      w[i] = s;
    }
  };
  if (normalize(v)) {
    multiply();
    if (std::sqrt(dot(w, w)) < 1e-12) v.assign(n, 0.0);
  }
  if (!(std::sqrt(dot(v, v)) > 0.5)) {
    std::normal_distribution<double> g;
    for (double& x : v) x = g(rng);
    orthogonalize(v, basis);
    normalize(v);
  }
  for (int it = 0; it < 300; ++it) {
    multiply();
    orthogonalize(w, basis);
    if (!normalize(w)) break;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(w[i] - v[i]));
    v.swap(w);
    if (change < 1e-12) break;
  }
  double skew = 0.0;
  for (double x : v) skew += x * x * x;
  if (skew < 0.0)
    for (double& x : v) x = -x;
  return v;
}

std::vector<double> mds_init(const DistanceMatrix& dist, std::uint64_t seed) {
  const std::size_t n = dist.size();
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row_mean[i] += dist(i, j);
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  std::vector<double> b(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b[i * n + j] = -0.5 * (dist(i, j) - row_mean[i] - row_mean[j] + grand);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> basis = {std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n)))};
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = b[i * n + i];
  auto v1 = power_iteration(b, n, diag, basis, rng);
  basis.push_back(v1);
  std::vector<double> start2(n);
  for (std::size_t i = 0; i < n; ++i) start2[i] = diag[i] * v1[i];
  auto v2 = power_iteration(b, n, start2, basis, rng);

  std::vector<double> y(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    y[2 * i] = v1[i];
    y[2 * i + 1] = v2[i];
  }
  // Unit-norm eigenvectors have per-point spread 1/sqrt(n); rescale to 1e-4.
  const double scale = 1e-4 * std::sqrt(static_cast<double>(n));
  for (double& x : y) x *= scale;
  return y;
}

}  // namespace

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
  if (values_.size() != n_ * n_) fail(ErrorCode::kUsage, "distance matrix is not n x n");
}

DistanceMatrix pairwise_distances(std::span<const double> points, std::size_t dim) {
  if (dim == 0 || points.size() % dim != 0) fail(ErrorCode::kUsage, "point array is not a multiple of dim");
  const std::size_t n = points.size() / dim;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = points[i * dim + k] - points[j * dim + k];
        s += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = s;
    }
  return DistanceMatrix(n, std::move(d));
}

DistanceMatrix pairwise_distances(std::span<const TauSegment> taus) {
  if (taus.empty()) return DistanceMatrix(0, {});
  const std::size_t dim = taus[0].normalized.size();
  if (dim == 0) fail(ErrorCode::kUsage, "tau-segments must be normalized before computing distances");
  std::vector<double> points;
  points.reserve(taus.size() * dim);
  for (const auto& t : taus) {
    if (t.channel != taus[0].channel) fail(ErrorCode::kUsage, "pairwise distances need a single channel");
    if (t.normalized.size() != dim) fail(ErrorCode::kUsage, "pairwise distances need equal tau lengths");
    points.insert(points.end(), t.normalized.begin(), t.normalized.end());
  }
  return pairwise_distances(points, dim);
}

void TsneConfig::validate() const {
  if (!(perplexity > 0.0)) fail(ErrorCode::kConfig, "perplexity must be positive");
  if (!(learning_rate > 0.0)) fail(ErrorCode::kConfig, "t-SNE learning rate must be positive");
  if (!(exaggeration >= 1.0)) fail(ErrorCode::kConfig, "early exaggeration must be at least 1");
}

Affinities tsne_affinities(const DistanceMatrix& dist, double perplexity) {
  const std::size_t n = dist.size();
  bool degenerate = true;
  for (double v : dist.values()) degenerate = degenerate && v == 0.0;
  if (degenerate) fail(ErrorCode::kEmbedding, "all pairwise distances are zero");

  Affinities out;
  out.beta.assign(n, 1.0);
  out.perplexity.assign(n, 0.0);
  std::vector<double> cond(n * n, 0.0);
  const double target = std::log(perplexity);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    double dsum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) {
        dmin = std::min(dmin, dist(i, j));
        dsum += dist(i, j);
      }
    double beta = 1.0 / std::max(dsum / static_cast<double>(n - 1) - dmin, 1e-12);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    for (int it = 0; it < 200; ++it) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = dist(i, j) - dmin;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-12) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
      } else {
        hi = beta;
        beta = 0.5 * (lo + hi);
      }
    }
    out.beta[i] = beta;
    out.perplexity[i] = std::exp(entropy);
    std::copy(row.begin(), row.end(), cond.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  out.p.assign(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
  return out;
}

double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n) {
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      z += 1.0 / (1.0 + dx * dx + dy * dy);
    }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p[i * n + j];
      if (i == j || !(pij > 0.0)) continue;
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
      kl += pij * std::log(pij / q);
    }
  return kl;
}

std::vector<double> tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n) {
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      num[i * n + j] = num[j * n + i] = 1.0 / (1.0 + dx * dx + dy * dy);
      z += 2.0 * num[i * n + j];
    }
  std::vector<double> grad(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = (p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
      gx += w * (y[2 * i] - y[2 * j]);
      gy += w * (y[2 * i + 1] - y[2 * j + 1]);
    }
    grad[2 * i] = 4.0 * gx;
    grad[2 * i + 1] = 4.0 * gy;
  }
  return grad;
}

Embedding2D tsne(const DistanceMatrix& dist, const TsneConfig& config) {
  config.validate();
  const std::size_t n = dist.size();
  if (static_cast<double>(n) < 3.0 * config.perplexity)
    fail(ErrorCode::kConfig, "t-SNE needs at least 3 * perplexity points (" + std::to_string(n) + " given)");
  const Affinities aff = tsne_affinities(dist, config.perplexity);

  Embedding2D out;
  out.config = config;
  out.y = mds_init(dist, config.seed);
  out.kl_initial = tsne_kl(aff.p, out.y, n);

  std::vector<double> exaggerated(aff.p.size());
  std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const bool early = it < config.exaggeration_iterations;
    if (early) {
      for (std::size_t k = 0; k < aff.p.size(); ++k) exaggerated[k] = aff.p[k] * config.exaggeration;
    }
    const auto grad = tsne_gradient(early ? std::span<const double>(exaggerated) : std::span<const double>(aff.p),
                                    out.y, n);
    const double momentum = it < config.momentum_switch ? config.momentum : config.final_momentum;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      gains[k] = (grad[k] > 0.0) != (update[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
      gains[k] = std::max(gains[k], 0.01);
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      out.y[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += out.y[2 * i];
      my += out.y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.y[2 * i] -= mx;
      out.y[2 * i + 1] -= my;
    }
  }
  for (double v : out.y)
    if (!std::isfinite(v)) fail(ErrorCode::kEmbedding, "t-SNE produced non-finite coordinates");
  out.kl = tsne_kl(aff.p, out.y, n);
  return out;
}

}  // namespace bofx
