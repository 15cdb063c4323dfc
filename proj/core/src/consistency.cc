#include "bofx/consistency.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bofx/error.h"

namespace bofx {

namespace {

std::vector<double> centroid(const std::vector<double>& taus, std::size_t len, std::span<const std::size_t> rows) {
  std::vector<double> c(len, 0.0);
  for (std::size_t r : rows)
    for (std::size_t k = 0; k < len; ++k) c[k] += taus[r * len + k];
  for (double& v : c) v /= static_cast<double>(rows.size());
  return c;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

std::vector<std::size_t> highlighted_rows(const std::vector<bool>& mask) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> random_rows(std::size_t total, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(size);
  return all;
}

}  // namespace

ConsistencyScore consistency_score(std::span<const ConsistencyMoment> moments, std::size_t null_reps,
                                   std::uint64_t seed) {
  if (null_reps == 0) fail(ErrorCode::kConfig, "consistency null needs at least one repetition");
  std::mt19937_64 rng(seed);
  ConsistencyScore out;
  double ratio_sum = 0.0;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    auto& ch = out.channels[c];
    double drift = 0.0, null_drift = 0.0;
    for (std::size_t i = 1; i < moments.size(); ++i) {
      const auto& a = moments[i - 1];
      const auto& b = moments[i];
      if (a.sequence != b.sequence) continue;
      if (a.tau_len != b.tau_len) fail(ErrorCode::kUsage, "consistency moments differ in tau length");
      const auto ha = highlighted_rows(a.highlighted[c]);
      const auto hb = highlighted_rows(b.highlighted[c]);
      if (ha.empty() || hb.empty()) continue;
      const std::size_t len = a.tau_len;
      drift += distance(centroid(a.taus[c], len, ha), centroid(b.taus[c], len, hb));
      const std::size_t na = a.taus[c].size() / len;
      const std::size_t nb = b.taus[c].size() / len;
      double nd = 0.0;
      for (std::size_t r = 0; r < null_reps; ++r) {
        const auto ra = random_rows(na, ha.size(), rng);
        const auto rb = random_rows(nb, hb.size(), rng);
        nd += distance(centroid(a.taus[c], len, ra), centroid(b.taus[c], len, rb));
      }
      null_drift += nd / static_cast<double>(null_reps);
      ch.pairs += 1;
    }
    if (ch.pairs == 0) continue;
    ch.present = true;
    ch.drift = drift / static_cast<double>(ch.pairs);
    ch.null_drift = null_drift / static_cast<double>(ch.pairs);
    ch.ratio = ch.null_drift > 0.0 ? ch.drift / ch.null_drift : (ch.drift > 0.0 ? 1e300 : 1.0);
    ratio_sum += ch.ratio;
    out.present_channels += 1;
  }
  if (out.present_channels > 0) out.score = ratio_sum / static_cast<double>(out.present_channels);
  return out;
}

ChannelEmbedding embed_channel(Mnemonic channel, std::size_t tau_len, std::span<const double> highlighted,
                               std::span<const double> codebook, std::span<const double> expert,
                               const TsneConfig& config, std::size_t max_codebook) {
  if (tau_len == 0 || highlighted.size() % tau_len || codebook.size() % tau_len || expert.size() % tau_len)
    fail(ErrorCode::kUsage, "tau arrays are not multiples of tau_len");
  ChannelEmbedding out;
  out.channel = channel;
  std::vector<double> points;
  auto add = [&](std::span<const double> rows, TauGroup g, std::span<const std::size_t> pick) {
    for (std::size_t r : pick) {
      points.insert(points.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * tau_len),
                    rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * tau_len));
      out.groups.push_back(g);
    }
  };
  auto all = [&](std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
  };
  add(highlighted, TauGroup::kHighlighted, all(highlighted.size() / tau_len));
  std::mt19937_64 rng(config.seed);
  const std::size_t nc = codebook.size() / tau_len;
  auto pick = nc > max_codebook ? random_rows(nc, max_codebook, rng) : all(nc);
  std::sort(pick.begin(), pick.end());
  add(codebook, TauGroup::kCodebook, pick);
  add(expert, TauGroup::kExpert, all(expert.size() / tau_len));

  const std::size_t n = out.groups.size();
  TsneConfig cfg = config;
  if (n < 4) fail(ErrorCode::kEmbedding, "too few tau-segments to embed (" + std::to_string(n) + ")");
  cfg.perplexity = std::min(cfg.perplexity, static_cast<double>(n - 1) / 3.0);
  out.embedding = tsne(pairwise_distances(points, tau_len), cfg);
  return out;
}

}  // namespace bofx
