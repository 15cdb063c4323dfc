#include "bofx/bag_of_features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "bofx/error.h"
#include "bofx/kmeans.h"
#include "json.hpp"

namespace bofx {

namespace {

constexpr int kCodebookFormatVersion = 1;

std::size_t nearest_normalized(const Codebook& book, const double* raw) {
  // Same arithmetic as Codebook::normalize followed by nearest_centroid.
  const std::size_t len = book.tau_len();
  const std::size_t k = book.size();
  double buf[512];
  std::vector<double> heap;
  double* x = buf;
  if (len > 512) {
    heap.resize(len);
    x = heap.data();
  }
  for (std::size_t i = 0; i < len; ++i) x[i] = (raw[i] - book.mean()) / book.stddev();
  const double* c = book.centroids().data();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j, c += len) {
    double d = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double diff = x[i] - c[i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

void TauConfig::validate() const {
  if (tau_len == 0 || tau_len > kSegmentSamples)
    fail(ErrorCode::kConfig, "tau length must be in [1, 360], got " + std::to_string(tau_len));
  if (stride == 0) fail(ErrorCode::kConfig, "tau stride must be positive");
}

TauSet extract_tau(const Segment& segment, const TauConfig& tau) {
  tau.validate();
  TauSet out;
  const std::size_t count = tau.count();
  for (auto m : kAllChannels) {
    const auto values = segment.channel(m);
    auto& list = out[index_of(m)];
    list.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t start = k * tau.stride;
      list.push_back({m, start, {values.begin() + static_cast<std::ptrdiff_t>(start),
                                 values.begin() + static_cast<std::ptrdiff_t>(start + tau.tau_len)},
                      {}});
    }
  }
  return out;
}

Codebook::Codebook(Mnemonic channel, double mean, double stddev, std::size_t tau_len,
                   std::vector<double> centroids)
    : channel_(channel), mean_(mean), std_(stddev), tau_len_(tau_len), centroids_(std::move(centroids)) {
  if (!(std_ > 0.0) || !std::isfinite(std_))
    fail(ErrorCode::kModelIntegrity, "codebook " + std::string(to_string(channel)) + " has std <= 0");
  if (tau_len_ == 0 || centroids_.empty() || centroids_.size() % tau_len_ != 0)
    fail(ErrorCode::kModelIntegrity, "codebook " + std::string(to_string(channel)) +
                                         " centroid matrix does not match tau length");
}

std::vector<double> Codebook::normalize(std::span<const double> raw) const {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean_) / std_;
  return out;
}

std::size_t Codebook::assign_raw(std::span<const double> raw) const {
  if (raw.size() != tau_len_) fail(ErrorCode::kUsage, "tau length does not match codebook");
  return nearest_normalized(*this, raw.data());
}

std::size_t assign(const Codebook& codebook, TauSegment& tau) {
  if (tau.channel != codebook.channel())
    fail(ErrorCode::kUsage, "tau-segment of " + std::string(to_string(tau.channel)) +
                                " assigned with the " + std::string(to_string(codebook.channel())) +
                                " codebook");
  if (tau.values.size() != codebook.tau_len()) fail(ErrorCode::kUsage, "tau length does not match codebook");
  tau.normalized = codebook.normalize(tau.values);
  return nearest_centroid(codebook.centroids(), codebook.tau_len(), tau.normalized);
}

std::size_t assign(const Codebook& codebook, const TauSegment& tau) {
  TauSegment copy = tau;
  return assign(codebook, copy);
}

CodebookSet::CodebookSet(TauConfig tau, std::vector<Codebook> books) : tau_(tau), books_(std::move(books)) {
  tau_.validate();
  if (books_.size() != kNumChannels) fail(ErrorCode::kModelIntegrity, "codebook set needs 12 channels");
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (books_[c].channel() != kAllChannels[c])
      fail(ErrorCode::kModelIntegrity, "codebooks out of channel order");
    if (books_[c].tau_len() != tau_.tau_len)
      fail(ErrorCode::kModelIntegrity, "codebook tau length differs from the set");
    if (books_[c].size() > kClustersPerChannel)
      fail(ErrorCode::kModelIntegrity, "codebook has more than 200 centroids");
  }
}

// Field order: format, version, tau_len, stride, k, channels[{channel, mean, std, centroids}].
std::string CodebookSet::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "bofx.codebooks";
  j["version"] = kCodebookFormatVersion;
  j["tau_len"] = tau_.tau_len;
  j["stride"] = tau_.stride;
  j["k"] = books_.front().size();
  auto& channels = j["channels"] = nlohmann::ordered_json::array();
  for (const auto& b : books_) {
    nlohmann::ordered_json cb;
    cb["channel"] = std::string(to_string(b.channel()));
    cb["mean"] = b.mean();
    cb["std"] = b.stddev();
    auto& rows = cb["centroids"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto c = b.centroid(i);
      rows.push_back(std::vector<double>(c.begin(), c.end()));
    }
    channels.push_back(std::move(cb));
  }
  return j.dump();
}

CodebookSet CodebookSet::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("codebook file: ") + e.what());
  }
  if (j.value("format", "") != "bofx.codebooks")
    fail(ErrorCode::kFormat, "not a codebook file");
  if (j.value("version", -1) != kCodebookFormatVersion)
    fail(ErrorCode::kFormat, "unsupported codebook version");
  try {
    TauConfig tau{j.at("tau_len").get<std::size_t>(), j.at("stride").get<std::size_t>()};
    std::vector<Codebook> books;
    for (const auto& cb : j.at("channels")) {
      const auto m = parse_mnemonic(cb.at("channel").get<std::string>());
      if (!m) fail(ErrorCode::kFormat, "unknown channel in codebook file");
      std::vector<double> flat;
      for (const auto& row : cb.at("centroids"))
        for (const auto& v : row) flat.push_back(v.get<double>());
      books.emplace_back(*m, cb.at("mean").get<double>(), cb.at("std").get<double>(), tau.tau_len,
                         std::move(flat));
    }
    return CodebookSet(tau, std::move(books));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("codebook file: ") + e.what());
  }
}

void CodebookSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << to_json() << '\n';
}

CodebookSet CodebookSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingArtifact, "codebook file '" + path + "' not found");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

CodebookSet train_codebooks(std::span<const Segment> corpus, const TauConfig& tau,
                            const CodebookTrainConfig& config, CodebookTrainReport* report) {
  tau.validate();
  if (corpus.empty()) fail(ErrorCode::kTraining, "empty codebook corpus");
  const std::size_t len = tau.tau_len;
  const std::size_t per_segment = tau.count();
  std::vector<Codebook> books;
  books.reserve(kNumChannels);
  for (auto m : kAllChannels) {
    // Corpus statistics for z-normalization.
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& seg : corpus)
      for (double v : seg.channel(m)) {
        sum += v;
        ++n;
      }
    const double mean = sum / static_cast<double>(n);
    for (const auto& seg : corpus)
      for (double v : seg.channel(m)) sum_sq += (v - mean) * (v - mean);
    double stddev = std::sqrt(sum_sq / static_cast<double>(n));
    if (!(stddev > 0.0))
      fail(ErrorCode::kTraining, "channel " + std::string(to_string(m)) + " is constant in the corpus");

    std::vector<std::size_t> picks(corpus.size() * per_segment);
    std::iota(picks.begin(), picks.end(), 0);
    std::mt19937_64 rng(config.seed * 1000003ULL + index_of(m) + 1);
    if (picks.size() > config.max_points_per_channel) {
      std::shuffle(picks.begin(), picks.end(), rng);
      picks.resize(config.max_points_per_channel);
      std::sort(picks.begin(), picks.end());
    }
    std::vector<double> points;
    points.reserve(picks.size() * len);
    for (std::size_t p : picks) {
      const auto values = corpus[p / per_segment].channel(m);
      const std::size_t start = (p % per_segment) * tau.stride;
      for (std::size_t i = 0; i < len; ++i) points.push_back((values[start + i] - mean) / stddev);
    }
    KMeansConfig kc{config.k, config.max_iterations, rng()};
    KMeansResult km;
    try {
      km = kmeans(points, len, kc);
    } catch (const Error& e) {
      fail(e.code(), "channel " + std::string(to_string(m)) + ": " + e.what());
    }
    if (report) {
      report->objective_history[index_of(m)] = km.objective_history;
      report->points_used[index_of(m)] = picks.size();
    }
    books.emplace_back(m, mean, stddev, len, std::move(km.centroids));
  }
  return CodebookSet(tau, std::move(books));
}

SegmentIndex::SegmentIndex(TauConfig tau, std::array<std::vector<std::uint16_t>, kNumChannels> labels)
    : tau_(tau), labels_(std::move(labels)) {}

std::vector<std::size_t> SegmentIndex::starts_for(std::size_t feature) const {
  std::vector<std::size_t> out;
  if (feature >= kFeatureWidth) return out;
  const auto& labels = labels_[feature / kClustersPerChannel];
  const auto cluster = static_cast<std::uint16_t>(cluster_of_feature(feature));
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] == cluster) out.push_back(k * tau_.stride);
  return out;
}

Featurization featurize(const Segment& segment, const CodebookSet& codebooks) {
  const TauConfig& tau = codebooks.tau();
  const std::size_t count = tau.count();
  FeatureVector features;
  std::array<std::vector<std::uint16_t>, kNumChannels> labels;
  for (auto m : kAllChannels) {
    const auto values = segment.channel(m);
    const Codebook& book = codebooks[m];
    auto& out = labels[index_of(m)];
    out.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      const auto cluster = nearest_normalized(book, values.data() + k * tau.stride);
      out[k] = static_cast<std::uint16_t>(cluster);
      features.counts[feature_index(m, cluster)] += 1.0f;
    }
  }
  return {std::move(features), SegmentIndex(tau, std::move(labels))};
}

LabelTrack::LabelTrack(const TelemetryLog& log, const CodebookSet& codebooks,
                       std::span<const std::size_t> window_ends)
    : log_(&log), codebooks_(&codebooks) {
  const TauConfig& tau = codebooks.tau();
  std::vector<bool> needed(log.size(), false);
  for (std::size_t end : window_ends) {
    if (end < kSegmentSamples || end > log.size())
      fail(ErrorCode::kWindow, "window end " + std::to_string(end) + " outside log");
    for (std::size_t k = 0; k < tau.count(); ++k) needed[end - kSegmentSamples + k * tau.stride] = true;
  }
  label_positions(needed);
}

LabelTrack::LabelTrack(const TelemetryLog& log, const CodebookSet& codebooks)
    : log_(&log), codebooks_(&codebooks) {
  std::vector<bool> needed(log.size(), false);
  if (log.size() >= codebooks.tau().tau_len)
    std::fill(needed.begin(), needed.begin() + static_cast<std::ptrdiff_t>(log.size() - codebooks.tau().tau_len + 1),
              true);
  label_positions(needed);
}

void LabelTrack::label_positions(const std::vector<bool>& needed) {
  const std::size_t len = codebooks_->tau().tau_len;
  for (auto m : kAllChannels) {
    auto& out = labels_[index_of(m)];
    out.assign(log_->size(), -1);
    const auto values = log_->channel(m);
    const Codebook& book = (*codebooks_)[m];
    for (std::size_t p = 0; p + len <= values.size(); ++p)
      if (needed[p]) out[p] = static_cast<std::int16_t>(nearest_normalized(book, values.data() + p));
  }
}

Featurization LabelTrack::featurize(std::size_t end_index) const {
  if (end_index < kSegmentSamples || end_index > log_->size())
    fail(ErrorCode::kWindow, "window end " + std::to_string(end_index) + " outside log");
  const TauConfig& tau = codebooks_->tau();
  const std::size_t begin = end_index - kSegmentSamples;
  FeatureVector features;
  std::array<std::vector<std::uint16_t>, kNumChannels> labels;
  for (auto m : kAllChannels) {
    const auto& track = labels_[index_of(m)];
    auto& out = labels[index_of(m)];
    out.resize(tau.count());
    for (std::size_t k = 0; k < tau.count(); ++k) {
      const std::int16_t label = track[begin + k * tau.stride];
      if (label < 0) fail(ErrorCode::kUsage, "label track was not built for window end " +
                                                 std::to_string(end_index));
      out[k] = static_cast<std::uint16_t>(label);
      features.counts[feature_index(m, static_cast<std::size_t>(label))] += 1.0f;
    }
  }
  return {std::move(features), SegmentIndex(tau, std::move(labels))};
}

}  // namespace bofx
