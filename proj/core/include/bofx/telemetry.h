#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bofx {

// The twelve WITSML channels, in the frozen column and feature-block order.
enum class Mnemonic : std::uint8_t {
  HKLA, WOB, BPOS, DBTM, DMEA, TQA, RPMA, SPPA, MFIA, MFOA, TVT, GASA
};

inline constexpr std::size_t kNumChannels = 12;
inline constexpr std::array<Mnemonic, kNumChannels> kAllChannels = {
    Mnemonic::HKLA, Mnemonic::WOB,  Mnemonic::BPOS, Mnemonic::DBTM,
    Mnemonic::DMEA, Mnemonic::TQA,  Mnemonic::RPMA, Mnemonic::SPPA,
    Mnemonic::MFIA, Mnemonic::MFOA, Mnemonic::TVT,  Mnemonic::GASA};

constexpr std::size_t index_of(Mnemonic m) { return static_cast<std::size_t>(m); }
std::string_view to_string(Mnemonic m);
std::optional<Mnemonic> parse_mnemonic(std::string_view name);

enum class AccidentType : std::uint8_t { Stuck, Mudloss, KickFlow, Washout };

inline constexpr std::size_t kNumAccidentTypes = 4;
inline constexpr std::array<AccidentType, kNumAccidentTypes> kAllAccidentTypes = {
    AccidentType::Stuck, AccidentType::Mudloss, AccidentType::KickFlow, AccidentType::Washout};

constexpr std::size_t index_of(AccidentType t) { return static_cast<std::size_t>(t); }
std::string_view to_string(AccidentType t);
std::optional<AccidentType> parse_accident_type(std::string_view name);

inline constexpr double kStepSeconds = 10.0;
// One hour on the 10-second grid.
inline constexpr std::size_t kSegmentSamples = 360;

struct Sample {
  double time = 0.0;  // seconds since epoch
  double value = 0.0;
};

// Telemetry as read from disk: per-channel irregular samples, gaps allowed.
struct RawLog {
  std::string well_id;
  std::array<std::vector<Sample>, kNumChannels> channels;

  const std::vector<Sample>& channel(Mnemonic m) const { return channels[index_of(m)]; }
  std::vector<Sample>& channel(Mnemonic m) { return channels[index_of(m)]; }
};

struct ChannelLimits {
  double min = 0.0;
  double max = 0.0;

  bool contains(double v) const { return v >= min && v <= max; }
};

class ValidityLimits {
 public:
  // Repo defaults: physically plausible bounds per channel.
  static ValidityLimits defaults();
  static ValidityLimits load(const std::string& path);

  explicit ValidityLimits(const std::array<ChannelLimits, kNumChannels>& limits);

  const ChannelLimits& operator[](Mnemonic m) const { return limits_[index_of(m)]; }
  bool contains(Mnemonic m, double v) const { return limits_[index_of(m)].contains(v); }
  void save(const std::string& path) const;

 private:
  std::array<ChannelLimits, kNumChannels> limits_;
};

// Half-open range of sample indices [begin, end).
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool intersects(const SampleRange& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const SampleRange&, const SampleRange&) = default;
};

// Cleaned telemetry on a uniform grid. Immutable once constructed.
class TelemetryLog {
 public:
  TelemetryLog(std::string well_id, double start_time, double step,
               std::array<std::vector<double>, kNumChannels> values);

  const std::string& well_id() const { return well_id_; }
  double start_time() const { return start_time_; }
  double step() const { return step_; }
  std::size_t size() const { return values_[0].size(); }
  double time_at(std::size_t index) const { return start_time_ + step_ * static_cast<double>(index); }
  // One past the last sample time.
  double end_time() const { return time_at(size()); }
  std::span<const double> channel(Mnemonic m) const { return values_[index_of(m)]; }

  // Index of the last grid point at or before `t` (clamped to [0, size]).
  std::size_t index_at_or_before(double t) const;

 private:
  std::string well_id_;
  double start_time_;
  double step_;
  std::array<std::vector<double>, kNumChannels> values_;
};

// A one-hour view [end - 360, end) into a TelemetryLog. The log must outlive it.
class Segment {
 public:
  Segment(const TelemetryLog& log, std::size_t end_index);

  const TelemetryLog& log() const { return *log_; }
  std::size_t begin_index() const { return end_ - kSegmentSamples; }
  std::size_t end_index() const { return end_; }
  double end_time() const { return log_->time_at(end_); }
  std::span<const double> channel(Mnemonic m) const {
    return log_->channel(m).subspan(begin_index(), kSegmentSamples);
  }

 private:
  const TelemetryLog* log_;
  std::size_t end_;
};

struct AccidentEvent {
  std::string well_id;
  AccidentType type = AccidentType::Stuck;
  double event_time = 0.0;
  // Alarms inside [region_start, region_end] count as correct for this event.
  double region_start = 0.0;
  double region_end = 0.0;

  bool region_contains(double t) const { return t >= region_start && t <= region_end; }
};

// Expert-style anomaly interval on one channel, attached to an event.
struct ReferenceInterval {
  std::string well_id;
  double event_time = 0.0;
  Mnemonic channel = Mnemonic::HKLA;
  double start = 0.0;  // seconds, inclusive
  double end = 0.0;    // seconds, exclusive
};

// Accepts ISO-8601 UTC ("2021-05-01T12:00:00Z", fractional seconds allowed) or epoch seconds.
double parse_time(std::string_view text);

RawLog parse_csv(const std::string& path);
RawLog parse_csv(std::istream& in, std::string well_id);
void write_csv(const TelemetryLog& log, const std::string& path);
void write_csv(const TelemetryLog& log, std::ostream& out);

// Clip-then-fill resampling onto the uniform grid. Out-of-range samples are
// dropped; the grid takes the last valid observation at or before each point.
TelemetryLog clean(const RawLog& raw, const ValidityLimits& limits, double step = kStepSeconds);

// Inverse of clean for already-clean logs (one sample per grid point).
RawLog to_raw(const TelemetryLog& log);

// One-hour segment ending at `end_time` (end-aligned to the grid, rounding down).
Segment window(const TelemetryLog& log, double end_time);

std::vector<AccidentEvent> read_events(const std::string& path);
void write_events(const std::vector<AccidentEvent>& events, const std::string& path);
std::vector<ReferenceInterval> read_references(const std::string& path);
void write_references(const std::vector<ReferenceInterval>& refs, const std::string& path);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace bofx
