#include "bofx/telemetry.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bofx/error.h"
#include "json.hpp"

namespace bofx {

namespace {

constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "HKLA", "WOB", "BPOS", "DBTM", "DMEA", "TQA", "RPMA", "SPPA", "MFIA", "MFOA", "TVT", "GASA"};

constexpr std::array<std::string_view, kNumAccidentTypes> kAccidentNames = {
    "Stuck", "Mudloss", "KickFlow", "Washout"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

template <typename Int>
bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, Int& out) {
  if (pos + len > s.size()) return false;
  const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc() && ptr == s.data() + pos + len;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingArtifact, "cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name, const std::string& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      fail(ErrorCode::kSchema, "'" + path + "' is missing column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_table(const std::string& path) {
  auto in = open_input(path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kSchema, "'" + path + "' is empty");
  for (auto f : split(line)) t.header.emplace_back(f);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto f : split(line)) row.emplace_back(f);
    row.resize(t.header.size());
    t.rows.push_back(std::move(row));
  }
  return t;
}

double require_number(std::string_view cell, const std::string& what) {
  const auto v = parse_number(cell);
  if (!v) fail(ErrorCode::kFormat, "bad numeric value '" + std::string(cell) + "' for " + what);
  return *v;
}

}  // namespace

std::string_view to_string(Mnemonic m) { return kChannelNames[index_of(m)]; }

std::optional<Mnemonic> parse_mnemonic(std::string_view name) {
  for (std::size_t i = 0; i < kNumChannels; ++i)
    if (kChannelNames[i] == name) return kAllChannels[i];
  return std::nullopt;
}

std::string_view to_string(AccidentType t) { return kAccidentNames[index_of(t)]; }

std::optional<AccidentType> parse_accident_type(std::string_view name) {
  for (std::size_t i = 0; i < kNumAccidentTypes; ++i)
    if (kAccidentNames[i] == name) return kAllAccidentTypes[i];
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ValidityLimits ValidityLimits::defaults() {
  // Repo convention, not field-calibrated values.
  return ValidityLimits({{
      {0.0, 500.0},     // HKLA, t
      {0.0, 100.0},     // WOB, t
      {-5.0, 60.0},     // BPOS, m
      {0.0, 10000.0},   // DBTM, m
      {0.0, 10000.0},   // DMEA, m
      {0.0, 100.0},     // TQA, kN*m
      {0.0, 400.0},     // RPMA, rpm
      {0.0, 600.0},     // SPPA, bar
      {0.0, 150.0},     // MFIA, l/s
      {0.0, 150.0},     // MFOA, l/s
      {0.0, 1000.0},    // TVT, m3
      {0.0, 100.0},     // GASA, %
  }});
}

ValidityLimits::ValidityLimits(const std::array<ChannelLimits, kNumChannels>& limits)
    : limits_(limits) {
  for (std::size_t i = 0; i < kNumChannels; ++i)
    if (!(limits_[i].min < limits_[i].max))
      fail(ErrorCode::kConfig, "limits for " + std::string(kChannelNames[i]) + " need min < max");
}

ValidityLimits ValidityLimits::load(const std::string& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "'" + path + "': " + e.what());
  }
  std::array<ChannelLimits, kNumChannels> limits{};
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    const std::string name(kChannelNames[i]);
    if (!j.contains(name)) fail(ErrorCode::kSchema, "'" + path + "' is missing limits for " + name);
    const auto& entry = j.at(name);
    if (!entry.contains("min") || !entry.contains("max"))
      fail(ErrorCode::kSchema, "limits for " + name + " need 'min' and 'max'");
    limits[i] = {entry.at("min").get<double>(), entry.at("max").get<double>()};
  }
  return ValidityLimits(limits);
}

void ValidityLimits::save(const std::string& path) const {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kNumChannels; ++i)
    j[std::string(kChannelNames[i])] = {{"min", limits_[i].min}, {"max", limits_[i].max}};
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

TelemetryLog::TelemetryLog(std::string well_id, double start_time, double step,
                           std::array<std::vector<double>, kNumChannels> values)
    : well_id_(std::move(well_id)), start_time_(start_time), step_(step), values_(std::move(values)) {
  if (!(step_ > 0.0)) fail(ErrorCode::kConfig, "grid step must be positive");
  for (const auto& v : values_)
    if (v.size() != values_[0].size())
      fail(ErrorCode::kFormat, "telemetry channels have unequal lengths");
}

std::size_t TelemetryLog::index_at_or_before(double t) const {
  const double rel = std::floor((t - start_time_) / step_ + 1e-9);
  if (rel <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(rel), size());
}

Segment::Segment(const TelemetryLog& log, std::size_t end_index) : log_(&log), end_(end_index) {
  if (end_index < kSegmentSamples)
    fail(ErrorCode::kWindow, "segment needs one hour of history before index " +
                                 std::to_string(end_index));
  if (end_index > log.size())
    fail(ErrorCode::kWindow, "segment end " + std::to_string(end_index) + " is past the log end " +
                                 std::to_string(log.size()));
}

double parse_time(std::string_view text) {
  text = trim(text);
  if (const auto v = parse_number(text)) return *v;
  // YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]
  std::int64_t year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  const bool ok = text.size() >= 19 && parse_fixed(text, 0, 4, year) && text[4] == '-' &&
                  parse_fixed(text, 5, 2, month) && text[7] == '-' && parse_fixed(text, 8, 2, day) &&
                  (text[10] == 'T' || text[10] == ' ') && parse_fixed(text, 11, 2, hour) &&
                  text[13] == ':' && parse_fixed(text, 14, 2, minute) && text[16] == ':' &&
                  parse_fixed(text, 17, 2, second);
  if (!ok || month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    fail(ErrorCode::kFormat, "unparseable timestamp '" + std::string(text) + "'");
  double seconds = static_cast<double>(days_from_civil(year, month, day)) * 86400.0 +
                   hour * 3600.0 + minute * 60.0 + second;
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
    const auto frac = parse_number(std::string("0") + std::string(text.substr(pos, end - pos)));
    if (!frac) fail(ErrorCode::kFormat, "bad fractional seconds in '" + std::string(text) + "'");
    seconds += *frac;
    pos = end;
  }
  if (pos < text.size()) {
    const std::string_view zone = text.substr(pos);
    if (zone == "Z") return seconds;
    unsigned zh = 0, zm = 0;
    if (zone.size() != 6 || (zone[0] != '+' && zone[0] != '-') || !parse_fixed(zone, 1, 2, zh) ||
        zone[3] != ':' || !parse_fixed(zone, 4, 2, zm))
      fail(ErrorCode::kFormat, "bad zone offset in '" + std::string(text) + "'");
    const double offset = zh * 3600.0 + zm * 60.0;
    seconds += zone[0] == '+' ? -offset : offset;
  }
  return seconds;
}

RawLog parse_csv(std::istream& in, std::string well_id) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kSchema, "telemetry file is empty");
  const auto header = split(line);
  std::optional<std::size_t> time_col;
  std::array<std::optional<std::size_t>, kNumChannels> cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "time") time_col = i;
    if (const auto m = parse_mnemonic(header[i])) cols[index_of(*m)] = i;
  }
  std::string missing;
  if (!time_col) missing = "time";
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (cols[c]) continue;
    if (!missing.empty()) missing += ", ";
    missing += kChannelNames[c];
  }
  if (!missing.empty()) fail(ErrorCode::kSchema, "telemetry header is missing column(s) " + missing);

  RawLog raw;
  raw.well_id = std::move(well_id);
  double last_time = -std::numeric_limits<double>::infinity();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= *time_col)
      fail(ErrorCode::kFormat, "line " + std::to_string(line_no) + " has no time cell");
    const double t = parse_time(cells[*time_col]);
    if (!(t > last_time))
      fail(ErrorCode::kFormat, "timestamps not strictly increasing at line " + std::to_string(line_no));
    last_time = t;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      if (*cols[c] >= cells.size()) continue;
      if (const auto v = parse_number(cells[*cols[c]])) raw.channels[c].push_back({t, *v});
    }
  }
  return raw;
}

RawLog parse_csv(const std::string& path) {
  auto in = open_input(path);
  std::string stem = path;
  if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (const auto dot = stem.rfind('.'); dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  return parse_csv(in, stem);
}

void write_csv(const TelemetryLog& log, std::ostream& out) {
  out << "time";
  for (auto name : kChannelNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < log.size(); ++i) {
    out << format_double(log.time_at(i));
    for (auto m : kAllChannels) out << ',' << format_double(log.channel(m)[i]);
    out << '\n';
  }
}

void write_csv(const TelemetryLog& log, const std::string& path) {
  auto out = open_output(path);
  write_csv(log, out);
}

TelemetryLog clean(const RawLog& raw, const ValidityLimits& limits, double step) {
  if (!(step > 0.0)) fail(ErrorCode::kConfig, "grid step must be positive");
  std::array<std::vector<Sample>, kNumChannels> valid;
  double first_valid = -std::numeric_limits<double>::infinity();
  double last_sample = -std::numeric_limits<double>::infinity();
  for (auto m : kAllChannels) {
    const auto& samples = raw.channel(m);
    auto& kept = valid[index_of(m)];
    for (const auto& s : samples)
      if (std::isfinite(s.value) && limits.contains(m, s.value)) kept.push_back(s);
    if (kept.empty())
      fail(ErrorCode::kGap, "channel " + std::string(to_string(m)) + " of well '" + raw.well_id +
                                "' has no valid sample");
    first_valid = std::max(first_valid, kept.front().time);
    last_sample = std::max(last_sample, samples.back().time);
  }
  const double start = std::ceil(first_valid / step - 1e-9) * step;
  const double stop = std::floor(last_sample / step + 1e-9) * step;
  if (stop < start)
    fail(ErrorCode::kGap, "well '" + raw.well_id + "' has no grid point where every channel is valid");
  const auto n = static_cast<std::size_t>(std::llround((stop - start) / step)) + 1;

  std::array<std::vector<double>, kNumChannels> values;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto& kept = valid[c];
    auto& out = values[c];
    out.resize(n);
    std::size_t next = 0;
    double current = kept.front().value;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = start + step * static_cast<double>(i);
      while (next < kept.size() && kept[next].time <= t + 1e-6) current = kept[next++].value;
      out[i] = current;
    }
  }
  return TelemetryLog(raw.well_id, start, step, std::move(values));
}

RawLog to_raw(const TelemetryLog& log) {
  RawLog raw;
  raw.well_id = log.well_id();
  for (auto m : kAllChannels) {
    auto& out = raw.channel(m);
    const auto values = log.channel(m);
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back({log.time_at(i), values[i]});
  }
  return raw;
}

Segment window(const TelemetryLog& log, double end_time) {
  const double rel = std::floor((end_time - log.start_time()) / log.step() + 1e-9);
  if (rel < static_cast<double>(kSegmentSamples))
    fail(ErrorCode::kWindow, "less than one hour of history before t=" + format_double(end_time));
  if (rel > static_cast<double>(log.size()))
    fail(ErrorCode::kWindow, "window end t=" + format_double(end_time) + " is past the log end");
  return Segment(log, static_cast<std::size_t>(rel));
}

std::vector<AccidentEvent> read_events(const std::string& path) {
  const auto t = read_table(path);
  const auto well = t.column("well_id", path), type = t.column("type", path),
             ev = t.column("event_time", path), rs = t.column("region_start", path),
             re = t.column("region_end", path);
  std::vector<AccidentEvent> events;
  for (const auto& row : t.rows) {
    AccidentEvent e;
    e.well_id = row[well];
    const auto parsed = parse_accident_type(row[type]);
    if (!parsed) fail(ErrorCode::kFormat, "unknown accident type '" + row[type] + "'");
    e.type = *parsed;
    e.event_time = parse_time(row[ev]);
    e.region_start = parse_time(row[rs]);
    e.region_end = parse_time(row[re]);
    if (!e.region_contains(e.event_time))
      fail(ErrorCode::kFormat, "event region of well '" + e.well_id + "' does not contain its event time");
    events.push_back(std::move(e));
  }
  return events;
}

void write_events(const std::vector<AccidentEvent>& events, const std::string& path) {
  auto out = open_output(path);
  out << "well_id,type,event_time,region_start,region_end\n";
  for (const auto& e : events)
    out << e.well_id << ',' << to_string(e.type) << ',' << format_double(e.event_time) << ','
        << format_double(e.region_start) << ',' << format_double(e.region_end) << '\n';
}

std::vector<ReferenceInterval> read_references(const std::string& path) {
  const auto t = read_table(path);
  const auto well = t.column("well_id", path), ev = t.column("event_time", path),
             ch = t.column("channel", path), st = t.column("start", path), en = t.column("end", path);
  std::vector<ReferenceInterval> refs;
  for (const auto& row : t.rows) {
    ReferenceInterval r;
    r.well_id = row[well];
    r.event_time = parse_time(row[ev]);
    const auto m = parse_mnemonic(row[ch]);
    if (!m) fail(ErrorCode::kFormat, "unknown channel '" + row[ch] + "' in '" + path + "'");
    r.channel = *m;
    r.start = require_number(row[st], "reference start");
    r.end = require_number(row[en], "reference end");
    if (!(r.start < r.end)) fail(ErrorCode::kFormat, "empty reference interval in '" + path + "'");
    refs.push_back(std::move(r));
  }
  return refs;
}

void write_references(const std::vector<ReferenceInterval>& refs, const std::string& path) {
  auto out = open_output(path);
  out << "well_id,event_time,channel,start,end\n";
  for (const auto& r : refs)
    out << r.well_id << ',' << format_double(r.event_time) << ',' << to_string(r.channel) << ','
        << format_double(r.start) << ',' << format_double(r.end) << '\n';
}

}  // namespace bofx
