#include "bofx/synthgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

#include "bofx/error.h"

namespace bofx {

std::vector<Mnemonic> signature_channels(AccidentType type) {
  switch (type) {
    case AccidentType::Stuck: return {Mnemonic::HKLA, Mnemonic::BPOS, Mnemonic::TQA};
    case AccidentType::KickFlow: return {Mnemonic::GASA, Mnemonic::TVT, Mnemonic::MFOA};
    case AccidentType::Mudloss: return {Mnemonic::TVT, Mnemonic::SPPA};
    case AccidentType::Washout: return {Mnemonic::SPPA, Mnemonic::TQA, Mnemonic::MFOA};
  }
  return {};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Regime : std::uint8_t { kDrilling, kConnection };

struct Plan {
  std::optional<AccidentType> type;
  std::size_t sig_start = 0;  // sample indices
  std::size_t event = 0;
  std::size_t tail_end = 0;
};

constexpr std::size_t kConnectionBefore = 45;  // samples (7.5 min)
constexpr double kWorkPeriod = 12.0;  // samples per pipe-working or spike cycle
constexpr double kErraticPole = 0.9;
constexpr double kErraticShare = 0.25;

std::vector<Regime> schedule_regimes(std::size_t n, const Plan& plan, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> drill_len(120, 360);
  std::uniform_int_distribution<std::size_t> conn_len(30, 60);
  std::vector<Regime> r(n, Regime::kDrilling);
  std::size_t zone_begin = n, zone_end = n;
  if (plan.type) {
    zone_begin = plan.sig_start >= 90 ? plan.sig_start - 90 : 0;
    zone_end = std::min(n, plan.tail_end + 60);
  }
  std::size_t t = 0;
  bool drilling = std::bernoulli_distribution(0.7)(rng);
  while (t < n) {
    if (t >= zone_begin && t < zone_end) {
      t = zone_end;
      drilling = false;
      continue;
    }
    std::size_t len = drilling ? drill_len(rng) : conn_len(rng);
    std::size_t end = std::min(n, t + len);
    if (zone_begin >= kConnectionBefore && t < zone_begin && end > zone_begin - kConnectionBefore) {
      // A connection resets the block right before the forced drilling zone.
      const std::size_t cb = zone_begin - kConnectionBefore;
      for (std::size_t i = t; i < cb; ++i) r[i] = drilling ? Regime::kDrilling : Regime::kConnection;
      for (std::size_t i = cb; i < zone_begin; ++i) r[i] = Regime::kConnection;
      t = zone_begin;
      continue;
    }
    for (std::size_t i = t; i < end; ++i) r[i] = drilling ? Regime::kDrilling : Regime::kConnection;
    t = end;
    drilling = !drilling;
  }
  return r;
}

// One channel's share of a signature, active on samples [start, end).
struct Effect {
  AccidentType type = AccidentType::Stuck;
  Mnemonic channel = Mnemonic::HKLA;
  std::size_t start = 0;
  std::size_t end = 0;
  double a = 0.0;  // amplitude position in [0, 1]
  double z = 0.0;  // AR(1) state of the erratic component
  double onset = 1.0;  // samples to full amplitude
};

struct Reading {
  double hkla, bpos, tqa, spp, mfia, mfoa, gas, tvt_shift;
};

void apply(Effect& e, std::size_t i, Reading& s, std::mt19937_64& rng) {
  const double elapsed = static_cast<double>(i - e.start);
  const double cycle = 2.0 * std::numbers::pi * elapsed / kWorkPeriod;
  const double g = 1.0 + 0.1 * (e.a - 0.5);  // per-event gain
  e.z = kErraticPole * e.z + std::sqrt(1.0 - kErraticPole * kErraticPole) * std::normal_distribution<double>()(rng);
  const double r = std::min(1.0, (elapsed + 1.0) / e.onset);
  const double w = r * (g + kErraticShare * e.z);
  switch (e.type) {
    case AccidentType::Stuck:
      if (e.channel == Mnemonic::HKLA) s.hkla += 50.0 * w;
      // Stalled block worked up and down mid-mast.
      if (e.channel == Mnemonic::BPOS) s.bpos += r * (15.0 + 8.0 * (w / r) * std::sin(cycle) - s.bpos);
      if (e.channel == Mnemonic::TQA && std::fmod(elapsed, kWorkPeriod) < 4.0) s.tqa += 10.0 * w;
      break;
    case AccidentType::KickFlow:
      if (e.channel == Mnemonic::GASA) s.gas += 15.0 * w;
      if (e.channel == Mnemonic::TVT) s.tvt_shift += 30.0 * w;
      if (e.channel == Mnemonic::MFOA) s.mfoa += 0.3 * w * s.mfia;
      break;
    case AccidentType::Mudloss:
      if (e.channel == Mnemonic::TVT) s.tvt_shift -= 30.0 * w;
      if (e.channel == Mnemonic::SPPA) s.spp -= 65.0 * w;
      break;
    case AccidentType::Washout:
      if (e.channel == Mnemonic::SPPA) s.spp -= 35.0 * w;
      if (e.channel == Mnemonic::TQA) s.tqa -= 6.0 * w;
      if (e.channel == Mnemonic::MFOA) s.mfoa -= 0.25 * w * s.mfia;
      break;
  }
}

// The accident's effects plus benign single-channel excursions away from it.
std::vector<Effect> plan_effects(std::size_t n, const Plan& plan, const GenConfig& cfg, std::mt19937_64& rng) {
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto make = [&](AccidentType t, Mnemonic m, std::size_t start, std::size_t end) {
    Effect e;
    e.type = t;
    e.channel = m;
    e.start = start;
    e.end = end;
    e.a = uni(0.0, 1.0);
    e.z = std::normal_distribution<double>()(rng);
    e.onset = uni(18.0, 60.0);
    return e;
  };
  std::vector<Effect> out;
  std::size_t quiet_begin = n, quiet_end = n;
  if (plan.type) {
    for (Mnemonic m : signature_channels(*plan.type)) out.push_back(make(*plan.type, m, plan.sig_start, plan.tail_end));
    quiet_begin = plan.sig_start >= 360 ? plan.sig_start - 360 : 0;
    quiet_end = std::min(n, plan.tail_end + 60);
  }
  std::vector<std::pair<AccidentType, Mnemonic>> pool;
  for (AccidentType t : kAllAccidentTypes)
    for (Mnemonic m : signature_channels(t)) pool.emplace_back(t, m);
  const auto len_lo = static_cast<std::size_t>(std::llround(cfg.lead_min_minutes * 6.0));
  const auto len_hi = static_cast<std::size_t>(std::llround(cfg.lead_max_minutes * 6.0));
  for (std::size_t k = 0; k < cfg.excursions && len_hi < n; ++k) {
    const auto [t, m] = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    const std::size_t len = std::uniform_int_distribution<std::size_t>(len_lo, len_hi)(rng);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const std::size_t s = std::uniform_int_distribution<std::size_t>(0, n - len)(rng);
      if (s + len > quiet_begin && s < quiet_end) continue;
      out.push_back(make(t, m, s, s + len));
      break;
    }
  }
  return out;
}

TelemetryLog simulate_well(const std::string& id, double start_time, std::size_t n, const Plan& plan,
                           const GenConfig& cfg, std::mt19937_64& rng, Signature* sig) {
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto sigma = default_noise();
  const auto regimes = schedule_regimes(n, plan, rng);
  auto effects = plan_effects(n, plan, cfg, rng);

  const double rop = uni(12.0, 18.0);  // m/h
  const double wob_set = uni(9.0, 11.0);
  const double tq_set = uni(11.5, 12.5);
  const double rpm_set = uni(100.0, 140.0);
  const double spp_set = uni(198.0, 202.0);
  const double flow_set = uni(39.5, 40.5);
  double depth = uni(2200.0, 2300.0);
  double bpos = uni(20.0, 28.0);
  double tvt = uni(198.0, 202.0);
  const double gas_base = uni(0.5, 1.5);

  std::array<std::vector<double>, kNumChannels> v;
  for (auto& c : v) c.assign(n, 0.0);
  std::size_t conn_pos = 0;
  double conn_start_bpos = bpos;
  for (std::size_t i = 0; i < n; ++i) {
    const bool drilling = regimes[i] == Regime::kDrilling;
    double wob, rpm, dbtm;
    Reading s{};
    const double string_weight = 110.0 + 0.02 * depth;
    if (drilling) {
      conn_pos = 0;
      const double dz = rop / 360.0;
      depth += dz;
      bpos = std::max(bpos - dz, 0.5);
      wob = wob_set;
      s.hkla = string_weight - wob;
      s.tqa = tq_set;
      rpm = rpm_set;
      s.spp = spp_set;
      s.mfia = flow_set;
      s.mfoa = 0.98 * flow_set;
      dbtm = depth;
      tvt += 0.002;
    } else {
      if (conn_pos == 0) conn_start_bpos = bpos;
      ++conn_pos;
      const double phase = std::min(1.0, static_cast<double>(conn_pos) / 30.0);
      bpos = conn_start_bpos + (28.0 - conn_start_bpos) * phase;
      wob = 0.0;
      s.hkla = conn_pos > 6 && conn_pos < 24 ? 25.0 : string_weight;
      s.tqa = 0.3;
      rpm = 0.0;
      const double pumps = std::max(0.0, 1.0 - static_cast<double>(conn_pos) / 6.0);
      s.spp = 3.0 + (spp_set - 3.0) * pumps;
      s.mfia = flow_set * pumps;
      s.mfoa = 0.98 * flow_set * std::max(0.0, 1.0 - static_cast<double>(conn_pos) / 12.0);
      dbtm = depth - 3.0 * phase;
      tvt += 0.01;
    }
    tvt += 0.02 * gauss(rng);
    s.bpos = bpos;
    s.gas = gas_base;
    for (auto& e : effects)
      if (i >= e.start && i < e.end) apply(e, i, s, rng);

    const double ns = cfg.noise_scale;
    auto put = [&](Mnemonic m, double value) {
      const double x = value + ns * sigma[index_of(m)] * gauss(rng);
      v[index_of(m)][i] = x;
    };
    put(Mnemonic::HKLA, s.hkla);
    put(Mnemonic::WOB, wob);
    put(Mnemonic::BPOS, s.bpos);
    put(Mnemonic::DBTM, dbtm);
    put(Mnemonic::DMEA, depth);
    put(Mnemonic::TQA, s.tqa);
    put(Mnemonic::RPMA, rpm);
    put(Mnemonic::SPPA, s.spp);
    put(Mnemonic::MFIA, s.mfia);
    put(Mnemonic::MFOA, s.mfoa);
    put(Mnemonic::TVT, tvt + s.tvt_shift);
    put(Mnemonic::GASA, std::abs(s.gas));
  }

  const auto limits = ValidityLimits::defaults();
  for (Mnemonic m : kAllChannels) {
    const auto& l = limits[m];
    for (double& x : v[index_of(m)]) {
      x = std::clamp(x, l.min, l.max);
      // Three decimals keep the CSV compact and round-trip exact.
      x = std::round(x * 1000.0) / 1000.0;
    }
  }
  if (plan.type && sig) {
    sig->well_id = id;
    sig->type = *plan.type;
    sig->start = start_time + kStepSeconds * static_cast<double>(plan.sig_start);
    sig->event = start_time + kStepSeconds * static_cast<double>(plan.event);
    sig->channels = signature_channels(*plan.type);
  }
  return TelemetryLog(id, start_time, kStepSeconds, std::move(v));
}

}  // namespace

std::array<double, kNumChannels> default_noise() {
  std::array<double, kNumChannels> s{};
  s[index_of(Mnemonic::HKLA)] = 2.0;
  s[index_of(Mnemonic::WOB)] = 0.5;
  s[index_of(Mnemonic::BPOS)] = 0.05;
  s[index_of(Mnemonic::DBTM)] = 0.01;
  s[index_of(Mnemonic::DMEA)] = 0.01;
  s[index_of(Mnemonic::TQA)] = 0.5;
  s[index_of(Mnemonic::RPMA)] = 2.0;
  s[index_of(Mnemonic::SPPA)] = 2.0;
  s[index_of(Mnemonic::MFIA)] = 0.4;
  s[index_of(Mnemonic::MFOA)] = 0.6;
  s[index_of(Mnemonic::TVT)] = 0.15;
  s[index_of(Mnemonic::GASA)] = 0.1;
  return s;
}

void GenConfig::validate() const {
  if (!(hours >= 2.0)) fail(ErrorCode::kConfig, "hours per well must be at least 2");
  if (!(noise_scale >= 0.0)) fail(ErrorCode::kConfig, "noise scale must be non-negative");
  if (!(lead_min_minutes > 0.0 && lead_max_minutes >= lead_min_minutes))
    fail(ErrorCode::kConfig, "lead time range is invalid");
  if (!(region_tail_minutes >= 0.0)) fail(ErrorCode::kConfig, "region tail must be non-negative");
  if (std::fmod(start_time, kStepSeconds) != 0.0) fail(ErrorCode::kConfig, "start time must lie on the 10-s grid");
  const std::size_t total = std::accumulate(schedule.begin(), schedule.end(), std::size_t{0});
  if (total > wells)
    fail(ErrorCode::kConfig, "schedule of " + std::to_string(total) + " accidents does not fit " +
                                 std::to_string(wells) + " wells (one accident per well)");
  // One hour of history, the lead window, and room for the region tail.
  const double needed = 90.0 + lead_max_minutes + region_tail_minutes + 30.0;
  if (total > 0 && hours * 60.0 < needed)
    fail(ErrorCode::kConfig, "wells of " + format_double(hours) + " h are too short for the accident schedule");
}

SyntheticData generate(const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::optional<AccidentType>> assignment(cfg.wells);
  {
    std::vector<std::size_t> order(cfg.wells);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t next = 0;
    for (AccidentType t : kAllAccidentTypes)
      for (std::size_t k = 0; k < cfg.schedule[index_of(t)]; ++k) assignment[order[next++]] = t;
  }

  SyntheticData out;
  const auto n = static_cast<std::size_t>(std::llround(cfg.hours * 3600.0 / kStepSeconds));
  for (std::size_t w = 0; w < cfg.wells; ++w) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "well-%02zu", w + 1);
    const std::string id = buf;
    const double start = cfg.start_time + 86400.0 * static_cast<double>(w);
    std::mt19937_64 wrng(splitmix64(cfg.seed ^ splitmix64(w + 1)));
    Plan plan;
    plan.type = assignment[w];
    if (plan.type) {
      auto minutes = [](double m) { return static_cast<std::size_t>(std::llround(m * 6.0)); };
      const std::size_t lead = minutes(std::uniform_real_distribution<double>(cfg.lead_min_minutes,
                                                                               cfg.lead_max_minutes)(wrng));
      const std::size_t lo = minutes(90.0) + lead;
      const std::size_t hi = n - minutes(30.0) - minutes(cfg.region_tail_minutes);
      plan.event = std::uniform_int_distribution<std::size_t>(lo, hi)(wrng);
      plan.sig_start = plan.event - lead;
      plan.tail_end = std::min(n, plan.event + minutes(cfg.region_tail_minutes));
    }
    Signature sig;
    out.logs.push_back(simulate_well(id, start, n, plan, cfg, wrng, &sig));
    if (plan.type) {
      const double tail = cfg.region_tail_minutes * 60.0;
      out.events.push_back({id, *plan.type, sig.event, sig.start, std::min(sig.event + tail, out.logs.back().end_time() - kStepSeconds)});
      for (Mnemonic m : sig.channels) out.references.push_back({id, sig.event, m, sig.start, sig.event});
      out.signatures.push_back(std::move(sig));
    }
  }
  return out;
}

void write_dataset(const SyntheticData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "wells", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + dir + "/wells': " + ec.message());
  for (const auto& log : data.logs) write_csv(log, (fs::path(dir) / "wells" / (log.well_id() + ".csv")).string());
  write_events(data.events, (fs::path(dir) / "events.csv").string());
  write_references(data.references, (fs::path(dir) / "references.csv").string());
}

Dataset read_dataset(const std::string& dir, const ValidityLimits& limits) {
  namespace fs = std::filesystem;
  const fs::path wells = fs::path(dir) / "wells";
  if (!fs::is_directory(wells)) fail(ErrorCode::kMissingArtifact, "dataset directory '" + wells.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(wells))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Dataset out;
  for (const auto& f : files) out.logs.push_back(clean(parse_csv(f.string()), limits));
  out.events = read_events((fs::path(dir) / "events.csv").string());
  out.references = read_references((fs::path(dir) / "references.csv").string());
  return out;
}

}  // namespace bofx
