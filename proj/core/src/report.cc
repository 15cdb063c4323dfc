#include "bofx/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "bofx/error.h"
#include "bofx/svg.h"

namespace bofx {

namespace {

using nlohmann::json;

std::string fmt(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string utc(double t) {
  const auto secs = static_cast<long long>(std::floor(t));
  const long long days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
  const long long rem = secs - days * 86400;
  // Civil date from days since 1970-01-01.
  long long z = days + 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const long long doe = z - era * 146097;
  const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long long mp = (5 * doy + 2) / 153;
  const long long d = doy - (153 * mp + 2) / 5 + 1;
  const long long m = mp < 10 ? mp + 3 : mp - 9;
  const long long y = yoe + era * 400 + (m <= 2);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lld %02lld:%02lld", y, m, d, rem / 3600, rem % 3600 / 60);
  return buf;
}

json parse_metrics(const std::string& text) {
  try {
    auto j = json::parse(text);
    if (j.value("format", "") != "bofx.metrics") fail(ErrorCode::kFormat, "not a metrics document");
    return j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("metrics document is not valid JSON: ") + e.what());
  }
}

constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kRowHeight = 46.0;
constexpr double kRowGap = 6.0;

}  // namespace

std::string case_svg(const CaseFigure& figure) {
  const double width = 900.0;
  const double plot_w = width - kLeft - kRight;
  const std::size_t rows = kNumChannels + 1;
  const double top = 34.0;
  const double height = top + static_cast<double>(rows) * (kRowHeight + kRowGap) + 30.0;
  Svg svg(width, height);
  svg.text(kLeft, 18.0,
           figure.well_id + "  " + std::string(to_string(figure.type)) + "  at " + utc(figure.time) + " UTC", 13.0);

  const std::size_t n = kSegmentSamples;
  auto x_of = [&](double i) { return kLeft + plot_w * i / static_cast<double>(n); };
  auto row_y = [&](std::size_t r) { return top + static_cast<double>(r) * (kRowHeight + kRowGap); };

  // Alarm region, shaded across every row.
  const double seg_end = figure.segment_start_time + figure.step * static_cast<double>(n);
  const double rs = std::clamp(figure.region_start, figure.segment_start_time, seg_end);
  const double re = std::clamp(figure.region_end, figure.segment_start_time, seg_end);
  if (re > rs) {
    const double i0 = (rs - figure.segment_start_time) / figure.step;
    const double i1 = (re - figure.segment_start_time) / figure.step;
    svg.rect(x_of(i0), top, x_of(i1) - x_of(i0), row_y(rows) - top - kRowGap, "#bbbbbb", 0.18, "region");
  }

  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const Mnemonic m = kAllChannels[c];
    const double y0 = row_y(c);
    svg.rect(kLeft, y0, plot_w, kRowHeight, "#f7f7f7");
    svg.text(kLeft - 6.0, y0 + kRowHeight / 2.0 + 4.0, to_string(m), 11.0, "end");

    svg.begin_group("reference", to_string(m));
    for (const auto& r : figure.references[c])
      svg.rect(x_of(static_cast<double>(r.begin)), y0 + kRowHeight - 5.0,
               x_of(static_cast<double>(r.end)) - x_of(static_cast<double>(r.begin)), 5.0, "#d62728", 0.9);
    svg.end_group();

    if (const auto* h = figure.highlights.find(m)) {
      svg.begin_group("highlight", to_string(m));
      for (const auto& r : h->intervals)
        svg.rect(x_of(static_cast<double>(r.begin)), y0, x_of(static_cast<double>(r.end)) - x_of(static_cast<double>(r.begin)),
                 kRowHeight - 5.0, "#ffd400", 0.55);
      svg.end_group();
    }

    const auto& vals = figure.values[c];
    if (!vals.empty()) {
      double lo = *std::min_element(vals.begin(), vals.end());
      double hi = *std::max_element(vals.begin(), vals.end());
      if (hi - lo < 1e-9) {
        lo -= 1.0;
        hi += 1.0;
      }
      std::vector<std::pair<double, double>> pts;
      pts.reserve(vals.size());
      for (std::size_t i = 0; i < vals.size(); ++i)
        pts.emplace_back(x_of(static_cast<double>(i) + 0.5),
                         y0 + 3.0 + (kRowHeight - 11.0) * (1.0 - (vals[i] - lo) / (hi - lo)));
      svg.polyline(pts, "#1f4e9a", 1.0);
    }
  }

  // Probability track.
  const double y0 = row_y(kNumChannels);
  svg.rect(kLeft, y0, plot_w, kRowHeight, "#f7f7f7");
  svg.text(kLeft - 6.0, y0 + kRowHeight / 2.0 + 4.0, "P", 11.0, "end");
  auto py = [&](double p) { return y0 + 2.0 + (kRowHeight - 4.0) * (1.0 - std::clamp(p, 0.0, 1.0)); };
  svg.begin_group("probability");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < figure.probability.size(); ++i) {
    const double p = figure.probability[i];
    if (!std::isfinite(p)) {
      if (!pts.empty()) svg.polyline(pts, "#111111", 1.2);
      pts.clear();
      continue;
    }
    pts.emplace_back(x_of(static_cast<double>(i) + 0.5), py(p));
  }
  svg.polyline(pts, "#111111", 1.2);
  svg.end_group();
  svg.begin_group("threshold");
  svg.line(kLeft, py(figure.threshold), kLeft + plot_w, py(figure.threshold), "#d62728", 1.0, "5,3");
  svg.end_group();
  svg.text(kLeft + plot_w, py(figure.threshold) - 3.0, "threshold " + fmt(figure.threshold, 3), 10.0, "end",
           "#d62728");

  const double axis_y = row_y(rows) + 12.0;
  svg.text(kLeft, axis_y, utc(figure.segment_start_time), 10.0, "start");
  svg.text(kLeft + plot_w, axis_y, utc(seg_end), 10.0, "end");
  return svg.str();
}

std::string roc_svg(const std::string& metrics_json_text) {
  const json j = parse_metrics(metrics_json_text);
  const double size = 360.0, pad = 48.0;
  Svg svg(size + pad + 20.0, size + pad + 30.0);
  const double x0 = pad, y0 = 20.0;
  svg.rect(x0, y0, size, size, "#f7f7f7");
  svg.line(x0, y0 + size, x0 + size, y0, "#999999", 1.0, "4,3");
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    svg.text(x0 + v * size, y0 + size + 14.0, fmt(v, 2), 10.0, "middle");
    svg.text(x0 - 6.0, y0 + size - v * size + 4.0, fmt(v, 2), 10.0, "end");
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : j.at("roc").at("curve"))
    pts.emplace_back(x0 + p.at(0).get<double>() * size, y0 + size - p.at(1).get<double>() * size);
  svg.begin_group("roc");
  svg.polyline(pts, "#1f4e9a", 2.0);
  svg.end_group();
  svg.text(x0 + size / 2.0, y0 + size + 28.0, "false positive rate", 11.0, "middle");
  svg.text(x0 + size - 6.0, y0 + size - 10.0, "AUC " + fmt(j.at("roc").at("micro_auc").get<double>()), 12.0, "end");
  return svg.str();
}

std::string tsne_svg(const ChannelEmbedding& embedding) {
  const auto& y = embedding.embedding.y;
  const std::size_t n = embedding.embedding.size();
  if (n != embedding.groups.size()) fail(ErrorCode::kUsage, "embedding and group sizes differ");
  const double size = 360.0, pad = 20.0;
  Svg svg(size + 2 * pad, size + 2 * pad + 40.0);
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (std::size_t i = 0; i < n; ++i) {
    xlo = std::min(xlo, y[2 * i]);
    xhi = std::max(xhi, y[2 * i]);
    ylo = std::min(ylo, y[2 * i + 1]);
    yhi = std::max(yhi, y[2 * i + 1]);
  }
  const double span = std::max({xhi - xlo, yhi - ylo, 1e-12});
  auto px = [&](double v) { return pad + size * (v - xlo) / span; };
  auto py = [&](double v) { return pad + 24.0 + size * (1.0 - (v - ylo) / span); };
  svg.text(pad, 16.0, std::string(to_string(embedding.channel)) + "  KL " + fmt(embedding.embedding.kl, 3), 12.0);
  // Codebook points first so the smaller groups stay visible.
  const std::pair<TauGroup, const char*> order[] = {
      {TauGroup::kCodebook, "#7b3294"}, {TauGroup::kExpert, "#f1c40f"}, {TauGroup::kHighlighted, "#e7298a"}};
  const char* names[] = {"highlighted", "codebook", "expert"};
  for (const auto& [group, colour] : order) {
    svg.begin_group(names[static_cast<int>(group)]);
    for (std::size_t i = 0; i < n; ++i)
      if (embedding.groups[i] == group) svg.circle(px(y[2 * i]), py(y[2 * i + 1]), 2.6, colour, 0.8);
    svg.end_group();
  }
  const double ly = size + 2 * pad + 32.0;
  svg.circle(pad + 4.0, ly - 4.0, 4.0, "#e7298a");
  svg.text(pad + 12.0, ly, "highlighted", 10.0);
  svg.circle(pad + 94.0, ly - 4.0, 4.0, "#7b3294");
  svg.text(pad + 102.0, ly, "codebook", 10.0);
  svg.circle(pad + 174.0, ly - 4.0, 4.0, "#f1c40f");
  svg.text(pad + 182.0, ly, "expert region", 10.0);
  return svg.str();
}

std::string embeddings_json(const std::vector<ChannelEmbedding>& embeddings) {
  json out = json::object();
  out["format"] = "bofx.tsne";
  out["version"] = 1;
  json list = json::array();
  for (const auto& e : embeddings) {
    json j;
    j["channel"] = to_string(e.channel);
    json groups = json::array();
    for (TauGroup g : e.groups) groups.push_back(static_cast<int>(g));
    j["groups"] = groups;
    j["y"] = e.embedding.y;
    j["perplexity"] = e.embedding.config.perplexity;
    j["iterations"] = e.embedding.config.iterations;
    j["seed"] = e.embedding.config.seed;
    j["kl_initial"] = e.embedding.kl_initial;
    j["kl"] = e.embedding.kl;
    list.push_back(j);
  }
  out["channels"] = list;
  return out.dump(2) + "\n";
}

std::vector<ChannelEmbedding> embeddings_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.value("format", "") != "bofx.tsne") fail(ErrorCode::kFormat, "not an embedding document");
    std::vector<ChannelEmbedding> out;
    for (const auto& c : j.at("channels")) {
      ChannelEmbedding e;
      const auto m = parse_mnemonic(c.at("channel").get<std::string>());
      if (!m) fail(ErrorCode::kFormat, "unknown channel in embedding document");
      e.channel = *m;
      for (int g : c.at("groups").get<std::vector<int>>()) {
        if (g < 0 || g > 2) fail(ErrorCode::kFormat, "bad group id in embedding document");
        e.groups.push_back(static_cast<TauGroup>(g));
      }
      e.embedding.y = c.at("y").get<std::vector<double>>();
      e.embedding.config.perplexity = c.at("perplexity").get<double>();
      e.embedding.config.iterations = c.at("iterations").get<std::size_t>();
      e.embedding.config.seed = c.at("seed").get<std::uint64_t>();
      e.embedding.kl_initial = c.at("kl_initial").get<double>();
      e.embedding.kl = c.at("kl").get<double>();
      if (e.embedding.y.size() != 2 * e.groups.size()) fail(ErrorCode::kFormat, "embedding size mismatch");
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("embedding document is malformed: ") + e.what());
  }
}

std::string metrics_html(const std::string& metrics_json_text) {
  const json j = parse_metrics(metrics_json_text);
  std::ostringstream o;
  const auto& ex = j.at("explanations");
  o << "<h2>Explanation quality</h2>\n<table class=\"pr\">\n"
    << "<tr><th rowspan=\"2\"></th><th colspan=\"2\">Expert reference</th>"
    << "<th colspan=\"2\">Expert reference and extended channel list</th></tr>\n"
    << "<tr><th>Precision</th><th>Recall</th><th>Precision</th><th>Recall</th></tr>\n";
  for (const auto& m : ex.at("methods")) {
    o << "<tr><td>" << xml_escape(m.at("method").get<std::string>()) << "</td>";
    for (const char* mode : {"strict", "extended"})
      o << "<td>" << fmt(m.at(mode).at("precision").get<double>()) << "</td><td>"
        << fmt(m.at(mode).at("recall").get<double>()) << "</td>";
    o << "</tr>\n";
  }
  o << "</table>\n<p>" << ex.at("moments").get<std::size_t>() << " explained alarm moments; max |local accuracy error| "
    << ex.at("max_local_accuracy_error").get<double>() << ".</p>\n";

  o << "<h3>Per accident type (strict)</h3>\n<table class=\"types\">\n<tr><th>Method</th>";
  for (AccidentType t : kAllAccidentTypes) o << "<th>" << to_string(t) << " P</th><th>" << to_string(t) << " R</th>";
  o << "<th>Reference hit rate</th></tr>\n";
  for (const auto& m : ex.at("methods")) {
    o << "<tr><td>" << xml_escape(m.at("method").get<std::string>()) << "</td>";
    const auto& per = m.at("strict").at("per_type");
    for (AccidentType t : kAllAccidentTypes) {
      const std::string k(to_string(t));
      if (per.contains(k))
        o << "<td>" << fmt(per.at(k).at("precision").get<double>()) << "</td><td>"
          << fmt(per.at(k).at("recall").get<double>()) << "</td>";
      else
        o << "<td>-</td><td>-</td>";
    }
    o << "<td>" << fmt(m.at("strict").at("reference_hit_rate").get<double>()) << "</td></tr>\n";
  }
  o << "</table>\n";

  o << "<h2>Alarm thresholds</h2>\n<table class=\"thresholds\">\n<tr><th>Type</th><th>Threshold</th>"
    << "<th>Target coverage</th><th>Coverage</th><th>Events</th><th>False alarms / day</th><th>ROC AUC</th></tr>\n";
  for (AccidentType t : kAllAccidentTypes) {
    const std::string k(to_string(t));
    if (!j.at("thresholds").contains(k)) continue;
    const auto& th = j.at("thresholds").at(k);
    o << "<tr><td>" << k << "</td><td>" << fmt(th.at("threshold").get<double>()) << "</td><td>"
      << fmt(th.at("target_coverage").get<double>(), 2) << "</td><td>" << fmt(th.at("coverage").get<double>(), 3)
      << "</td><td>" << th.at("events").get<std::size_t>() << "</td><td>"
      << fmt(th.at("false_alarms_per_day").get<double>(), 2) << "</td><td>"
      << fmt(j.at("roc").at("type_auc").value(k, std::numeric_limits<double>::quiet_NaN())) << "</td></tr>\n";
  }
  o << "</table>\n";

  if (j.contains("consistency")) {
    const auto& c = j.at("consistency");
    o << "<h2>Consistency</h2>\n<p>SHAP score " << fmt(c.at("shap_score").get<double>()) << " over "
      << c.at("moments").get<std::size_t>() << " moments; p = " << fmt(c.at("p_value").get<double>()) << " against "
      << c.at("random_scores").size() << " random explainer runs.</p>\n";
  }
  return o.str();
}

std::string render_report(const std::string& metrics_json_text, const std::vector<CaseFigure>& cases,
                          const std::vector<ChannelEmbedding>& embeddings) {
  const json j = parse_metrics(metrics_json_text);
  std::ostringstream o;
  o << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Alarm explanation report</title>\n"
    << "<style>body{font-family:sans-serif;margin:24px;color:#222}table{border-collapse:collapse;margin:8px 0}"
    << "td,th{border:1px solid #bbb;padding:3px 8px;text-align:right}th{background:#eee}"
    << "td:first-child{text-align:left}.fig{margin:12px 0}</style></head><body>\n"
    << "<h1>Alarm explanation report</h1>\n";
  o << "<h2>ROC</h2>\n<p>Micro AUC " << fmt(j.at("roc").at("micro_auc").get<double>()) << " over "
    << j.at("roc").at("positives").get<std::size_t>() << " positive and "
    << j.at("roc").at("negatives").get<std::size_t>() << " negative windows.</p>\n<div class=\"fig\">"
    << roc_svg(metrics_json_text) << "</div>\n";
  o << metrics_html(metrics_json_text);
  if (!cases.empty()) {
    o << "<h2>Cases</h2>\n";
    for (const auto& c : cases) o << "<div class=\"fig\">" << case_svg(c) << "</div>\n";
  }
  if (!embeddings.empty()) {
    o << "<h2>Embeddings</h2>\n";
    for (const auto& e : embeddings) o << "<div class=\"fig\" style=\"display:inline-block\">" << tsne_svg(e) << "</div>\n";
  }
  o << "</body></html>\n";
  return o.str();
}

}  // namespace bofx
