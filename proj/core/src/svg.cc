#include "bofx/svg.h"

#include <cstdio>

namespace bofx {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::rect(double x, double y, double w, double h, std::string_view fill, double opacity,
               std::string_view css_class) {
  body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\"";
  if (opacity < 1.0) body_ << " fill-opacity=\"" << num(opacity) << "\"";
  if (!css_class.empty()) body_ << " class=\"" << css_class << "\"";
  body_ << "/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
               std::string_view dash) {
  body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"";
  if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
  body_ << "/>\n";
}

void Svg::polyline(std::span<const std::pair<double, double>> points, std::string_view stroke, double width) {
  if (points.empty()) return;
  body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i)
    body_ << (i ? " " : "") << num(points[i].first) << "," << num(points[i].second);
  body_ << "\"/>\n";
}

void Svg::circle(double x, double y, double r, std::string_view fill, double opacity) {
  body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill << "\"";
  if (opacity < 1.0) body_ << " fill-opacity=\"" << num(opacity) << "\"";
  body_ << "/>\n";
}

void Svg::text(double x, double y, std::string_view content, double size, std::string_view anchor,
               std::string_view fill) {
  body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
        << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\">"
        << xml_escape(content) << "</text>\n";
}

void Svg::begin_group(std::string_view css_class, std::string_view data_channel) {
  body_ << "<g class=\"" << css_class << "\"";
  if (!data_channel.empty()) body_ << " data-channel=\"" << data_channel << "\"";
  body_ << ">\n";
}

void Svg::end_group() { body_ << "</g>\n"; }

std::string Svg::str() const {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
      << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width_) << "\" height=\"" << num(height_) << "\" fill=\"#fff\"/>\n"
      << body_.str() << "</svg>\n";
  return out.str();
}

}  // namespace bofx
