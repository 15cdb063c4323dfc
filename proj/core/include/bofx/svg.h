#pragma once

#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

namespace bofx {

std::string xml_escape(std::string_view text);

// Minimal SVG writer with a fixed canvas. Coordinates are in pixels.
class Svg {
 public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, double opacity = 1.0,
            std::string_view css_class = {});
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view dash = {});
  void polyline(std::span<const std::pair<double, double>> points, std::string_view stroke, double width = 1.0);
  void circle(double x, double y, double r, std::string_view fill, double opacity = 1.0);
  void text(double x, double y, std::string_view content, double size = 11.0, std::string_view anchor = "start",
            std::string_view fill = "#222");
  void begin_group(std::string_view css_class, std::string_view data_channel = {});
  void end_group();

  std::string str() const;

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

}  // namespace bofx
