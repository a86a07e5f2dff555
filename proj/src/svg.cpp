#include "fmflow/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace fmflow {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
constexpr double kMargin = 40.0;

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace

std::string scatter_svg(const std::vector<ScatterLayer>& layers) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& layer : layers) {
    require(layer.points.rows() == 0 || layer.points.cols() == 2, "scatter_svg: points must be two dimensional");
    for (Eigen::Index i = 0; i < layer.points.rows(); ++i) {
      lo_x = std::min(lo_x, layer.points(i, 0));
      hi_x = std::max(hi_x, layer.points(i, 0));
      lo_y = std::min(lo_y, layer.points(i, 1));
      hi_y = std::max(hi_y, layer.points(i, 1));
    }
  }
  const bool empty = !(lo_x <= hi_x);
  const double cx = empty ? 0.0 : (lo_x + hi_x) / 2.0;
  const double cy = empty ? 0.0 : (lo_y + hi_y) / 2.0;
  double half = empty ? 1.0 : std::max(hi_x - lo_x, hi_y - lo_y) / 2.0;
  if (half <= 0.0) half = 1.0;
  const double center = kSvgSize / 2.0;
  const double scale = (center - kMargin) / half;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kSvgSize) + "\" height=\"" +
         std::to_string(kSvgSize) + "\" viewBox=\"0 0 " + std::to_string(kSvgSize) + " " +
         std::to_string(kSvgSize) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    out += "<g id=\"layer" + std::to_string(k) + "\" fill=\"" + color + "\" fill-opacity=\"0.5\">\n";
    const auto& p = layers[k].points;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      out += "<circle cx=\"" + fixed2(center + (p(i, 0) - cx) * scale) + "\" cy=\"" +
             fixed2(center - (p(i, 1) - cy) * scale) + "\" r=\"1.50\"/>\n";
    }
    out += "</g>\n";
  }
  out += "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"14\">\n";
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const double y = 20.0 + 20.0 * static_cast<double>(k);
    out += "<circle cx=\"20.00\" cy=\"" + fixed2(y) + "\" r=\"5.00\" fill=\"" + kPalette[k % std::size(kPalette)] +
           "\"/>\n";
    out += "<text x=\"32.00\" y=\"" + fixed2(y + 5.0) + "\">" + escape(layers[k].label) + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace fmflow
