#pragma once

// Minimal deterministic SVG line plots: fixed canvas, fixed formatting, no
// timestamps or random ids, so identical data yields identical bytes. Long
// series are decimated to a point budget before drawing.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cbfpc/errors.hpp"

namespace cbfpc {

class SvgPlot {
public:
  SvgPlot(double x_min, double x_max, double y_min, double y_max, std::string title,
          std::string x_label, std::string y_label)
      : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
    if (!(x_max_ > x_min_) || !(y_max_ > y_min_))
      throw ConfigurationError("plot ranges must be nonempty");
    header(title, x_label, y_label);
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, const char* color,
                double stroke_width = 1.2) {
    if (xs.size() != ys.size()) throw ConfigurationError("polyline coordinate count mismatch");
    if (xs.size() < 2) return;
    const std::size_t stride = std::max<std::size_t>(1, (xs.size() + kMaxPoints - 1) / kMaxPoints);
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << fmt(stroke_width) << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); i += stride)
      body_ << fmt(px(xs[i])) << ',' << fmt(py(ys[i])) << ' ';
    body_ << fmt(px(xs.back())) << ',' << fmt(py(ys.back()));
    body_ << "\"/>\n";
  }

  void hline(double y, const char* color, bool dashed = true) {
    body_ << "<line x1=\"" << fmt(px(x_min_)) << "\" y1=\"" << fmt(py(y)) << "\" x2=\""
          << fmt(px(x_max_)) << "\" y2=\"" << fmt(py(y)) << "\" stroke=\"" << color << "\"";
    if (dashed) body_ << " stroke-dasharray=\"6,4\"";
    body_ << " stroke-width=\"1\"/>\n";
  }

  // Disc in data coordinates; drawn as an ellipse so unequal axis scales
  // stay honest.
  void disc(double cx, double cy, double r, const char* fill, const char* stroke) {
    body_ << "<ellipse cx=\"" << fmt(px(cx)) << "\" cy=\"" << fmt(py(cy)) << "\" rx=\""
          << fmt(r * x_scale()) << "\" ry=\"" << fmt(r * y_scale()) << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\" stroke-width=\"1\"/>\n";
  }

  void marker(double x, double y, const char* color) {
    body_ << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
          << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& entries) {
    double y = kMargin + 14.0;
    for (const auto& [label, color] : entries) {
      body_ << "<rect x=\"" << fmt(kWidth - kMargin - 130.0) << "\" y=\"" << fmt(y - 9.0)
            << "\" width=\"18\" height=\"4\" fill=\"" << color << "\"/>\n";
      body_ << "<text x=\"" << fmt(kWidth - kMargin - 106.0) << "\" y=\"" << fmt(y)
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << label << "</text>\n";
      y += 16.0;
    }
  }

  std::string render() const {
    return body_.str() + "</svg>\n";
  }

private:
  static constexpr double kWidth = 640.0;
  static constexpr double kHeight = 480.0;
  static constexpr double kMargin = 56.0;
  static constexpr std::size_t kMaxPoints = 2000;

  double x_min_, x_max_, y_min_, y_max_;
  std::ostringstream body_;

  double x_scale() const { return (kWidth - 2.0 * kMargin) / (x_max_ - x_min_); }
  double y_scale() const { return (kHeight - 2.0 * kMargin) / (y_max_ - y_min_); }
  double px(double x) const { return kMargin + (x - x_min_) * x_scale(); }
  double py(double y) const { return kHeight - kMargin - (y - y_min_) * y_scale(); }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }

  void header(const std::string& title, const std::string& x_label, const std::string& y_label) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
          << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' '
          << fmt(kHeight) << "\">\n";
    body_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    body_ << "<rect x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kMargin) << "\" width=\""
          << fmt(kWidth - 2.0 * kMargin) << "\" height=\"" << fmt(kHeight - 2.0 * kMargin)
          << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    body_ << "<text x=\"" << fmt(kWidth / 2.0) << "\" y=\"" << fmt(kMargin - 20.0)
          << "\" text-anchor=\"middle\" font-size=\"15\" font-family=\"sans-serif\">" << title
          << "</text>\n";
    body_ << "<text x=\"" << fmt(kWidth / 2.0) << "\" y=\"" << fmt(kHeight - 12.0)
          << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
          << "</text>\n";
    body_ << "<text x=\"16\" y=\"" << fmt(kHeight / 2.0)
          << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
             "transform=\"rotate(-90 16 "
          << fmt(kHeight / 2.0) << ")\">" << y_label << "</text>\n";
    // corner range labels instead of full axes; enough to read the scale
    body_ << "<text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 16.0)
          << "\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(x_min_) << "</text>\n";
    body_ << "<text x=\"" << fmt(kWidth - kMargin) << "\" y=\""
          << fmt(kHeight - kMargin + 16.0)
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(x_max_)
          << "</text>\n";
    body_ << "<text x=\"" << fmt(kMargin - 6.0) << "\" y=\"" << fmt(kHeight - kMargin)
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(y_min_)
          << "</text>\n";
    body_ << "<text x=\"" << fmt(kMargin - 6.0) << "\" y=\"" << fmt(kMargin + 4.0)
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(y_max_)
          << "</text>\n";
  }
};

} // namespace cbfpc
