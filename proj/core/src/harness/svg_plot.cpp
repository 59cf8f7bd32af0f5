#include "emix/harness/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "emix/errors.hpp"

namespace emix::harness {
namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label) {
  double x_max = 1, y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.steps.size(); ++k) {
      const double m = c.stats.mean[k];
      if (!std::isfinite(m)) continue;
      const double s = c.stats.stddev ? (*c.stats.stddev)[k] : 0.0;
      x_max = std::max(x_max, static_cast<double>(c.steps[k]));
      y_min = std::min(y_min, m - (std::isfinite(s) ? s : 0.0));
      y_max = std::max(y_max, m + (std::isfinite(s) ? s : 0.0));
    }
  }
  if (!std::isfinite(y_min)) {
    y_min = 0;
    y_max = 1;
  }
  if (y_max - y_min < 1e-12) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_max; };
  auto py = [&](double y) { return kTop + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::ostringstream o;
  o.precision(5);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    const double xv = x_max * i / 4.0;
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">env steps</text>\n";
  o << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& cv = curves[c];
    const char* colour = kPalette[c % std::size(kPalette)];
    if (cv.stats.stddev) {
      std::ostringstream upper, lower;
      bool any = false;
      for (std::size_t k = 0; k < cv.steps.size(); ++k) {
        const double m = cv.stats.mean[k], s = (*cv.stats.stddev)[k];
        if (!std::isfinite(m) || !std::isfinite(s)) continue;
        upper << (any ? " L" : "M") << px(static_cast<double>(cv.steps[k])) << ' ' << py(m + s);
        any = true;
      }
      for (std::size_t k = cv.steps.size(); k-- > 0;) {
        const double m = cv.stats.mean[k], s = (*cv.stats.stddev)[k];
        if (!std::isfinite(m) || !std::isfinite(s)) continue;
        lower << " L" << px(static_cast<double>(cv.steps[k])) << ' ' << py(m - s);
      }
      if (any) {
        o << "<path d=\"" << upper.str() << lower.str() << " Z\" fill=\"" << colour
          << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
      }
    }
    std::ostringstream d;
    bool any = false;
    for (std::size_t k = 0; k < cv.steps.size(); ++k) {
      const double m = cv.stats.mean[k];
      if (!std::isfinite(m)) continue;
      d << (any ? " L" : "M") << px(static_cast<double>(cv.steps[k])) << ' ' << py(m);
      any = true;
    }
    if (any) o << "<path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(c);
    o << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"3\"/>\n";
    o << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4 << "\">" << escape(cv.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<Curve>& curves, const std::string& title,
               const std::string& y_label) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << render_svg(curves, title, y_label);
}

}  // namespace emix::harness
