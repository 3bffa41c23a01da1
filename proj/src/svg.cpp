#include "apdm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace apdm {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 45;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf"};

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<double>& x,
                     const std::vector<PlotSeries>& series) {
  if (x.empty() || series.empty())
    throw UsageError("svg: nothing to plot");
  double xmin = x.front(), xmax = x.front();
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  double ymin = 0.0, ymax = 0.0;
  bool first = true;
  for (const auto& s : series) {
    if (s.y.size() != x.size())
      throw UsageError("svg: series length does not match x axis");
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      if (first) {
        ymin = ymax = v;
        first = false;
      } else {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
  }
  if (first) ymin = ymax = 0.0;
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double px0 = kMarginLeft, px1 = kWidth - kMarginRight;
  const double py0 = kHeight - kMarginBottom, py1 = kMarginTop;
  auto sx = [&](double v) { return px0 + (v - xmin) / (xmax - xmin) * (px1 - px0); };
  auto sy = [&](double v) { return py0 + (v - ymin) / (ymax - ymin) * (py1 - py0); };

  std::ofstream out(path);
  if (!out) throw FormatError("svg: cannot open '" + path.string() + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n"
      << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1
      << "\" y2=\"" << py0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0
      << "\" y2=\"" << py1 << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << px0 << "\" y=\"" << py0 + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(xmin)
      << "</text>\n"
      << "<text x=\"" << px1 << "\" y=\"" << py0 + 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt_tick(xmax) << "</text>\n"
      << "<text x=\"" << px0 - 6 << "\" y=\"" << py0
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt_tick(ymin) << "</text>\n"
      << "<text x=\"" << px0 - 6 << "\" y=\"" << py1 + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt_tick(ymax) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % (sizeof(kColors) / sizeof(kColors[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(series[k].y[i])) continue;
      out << sx(x[i]) << "," << sy(series[k].y[i]) << " ";
    }
    out << "\"/>\n";
    const double ly = kMarginTop + 14.0 * static_cast<double>(k);
    out << "<line x1=\"" << px1 - 110 << "\" y1=\"" << ly << "\" x2=\""
        << px1 - 90 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << px1 - 85 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[k].name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace apdm
