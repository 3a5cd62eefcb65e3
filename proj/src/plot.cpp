#include "csakd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "csakd/errors.hpp"

namespace csakd::plot {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series) {
  const int w = 640, h = 440, ml = 70, mr = 140, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::ofstream f(path);
  if (!f) throw DataError("write_line_svg: cannot open " + path.string());
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
    << "' viewBox='0 0 " << w << ' ' << h << "'>\n"
    << "<rect width='100%' height='100%' fill='white'/>\n"
    << "<text x='" << (ml + (w - ml - mr) / 2) << "' y='24' text-anchor='middle' "
    << "font-family='sans-serif' font-size='16'>" << title << "</text>\n";

  // axes
  f << "<line x1='" << ml << "' y1='" << (h - mb) << "' x2='" << (w - mr) << "' y2='"
    << (h - mb) << "' stroke='black'/>\n"
    << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << (h - mb)
    << "' stroke='black'/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    f << "<line x1='" << px(xv) << "' y1='" << (h - mb) << "' x2='" << px(xv)
      << "' y2='" << (h - mb + 5) << "' stroke='black'/>\n"
      << "<text x='" << px(xv) << "' y='" << (h - mb + 20)
      << "' text-anchor='middle' font-family='sans-serif' font-size='11'>"
      << fmt(xv) << "</text>\n"
      << "<line x1='" << (ml - 5) << "' y1='" << py(yv) << "' x2='" << ml << "' y2='"
      << py(yv) << "' stroke='black'/>\n"
      << "<text x='" << (ml - 8) << "' y='" << (py(yv) + 4)
      << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << fmt(yv)
      << "</text>\n";
  }
  f << "<text x='" << (ml + (w - ml - mr) / 2) << "' y='" << (h - 12)
    << "' text-anchor='middle' font-family='sans-serif' font-size='13'>" << x_label
    << "</text>\n"
    << "<text x='18' y='" << (mt + (h - mt - mb) / 2)
    << "' text-anchor='middle' font-family='sans-serif' font-size='13' "
    << "transform='rotate(-90 18 " << (mt + (h - mt - mb) / 2) << ")'>" << y_label
    << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kColors[si % 6];
    f << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      f << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    f << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      f << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
        << "' r='3' fill='" << color << "'/>\n";
    const int ly = mt + 18 * static_cast<int>(si);
    f << "<line x1='" << (w - mr + 10) << "' y1='" << ly << "' x2='" << (w - mr + 30)
      << "' y2='" << ly << "' stroke='" << color << "' stroke-width='2'/>\n"
      << "<text x='" << (w - mr + 35) << "' y='" << (ly + 4)
      << "' font-family='sans-serif' font-size='12'>" << s.label << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace csakd::plot
