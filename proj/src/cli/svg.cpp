#include "sae/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sae/csv.hpp"
#include "sae/error.hpp"

namespace sae::cli {

namespace {

constexpr double kMapSize = 480.0;
constexpr double kMargin = 20.0;
constexpr double kTitleHeight = 30.0;
constexpr double kLegendWidth = 190.0;

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
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

}  // namespace

int ColorScale::bin(double value) const {
  if (!(high > low)) return 0;
  const int k = static_cast<int>(std::floor((value - low) / (high - low) * kBins));
  return std::clamp(k, 0, kBins - 1);
}

std::string ColorScale::color(double value) const {
  return std::isnan(value) ? kMissing : kPalette[bin(value)];
}

ColorScale pooled_scale(const std::vector<Eigen::VectorXd>& series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    for (double v : s) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

void write_choropleth(const std::filesystem::path& path, const std::vector<AreaShape>& shapes,
                      const Eigen::VectorXd& values, const ColorScale& scale, const std::string& title,
                      const std::string& config_hash) {
  if (static_cast<Eigen::Index>(shapes.size()) != values.size()) {
    throw ValidationError("choropleth: " + std::to_string(shapes.size()) + " shapes but " +
                          std::to_string(values.size()) + " values");
  }
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& shape : shapes) {
    for (const auto& ring : shape.rings) {
      for (const auto& p : ring) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
      }
    }
  }
  if (!std::isfinite(xmin)) throw ValidationError("choropleth: shapes have no coordinates");
  const double extent = std::max({xmax - xmin, ymax - ymin, 1e-12});
  const double unit = kMapSize / extent;
  // Map coordinates have y pointing up.
  auto sx = [&](double x) { return kMargin + (x - xmin) * unit; };
  auto sy = [&](double y) { return kMargin + kTitleHeight + (ymax - y) * unit; };

  const double width = kMargin * 2 + kMapSize + kLegendWidth;
  const double height = kMargin * 2 + kTitleHeight + kMapSize;
  std::ofstream out = open_output(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!config_hash.empty()) out << "<!-- config-hash: " << config_hash << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << " " << fixed(height, 0) << "\">\n";
  out << "<title>" << escape(title) << "</title>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kMargin + 16 << "\" font-family=\"sans-serif\" font-size=\"16\">"
      << escape(title) << "</text>\n";

  out << "<g id=\"areas\" stroke=\"#555555\" stroke-width=\"0.6\" fill-rule=\"evenodd\">\n";
  bool any_missing = false;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const double v = values(static_cast<Eigen::Index>(i));
    any_missing = any_missing || std::isnan(v);
    std::string d;
    for (const auto& ring : shapes[i].rings) {
      for (std::size_t k = 0; k < ring.size(); ++k) {
        d += (k == 0 ? "M" : "L") + fixed(sx(ring[k].x())) + " " + fixed(sy(ring[k].y())) + " ";
      }
      d += "Z ";
    }
    if (!d.empty()) d.pop_back();
    out << "<path class=\"area\" data-area=\"" << escape(shapes[i].label) << "\" data-value=\""
        << (std::isnan(v) ? std::string("NA") : format_double(v)) << "\" fill=\"" << scale.color(v) << "\" d=\"" << d
        << "\"><title>" << escape(shapes[i].label) << ": "
        << (std::isnan(v) ? std::string("missing") : fixed(v, 3)) << "</title></path>\n";
  }
  out << "</g>\n";

  const double lx = kMargin * 2 + kMapSize;
  double ly = kMargin + kTitleHeight;
  out << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << lx << "\" y=\"" << ly + 12 << "\">Proportion</text>\n";
  ly += 22;
  for (int k = ColorScale::kBins - 1; k >= 0; --k) {
    out << "<rect class=\"legend-bin\" x=\"" << lx << "\" y=\"" << fixed(ly) << "\" width=\"18\" height=\"18\" fill=\""
        << ColorScale::kPalette[k] << "\" stroke=\"#555555\" stroke-width=\"0.5\"/>";
    out << "<text x=\"" << lx + 26 << "\" y=\"" << fixed(ly + 13) << "\">" << fixed(scale.edge(k), 3) << " to "
        << fixed(scale.edge(k + 1), 3) << "</text>\n";
    ly += 22;
  }
  if (any_missing) {
    out << "<rect class=\"legend-missing\" x=\"" << lx << "\" y=\"" << fixed(ly)
        << "\" width=\"18\" height=\"18\" fill=\"" << ColorScale::kMissing
        << "\" stroke=\"#555555\" stroke-width=\"0.5\"/>";
    out << "<text x=\"" << lx + 26 << "\" y=\"" << fixed(ly + 13) << "\">missing</text>\n";
  }
  out << "</g>\n</svg>\n";
}

}  // namespace sae::cli
