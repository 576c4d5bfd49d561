#pragma once

// Static choropleth maps. All maps of one run share a colour scale so they can be compared.

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "sae/geojson.hpp"

namespace sae::cli {

/// Seven equal-width bins over [low, high] coloured with the sequential YlOrRd palette.
struct ColorScale {
  static constexpr int kBins = 7;
  static constexpr std::array<const char*, kBins> kPalette{"#ffffb2", "#fed976", "#feb24c", "#fd8d3c",
                                                          "#fc4e2a", "#e31a1c", "#b10026"};
  static constexpr const char* kMissing = "#cccccc";

  double low = 0.0;
  double high = 1.0;

  /// Bin of a finite value; values at or beyond the ends fall into the outer bins.
  int bin(double value) const;
  /// Palette colour, or kMissing for NaN.
  std::string color(double value) const;
  double edge(int k) const { return low + (high - low) * k / kBins; }
};

/// Scale spanning every finite value of every series (NaN entries are ignored).
ColorScale pooled_scale(const std::vector<Eigen::VectorXd>& series);

/// One <path class="area"> per shape, filled by `values` (NaN: missing), with an embedded legend.
void write_choropleth(const std::filesystem::path& path, const std::vector<AreaShape>& shapes,
                      const Eigen::VectorXd& values, const ColorScale& scale, const std::string& title,
                      const std::string& config_hash = {});

}  // namespace sae::cli
