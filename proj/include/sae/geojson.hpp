#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "sae/graph.hpp"

namespace sae {

enum class AdjacencyRule {
  SharedSegment,  // rook: boundaries overlap along a segment of positive length
  SharedPoint,    // queen: boundaries share at least one point
};

AdjacencyRule parse_adjacency_rule(const std::string& name);

/// Boundary rings of one area (all polygons, outer rings and holes).
struct AreaShape {
  std::string label;
  std::vector<std::vector<Eigen::Vector2d>> rings;
};

/// Reads Polygon / MultiPolygon features. The label is taken from
/// properties[label_property], else the feature id, else the feature index.
std::vector<AreaShape> read_geojson(const std::filesystem::path& path,
                                    const std::string& label_property = "area");

void write_geojson(const std::filesystem::path& path, const std::vector<AreaShape>& shapes,
                   const std::string& config_hash = {});

/// Adjacency from shared boundaries. `tolerance` is relative to the extent of the map.
AreaGraph adjacency_from_shapes(const std::vector<AreaShape>& shapes, AdjacencyRule rule,
                                double tolerance = 1e-9);

/// Unit squares laid out row-major on a grid with `cols` columns.
std::vector<AreaShape> tile_shapes(const std::vector<std::string>& labels, int cols);

}  // namespace sae
