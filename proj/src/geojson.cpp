#include "sae/geojson.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "sae/csv.hpp"
#include "sae/error.hpp"

namespace sae {

namespace {

using Vec2 = Eigen::Vector2d;
using json = nlohmann::json;

struct Box {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  void extend(const Vec2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool overlaps(const Box& o, double tol) const {
    return lo.x() <= o.hi.x() + tol && o.lo.x() <= hi.x() + tol && lo.y() <= o.hi.y() + tol &&
           o.lo.y() <= hi.y() + tol;
  }
};

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool segments_overlap(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2, double tol) {
  const Vec2 d = p2 - p1;
  const double len = d.norm();
  if (len <= tol) return false;
  if (std::abs(cross(d, q1 - p1)) > tol * len || std::abs(cross(d, q2 - p1)) > tol * len) return false;
  const Vec2 u = d / len;
  const double s1 = (q1 - p1).dot(u);
  const double s2 = (q2 - p1).dot(u);
  const double overlap = std::min(len, std::max(s1, s2)) - std::max(0.0, std::min(s1, s2));
  return overlap > tol;
}

std::vector<Vec2> parse_ring(const json& ring) {
  std::vector<Vec2> pts;
  for (const auto& c : ring) pts.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
  return pts;
}

template <typename Fn>
void for_each_segment(const AreaShape& s, Fn&& fn) {
  for (const auto& ring : s.rings) {
    for (std::size_t k = 0; k < ring.size(); ++k) fn(ring[k], ring[(k + 1) % ring.size()]);
  }
}

bool touches(const AreaShape& a, const AreaShape& b, AdjacencyRule rule, double tol) {
  bool found = false;
  if (rule == AdjacencyRule::SharedSegment) {
    for_each_segment(a, [&](const Vec2& p1, const Vec2& p2) {
      if (found) return;
      for_each_segment(b, [&](const Vec2& q1, const Vec2& q2) {
        if (!found && segments_overlap(p1, p2, q1, q2, tol)) found = true;
      });
    });
    return found;
  }
  auto vertex_on = [&](const AreaShape& from, const AreaShape& to) {
    for (const auto& ring : from.rings) {
      for (const auto& p : ring) {
        bool hit = false;
        for_each_segment(to, [&](const Vec2& q1, const Vec2& q2) {
          if (!hit && point_segment_distance(p, q1, q2) <= tol) hit = true;
        });
        if (hit) return true;
      }
    }
    return false;
  };
  return vertex_on(a, b) || vertex_on(b, a);
}

}  // namespace

AdjacencyRule parse_adjacency_rule(const std::string& name) {
  if (name == "segment") return AdjacencyRule::SharedSegment;
  if (name == "point") return AdjacencyRule::SharedPoint;
  throw ValidationError("unknown adjacency rule '" + name + "' (expected segment or point)");
}

std::vector<AreaShape> read_geojson(const std::filesystem::path& path, const std::string& label_property) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  std::vector<AreaShape> shapes;
  const auto& features = doc.at("features");
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feature = features[f];
    AreaShape shape;
    const auto props = feature.value("properties", json::object());
    if (props.is_object() && props.contains(label_property)) {
      const auto& v = props[label_property];
      shape.label = v.is_string() ? v.get<std::string>() : v.dump();
    } else if (feature.contains("id")) {
      const auto& v = feature["id"];
      shape.label = v.is_string() ? v.get<std::string>() : v.dump();
    } else {
      shape.label = std::to_string(f);
    }
    const auto& geom = feature.at("geometry");
    const std::string type = geom.at("type").get<std::string>();
    const auto& coords = geom.at("coordinates");
    if (type == "Polygon") {
      for (const auto& ring : coords) shape.rings.push_back(parse_ring(ring));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : coords) {
        for (const auto& ring : poly) shape.rings.push_back(parse_ring(ring));
      }
    } else {
      throw ValidationError(path.string() + ": feature " + std::to_string(f) + " has unsupported geometry " + type);
    }
    shapes.push_back(std::move(shape));
  }
  return shapes;
}

void write_geojson(const std::filesystem::path& path, const std::vector<AreaShape>& shapes,
                   const std::string& config_hash) {
  json doc;
  doc["type"] = "FeatureCollection";
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  json features = json::array();
  for (const auto& s : shapes) {
    json polys = json::array();
    for (const auto& ring : s.rings) {
      json r = json::array();
      for (const auto& p : ring) r.push_back({p.x(), p.y()});
      if (!ring.empty()) r.push_back({ring.front().x(), ring.front().y()});
      polys.push_back(json::array({r}));
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{"area", s.label}}},
                        {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polys}}}});
  }
  doc["features"] = features;
  std::ofstream out = open_output(path);
  out << doc.dump() << "\n";
}

AreaGraph adjacency_from_shapes(const std::vector<AreaShape>& shapes, AdjacencyRule rule, double tolerance) {
  if (shapes.empty()) throw ValidationError("adjacency_from_shapes: no shapes");
  std::vector<Box> boxes(shapes.size());
  Box all;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    for (const auto& ring : shapes[i].rings) {
      for (const auto& p : ring) {
        boxes[i].extend(p);
        all.extend(p);
      }
    }
  }
  const double extent = std::max((all.hi - all.lo).maxCoeff(), 1e-300);
  const double tol = tolerance * extent;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    for (std::size_t j = i + 1; j < shapes.size(); ++j) {
      if (!boxes[i].overlaps(boxes[j], tol)) continue;
      if (touches(shapes[i], shapes[j], rule, tol)) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return build_graph(static_cast<int>(shapes.size()), edges);
}

std::vector<AreaShape> tile_shapes(const std::vector<std::string>& labels, int cols) {
  if (cols <= 0) throw ValidationError("tile_shapes: columns must be positive");
  std::vector<AreaShape> shapes;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double c = static_cast<double>(static_cast<int>(k) % cols);
    const double r = static_cast<double>(static_cast<int>(k) / cols);
    // y grows northwards, so row 0 sits at the top of the map.
    const double y0 = -r - 1.0;
    shapes.push_back({labels[k], {{Vec2(c, y0), Vec2(c + 1.0, y0), Vec2(c + 1.0, y0 + 1.0), Vec2(c, y0 + 1.0)}}});
  }
  return shapes;
}

}  // namespace sae
