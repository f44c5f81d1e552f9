#ifndef TRACE_ENRICH_ROAD_NETWORK_HPP
#define TRACE_ENRICH_ROAD_NETWORK_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trace_enrich/errors.hpp"
#include "trace_enrich/geo.hpp"
#include "trace_enrich/spatial_index.hpp"

namespace trace_enrich {

enum class HighwayClass { Motorway, Trunk, Primary, Secondary, Tertiary, Unclassified, Residential, Service, Other };

/// Maps an OSM `highway` value to a drivable class; `_link` variants fold
/// into their base class. Returns nullopt for non-drivable values.
inline std::optional<HighwayClass> drivable_class(std::string_view highway) {
  if (highway.ends_with("_link")) highway.remove_suffix(5);
  if (highway == "motorway") return HighwayClass::Motorway;
  if (highway == "trunk") return HighwayClass::Trunk;
  if (highway == "primary") return HighwayClass::Primary;
  if (highway == "secondary") return HighwayClass::Secondary;
  if (highway == "tertiary") return HighwayClass::Tertiary;
  if (highway == "unclassified") return HighwayClass::Unclassified;
  if (highway == "residential") return HighwayClass::Residential;
  if (highway == "service") return HighwayClass::Service;
  return std::nullopt;
}

inline std::string_view to_string(HighwayClass c) {
  switch (c) {
    case HighwayClass::Motorway: return "motorway";
    case HighwayClass::Trunk: return "trunk";
    case HighwayClass::Primary: return "primary";
    case HighwayClass::Secondary: return "secondary";
    case HighwayClass::Tertiary: return "tertiary";
    case HighwayClass::Unclassified: return "unclassified";
    case HighwayClass::Residential: return "residential";
    case HighwayClass::Service: return "service";
    case HighwayClass::Other: return "other";
  }
  return "other";
}

inline constexpr double kKmhPerMph = 1.609344;

/// Michigan statutory defaults for roads without posted limits, in km/h.
/// Throws NoDefault for HighwayClass::Other.
inline double default_speed_limit(HighwayClass c) {
  double mph = 0.0;
  switch (c) {
    case HighwayClass::Motorway: mph = 70; break;
    case HighwayClass::Trunk: mph = 55; break;
    case HighwayClass::Primary: mph = 55; break;
    case HighwayClass::Secondary: mph = 45; break;
    case HighwayClass::Tertiary: mph = 35; break;
    case HighwayClass::Unclassified: mph = 55; break;
    case HighwayClass::Residential: mph = 25; break;
    case HighwayClass::Service: mph = 25; break;
    case HighwayClass::Other: throw NoDefault();
  }
  return mph * kKmhPerMph;
}

enum class SpeedLimitClass : int { DirectionDependent = -1, Legal = 0, Default = 1, Advisory = 2, Practical = 3 };

enum class FocusPointKind : std::uint8_t {
  Bollard,
  Bump,
  Crossing,
  Gate,
  LiftGate,
  GiveWay,
  Hump,
  LevelCrossing,
  MiniRoundabout,
  MotorwayJunction,
  Roundabout,
  StopSign,
  SwingGate,
  TrafficSignal,
  TurningCircle,
  TurningLoop,
};

inline constexpr std::size_t kFocusPointKindCount = 16;

inline constexpr std::array<std::string_view, kFocusPointKindCount> kFocusPointNames = {
    "bollard",          "bump",       "crossing",  "gate",       "lift_gate",      "give_way",
    "hump",             "level_crossing", "mini_roundabout", "motorway_junction", "roundabout",
    "stop_sign",        "swing_gate", "traffic_signal", "turning_circle", "turning_loop"};

inline std::string_view to_string(FocusPointKind k) { return kFocusPointNames[static_cast<std::size_t>(k)]; }

inline std::optional<FocusPointKind> focus_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFocusPointKindCount; ++i)
    if (kFocusPointNames[i] == name) return static_cast<FocusPointKind>(i);
  return std::nullopt;
}

using Tags = std::map<std::string, std::string, std::less<>>;

/// Focus-point kinds carried by a node's tags. Unknown values are ignored.
inline std::vector<FocusPointKind> focus_kinds_from_node_tags(const Tags& tags) {
  std::vector<FocusPointKind> kinds;
  auto value = [&](std::string_view key) -> std::string_view {
    auto it = tags.find(key);
    return it == tags.end() ? std::string_view{} : std::string_view(it->second);
  };
  static const std::array<std::pair<std::string_view, FocusPointKind>, 8> highway_map = {{
      {"crossing", FocusPointKind::Crossing},
      {"traffic_signals", FocusPointKind::TrafficSignal},
      {"stop", FocusPointKind::StopSign},
      {"give_way", FocusPointKind::GiveWay},
      {"turning_circle", FocusPointKind::TurningCircle},
      {"turning_loop", FocusPointKind::TurningLoop},
      {"mini_roundabout", FocusPointKind::MiniRoundabout},
      {"motorway_junction", FocusPointKind::MotorwayJunction},
  }};
  for (const auto& [v, k] : highway_map)
    if (value("highway") == v) kinds.push_back(k);
  if (value("railway") == "level_crossing") kinds.push_back(FocusPointKind::LevelCrossing);
  const auto calming = value("traffic_calming");
  if (calming == "bump") kinds.push_back(FocusPointKind::Bump);
  if (calming == "hump") kinds.push_back(FocusPointKind::Hump);
  const auto barrier = value("barrier");
  if (barrier == "gate") kinds.push_back(FocusPointKind::Gate);
  if (barrier == "lift_gate") kinds.push_back(FocusPointKind::LiftGate);
  if (barrier == "bollard") kinds.push_back(FocusPointKind::Bollard);
  if (barrier == "swing_gate") kinds.push_back(FocusPointKind::SwingGate);
  std::sort(kinds.begin(), kinds.end());
  return kinds;
}

enum class OneWay { Both, Forward, Backward };

inline OneWay parse_oneway(std::string_view v) {
  if (v == "yes" || v == "true" || v == "1") return OneWay::Forward;
  if (v == "-1" || v == "reverse") return OneWay::Backward;
  return OneWay::Both;
}

/// One drivable piece of a map way between two consecutive graph nodes.
struct RoadEdge {
  std::uint32_t id = 0;
  std::int64_t way_id = 0;
  std::uint32_t from_node = 0;
  std::uint32_t to_node = 0;
  std::vector<GeoPoint> geometry;
  std::vector<double> cumulative_m;  // distance from the start to each vertex
  HighwayClass highway_class = HighwayClass::Other;
  Tags tags;
  OneWay oneway = OneWay::Both;
  double length_m = 0.0;

  bool forward_allowed() const noexcept { return oneway != OneWay::Backward; }
  bool backward_allowed() const noexcept { return oneway != OneWay::Forward; }

  std::optional<std::string_view> tag(std::string_view key) const {
    auto it = tags.find(key);
    if (it == tags.end()) return std::nullopt;
    return std::string_view(it->second);
  }

  /// Geometry segment holding the position `offset_m` meters from the start.
  std::size_t segment_at(double offset_m) const {
    auto it = std::upper_bound(cumulative_m.begin(), cumulative_m.end(), offset_m);
    std::size_t seg = it == cumulative_m.begin() ? 0 : static_cast<std::size_t>(it - cumulative_m.begin()) - 1;
    return std::min(seg, geometry.size() - 2);
  }

  GeoPoint point_at(double offset_m) const {
    const std::size_t seg = segment_at(offset_m);
    const double seg_len = cumulative_m[seg + 1] - cumulative_m[seg];
    const double t = seg_len > 0.0 ? (offset_m - cumulative_m[seg]) / seg_len : 0.0;
    return interpolate(geometry[seg], geometry[seg + 1], t);
  }

  /// Builds an edge from its geometry; length and cumulative offsets are derived.
  static RoadEdge make(std::uint32_t id, std::int64_t way_id, std::vector<GeoPoint> geometry, HighwayClass cls,
                       Tags tags = {}, std::uint32_t from_node = 0, std::uint32_t to_node = 0) {
    if (geometry.size() < 2) throw InvalidArgument("edge geometry needs at least two points");
    RoadEdge e;
    e.id = id;
    e.way_id = way_id;
    e.from_node = from_node;
    e.to_node = to_node;
    e.highway_class = cls;
    e.cumulative_m.reserve(geometry.size());
    e.cumulative_m.push_back(0.0);
    for (std::size_t i = 1; i < geometry.size(); ++i)
      e.cumulative_m.push_back(e.cumulative_m.back() + great_circle_m(geometry[i - 1], geometry[i]));
    e.length_m = e.cumulative_m.back();
    e.geometry = std::move(geometry);
    if (auto it = tags.find("oneway"); it != tags.end()) e.oneway = parse_oneway(it->second);
    e.tags = std::move(tags);
    return e;
  }

  friend bool operator==(const RoadEdge&, const RoadEdge&) = default;
};

struct FocusPoint {
  FocusPointKind kind;
  GeoPoint pos;
  friend bool operator==(const FocusPoint&, const FocusPoint&) = default;
};

/// Closest position on an edge to a query point.
struct EdgeCandidate {
  std::uint32_t edge_id = 0;
  GeoPoint point;
  double distance_m = 0.0;
  double offset_m = 0.0;
};

class RoadNetworkBuilder;

/// Immutable routable road graph plus the point layers used for enrichment.
class RoadNetwork {
 public:
  struct Options {
    double cell_m = 100.0;
  };

  RoadNetwork() = default;

  const std::vector<RoadEdge>& edges() const noexcept { return edges_; }
  const RoadEdge& edge(std::uint32_t id) const { return edges_.at(id); }
  std::size_t node_count() const noexcept { return node_pos_.size(); }
  const GeoPoint& node_position(std::uint32_t n) const { return node_pos_.at(n); }
  std::int64_t node_osm_id(std::uint32_t n) const { return node_osm_.at(n); }
  const std::vector<std::uint32_t>& incident_edges(std::uint32_t n) const { return adjacency_.at(n); }

  /// Graph nodes shared by at least two distinct drivable ways.
  const std::vector<GeoPoint>& intersections() const noexcept { return intersections_; }
  const std::vector<FocusPoint>& focus_points() const noexcept { return focus_points_; }
  const std::vector<GeoPoint>& bus_stops() const noexcept { return bus_stops_; }

  const SpatialIndex<std::uint32_t>& intersection_index() const noexcept { return intersection_index_; }
  const SpatialIndex<std::uint32_t>& bus_stop_index() const noexcept { return bus_stop_index_; }
  const SpatialIndex<std::uint32_t>& focus_index() const noexcept { return focus_index_; }

  double total_length_m() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.length_m;
    return s;
  }

  /// Per-edge closest points within `radius_m` of `p`, nearest first
  /// (ties by edge id).
  std::vector<EdgeCandidate> nearest_edges(const GeoPoint& p, double radius_m) const {
    if (!(radius_m > 0.0)) throw InvalidArgument("search radius must be positive");
    std::unordered_map<std::uint32_t, EdgeCandidate> best;
    segment_grid_.visit_cap(p, radius_m, [&](std::span<const std::uint32_t> cell) {
      for (std::uint32_t s : cell) {
        const auto [edge_id, seg] = segments_[s];
        const RoadEdge& e = edges_[edge_id];
        const SegmentProjection proj = project_onto_segment(p, e.geometry[seg], e.geometry[seg + 1]);
        if (proj.distance_m > radius_m) continue;
        auto it = best.find(edge_id);
        if (it != best.end() && it->second.distance_m <= proj.distance_m) continue;
        const double offset = e.cumulative_m[seg] + great_circle_m(e.geometry[seg], proj.point);
        best[edge_id] = EdgeCandidate{edge_id, proj.point, proj.distance_m, std::min(offset, e.length_m)};
      }
    });
    std::vector<EdgeCandidate> out;
    out.reserve(best.size());
    for (auto& [id, c] : best) out.push_back(c);
    std::sort(out.begin(), out.end(), [](const EdgeCandidate& a, const EdgeCandidate& b) {
      return a.distance_m != b.distance_m ? a.distance_m < b.distance_m : a.edge_id < b.edge_id;
    });
    return out;
  }

 private:
  friend class RoadNetworkBuilder;

  void build_indexes(const Options& opts) {
    std::vector<GeoPoint> all;
    for (const auto& e : edges_) all.insert(all.end(), e.geometry.begin(), e.geometry.end());
    segment_grid_ = all.empty() ? detail::Grid{} : detail::Grid(detail::bounds_of(all), opts.cell_m);
    segments_.clear();
    for (const auto& e : edges_) {
      for (std::uint32_t s = 0; s + 1 < e.geometry.size(); ++s) {
        const auto& a = e.geometry[s];
        const auto& b = e.geometry[s + 1];
        const auto idx = static_cast<std::uint32_t>(segments_.size());
        segments_.emplace_back(e.id, s);
        segment_grid_.insert(idx, std::min(a.lat(), b.lat()), std::max(a.lat(), b.lat()), std::min(a.lon(), b.lon()),
                             std::max(a.lon(), b.lon()));
      }
    }
    auto point_index = [&](const std::vector<GeoPoint>& pts) {
      std::vector<SpatialIndex<std::uint32_t>::Item> items;
      for (std::uint32_t i = 0; i < pts.size(); ++i) items.push_back({i, pts[i]});
      return SpatialIndex<std::uint32_t>(std::move(items), opts.cell_m);
    };
    intersection_index_ = point_index(intersections_);
    bus_stop_index_ = point_index(bus_stops_);
    std::vector<GeoPoint> focus_pos;
    for (const auto& f : focus_points_) focus_pos.push_back(f.pos);
    focus_index_ = point_index(focus_pos);
  }

  std::vector<RoadEdge> edges_;
  std::vector<GeoPoint> node_pos_;
  std::vector<std::int64_t> node_osm_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
  std::vector<GeoPoint> intersections_;
  std::vector<FocusPoint> focus_points_;
  std::vector<GeoPoint> bus_stops_;

  detail::Grid segment_grid_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> segments_;  // (edge, segment)
  SpatialIndex<std::uint32_t> intersection_index_;
  SpatialIndex<std::uint32_t> bus_stop_index_;
  SpatialIndex<std::uint32_t> focus_index_;
};

/// Accumulates map nodes and ways, then splits drivable ways at shared nodes
/// into a RoadNetwork. Element order does not affect the result.
class RoadNetworkBuilder {
 public:
  void add_node(std::int64_t id, GeoPoint pos, Tags tags = {}) { nodes_[id] = NodeData{pos, std::move(tags)}; }

  void add_way(std::int64_t id, std::vector<std::int64_t> refs, Tags tags) {
    ways_.push_back(WayData{id, std::move(refs), std::move(tags)});
  }

  void add_bus_stop(GeoPoint pos) { extra_bus_stops_.push_back(pos); }

  /// Throws EmptyNetwork when no drivable edge results.
  RoadNetwork build(const RoadNetwork::Options& opts = {}) const {
    std::vector<const WayData*> ways;
    for (const auto& w : ways_) ways.push_back(&w);
    std::sort(ways.begin(), ways.end(), [](const WayData* a, const WayData* b) { return a->id < b->id; });

    struct Run {
      const WayData* way;
      HighwayClass cls;
      std::vector<std::int64_t> refs;
    };
    std::vector<Run> runs;
    std::unordered_map<std::int64_t, std::pair<std::int64_t, int>> way_count;  // node -> (last way, distinct ways)
    std::unordered_set<std::int64_t> split_nodes;

    for (const WayData* w : ways) {
      auto hw = w->tags.find("highway");
      if (hw == w->tags.end()) continue;
      auto cls = drivable_class(hw->second);
      if (!cls) continue;
      std::vector<std::int64_t> current;
      std::unordered_set<std::int64_t> seen_in_way;
      auto flush = [&] {
        if (current.size() >= 2) {
          for (std::int64_t ref : current) {
            if (!seen_in_way.insert(ref).second) split_nodes.insert(ref);
            auto& [last_way, count] = way_count[ref];
            if (count == 0 || last_way != w->id) {
              last_way = w->id;
              ++count;
            }
          }
          runs.push_back(Run{w, *cls, current});
        }
        current.clear();
      };
      for (std::int64_t ref : w->refs) {
        if (!nodes_.contains(ref)) {
          flush();
          continue;
        }
        if (!current.empty() && current.back() == ref) continue;
        current.push_back(ref);
      }
      flush();
    }

    for (const auto& run : runs) {
      split_nodes.insert(run.refs.front());
      split_nodes.insert(run.refs.back());
    }
    for (const auto& [id, wc] : way_count)
      if (wc.second >= 2) split_nodes.insert(id);

    std::vector<std::int64_t> graph_ids(split_nodes.begin(), split_nodes.end());
    std::sort(graph_ids.begin(), graph_ids.end());
    std::unordered_map<std::int64_t, std::uint32_t> graph_index;
    RoadNetwork net;
    for (std::uint32_t i = 0; i < graph_ids.size(); ++i) {
      graph_index[graph_ids[i]] = i;
      net.node_pos_.push_back(nodes_.at(graph_ids[i]).pos);
      net.node_osm_.push_back(graph_ids[i]);
    }
    net.adjacency_.assign(graph_ids.size(), {});

    for (const auto& run : runs) {
      Tags kept;
      for (const auto& [k, v] : run.way->tags)
        if (k == "highway" || k == "oneway" || k == "junction" || k.starts_with("maxspeed")) kept.emplace(k, v);
      std::size_t start = 0;
      for (std::size_t i = 1; i < run.refs.size(); ++i) {
        if (!split_nodes.contains(run.refs[i])) continue;
        std::vector<GeoPoint> geom;
        for (std::size_t k = start; k <= i; ++k) geom.push_back(nodes_.at(run.refs[k]).pos);
        const auto id = static_cast<std::uint32_t>(net.edges_.size());
        RoadEdge e = RoadEdge::make(id, run.way->id, std::move(geom), run.cls, kept,
                                    graph_index.at(run.refs[start]), graph_index.at(run.refs[i]));
        start = i;
        if (!(e.length_m > 0.0)) continue;
        net.adjacency_[e.from_node].push_back(id);
        if (e.to_node != e.from_node) net.adjacency_[e.to_node].push_back(id);
        net.edges_.push_back(std::move(e));
      }
    }
    if (net.edges_.empty()) throw EmptyNetwork();

    std::vector<std::int64_t> inter_ids;
    for (const auto& [id, wc] : way_count)
      if (wc.second >= 2) inter_ids.push_back(id);
    std::sort(inter_ids.begin(), inter_ids.end());
    for (auto id : inter_ids) net.intersections_.push_back(nodes_.at(id).pos);

    std::vector<std::int64_t> node_ids;
    node_ids.reserve(nodes_.size());
    for (const auto& [id, nd] : nodes_) node_ids.push_back(id);
    std::sort(node_ids.begin(), node_ids.end());
    for (auto id : node_ids) {
      const NodeData& nd = nodes_.at(id);
      for (auto kind : focus_kinds_from_node_tags(nd.tags)) net.focus_points_.push_back({kind, nd.pos});
      if (auto it = nd.tags.find("highway"); it != nd.tags.end() && it->second == "bus_stop")
        net.bus_stops_.push_back(nd.pos);
    }
    for (const WayData* w : ways) {
      auto j = w->tags.find("junction");
      if (j == w->tags.end() || j->second != "roundabout") continue;
      if (auto c = centroid(*w)) net.focus_points_.push_back({FocusPointKind::Roundabout, *c});
    }
    net.bus_stops_.insert(net.bus_stops_.end(), extra_bus_stops_.begin(), extra_bus_stops_.end());

    net.build_indexes(opts);
    return net;
  }

 private:
  struct NodeData {
    GeoPoint pos;
    Tags tags;
  };
  struct WayData {
    std::int64_t id;
    std::vector<std::int64_t> refs;
    Tags tags;
  };

  // Mean position of a way's distinct nodes (closing node counted once).
  std::optional<GeoPoint> centroid(const WayData& w) const {
    std::vector<std::int64_t> refs;
    std::unordered_set<std::int64_t> seen;
    for (auto r : w.refs)
      if (nodes_.contains(r) && seen.insert(r).second) refs.push_back(r);
    if (refs.empty()) return std::nullopt;
    const GeoPoint& first = nodes_.at(refs.front()).pos;
    double lat = 0.0;
    double dlon = 0.0;
    for (auto r : refs) {
      const GeoPoint& p = nodes_.at(r).pos;
      lat += p.lat();
      dlon += lon_delta(first.lon(), p.lon());
    }
    const double n = static_cast<double>(refs.size());
    return GeoPoint(lat / n, first.lon() + dlon / n);
  }

  std::unordered_map<std::int64_t, NodeData> nodes_;
  std::vector<WayData> ways_;
  std::vector<GeoPoint> extra_bus_stops_;
};

/// Intersection points of a loaded network.
inline std::vector<GeoPoint> derive_intersections(const RoadNetwork& net) { return net.intersections(); }

/// Per-edge closest points within `radius_m`, nearest first.
inline std::vector<EdgeCandidate> nearest_edges(const RoadNetwork& net, const GeoPoint& p, double radius_m) {
  return net.nearest_edges(p, radius_m);
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ROAD_NETWORK_HPP
