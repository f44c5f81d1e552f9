// Synthetic networks and traces for tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "trace_enrich/geo.hpp"
#include "trace_enrich/map_match.hpp"
#include "trace_enrich/road_network.hpp"

namespace te_test {

using namespace trace_enrich;

/// Point `east_m`/`north_m` meters from `origin` in a local flat frame.
inline GeoPoint offset(const GeoPoint& origin, double east_m, double north_m) {
  const double lat = origin.lat() + north_m / kMetersPerDegree;
  const double lon = origin.lon() + east_m / (kMetersPerDegree * std::cos(deg_to_rad(origin.lat())));
  return GeoPoint(lat, lon);
}

inline const GeoPoint kOrigin{42.28, -83.74};

/// Square grid of residential streets. Node (r, c) has OSM id r*cols+c+1;
/// row r is way 1000+r and column c is way 2000+c.
struct Grid {
  int rows = 10;
  int cols = 10;
  double spacing_m = 200.0;
  GeoPoint origin = kOrigin;

  std::int64_t node_id(int r, int c) const { return static_cast<std::int64_t>(r) * cols + c + 1; }
  GeoPoint position(int r, int c) const { return offset(origin, c * spacing_m, r * spacing_m); }

  RoadNetworkBuilder builder(const Tags& way_tags = {{"highway", "residential"}}) const {
    RoadNetworkBuilder b;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) b.add_node(node_id(r, c), position(r, c));
    for (int r = 0; r < rows; ++r) {
      std::vector<std::int64_t> refs;
      for (int c = 0; c < cols; ++c) refs.push_back(node_id(r, c));
      b.add_way(1000 + r, refs, way_tags);
    }
    for (int c = 0; c < cols; ++c) {
      std::vector<std::int64_t> refs;
      for (int r = 0; r < rows; ++r) refs.push_back(node_id(r, c));
      b.add_way(2000 + c, refs, way_tags);
    }
    return b;
  }

  RoadNetwork network() const { return builder().build(); }

  /// OSM XML for the same grid.
  std::string osm_xml() const {
    std::string x = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n";
    char buf[160];
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const GeoPoint p = position(r, c);
        std::snprintf(buf, sizeof buf, "  <node id=\"%lld\" lat=\"%.9f\" lon=\"%.9f\"/>\n",
                      static_cast<long long>(node_id(r, c)), p.lat(), p.lon());
        x += buf;
      }
    }
    auto way = [&](int id, const std::vector<std::int64_t>& refs) {
      x += "  <way id=\"" + std::to_string(id) + "\">\n";
      for (auto r : refs) x += "    <nd ref=\"" + std::to_string(r) + "\"/>\n";
      x += "    <tag k=\"highway\" v=\"residential\"/>\n  </way>\n";
    };
    for (int r = 0; r < rows; ++r) {
      std::vector<std::int64_t> refs;
      for (int c = 0; c < cols; ++c) refs.push_back(node_id(r, c));
      way(1000 + r, refs);
    }
    for (int c = 0; c < cols; ++c) {
      std::vector<std::int64_t> refs;
      for (int r = 0; r < rows; ++r) refs.push_back(node_id(r, c));
      way(2000 + c, refs);
    }
    return x + "</osm>\n";
  }
};

/// Graph node index of an OSM node id.
inline std::uint32_t graph_node(const RoadNetwork& net, std::int64_t osm_id) {
  for (std::uint32_t n = 0; n < net.node_count(); ++n)
    if (net.node_osm_id(n) == osm_id) return n;
  throw std::runtime_error("node not in graph");
}

/// Edge joining two graph nodes, and whether it runs from `a` to `b`.
inline std::pair<std::uint32_t, bool> edge_between(const RoadNetwork& net, std::uint32_t a, std::uint32_t b) {
  for (auto e : net.incident_edges(a)) {
    const auto& edge = net.edge(e);
    if (edge.from_node == a && edge.to_node == b) return {e, true};
    if (edge.to_node == a && edge.from_node == b) return {e, false};
  }
  throw std::runtime_error("nodes not adjacent");
}

/// A generated trace with the true position of every record.
struct GroundTruthTrace {
  std::vector<TracePoint> points;
  std::vector<GeoPoint> truth;
  std::vector<std::uint32_t> truth_edge;
  std::vector<std::optional<std::uint32_t>> truth_node;  // set when the truth point is a graph node
};

/// Samples this close to a grid node are recorded as at that node.
inline constexpr double kAtNodeM = 0.5;

/// Random walk over a grid network without U-turns, sampled every `step_m`
/// meters with isotropic Gaussian noise of `sigma_m`.
inline GroundTruthTrace grid_walk(const Grid& g, const RoadNetwork& net, std::mt19937_64& rng, std::size_t n_points,
                                  double step_m, double sigma_m, std::int64_t veh = 1, std::int64_t trip = 1) {
  std::uniform_int_distribution<int> rd(0, g.rows - 1);
  std::uniform_int_distribution<int> cd(0, g.cols - 1);
  std::normal_distribution<double> noise(0.0, sigma_m);
  int r = rd(rng);
  int c = cd(rng);
  int pr = -1;
  int pc = -1;
  GroundTruthTrace out;
  double carry = 0.0;  // distance along the current block of the next sample
  std::int64_t ts = 0;
  while (out.points.size() < n_points) {
    std::vector<std::pair<int, int>> next;
    for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nr = r + dr;
      const int nc = c + dc;
      if (nr < 0 || nc < 0 || nr >= g.rows || nc >= g.cols || (nr == pr && nc == pc)) continue;
      next.push_back({nr, nc});
    }
    const auto [nr, nc] = next[std::uniform_int_distribution<std::size_t>(0, next.size() - 1)(rng)];
    const auto a = graph_node(net, g.node_id(r, c));
    const auto b = graph_node(net, g.node_id(nr, nc));
    const auto [eid, forward] = edge_between(net, a, b);
    const RoadEdge& e = net.edge(eid);
    for (; carry < e.length_m && out.points.size() < n_points; carry += step_m) {
      const double off = forward ? carry : e.length_m - carry;
      const GeoPoint truth = e.point_at(off);
      TracePoint p;
      p.veh_id = veh;
      p.trip = trip;
      p.timestamp_ms = ts;
      ts += 1000;
      p.raw = offset(truth, noise(rng), noise(rng));
      out.points.push_back(p);
      out.truth.push_back(truth);
      out.truth_edge.push_back(eid);
      std::optional<std::uint32_t> at;
      if (carry <= kAtNodeM) at = a;
      if (carry >= e.length_m - kAtNodeM) at = b;
      out.truth_node.push_back(at);
    }
    carry -= e.length_m;
    pr = r;
    pc = c;
    r = nr;
    c = nc;
  }
  return out;
}

/// Small random network: `nodes` points scattered in a `extent_m` square and
/// up to `max_edges` two- or three-vertex ways with random one-way tags.
inline RoadNetwork random_network(std::mt19937_64& rng, int nodes, int max_edges, double extent_m) {
  std::uniform_real_distribution<double> coord(0.0, extent_m);
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  std::uniform_int_distribution<int> dir(0, 5);
  RoadNetworkBuilder b;
  std::vector<GeoPoint> pos;
  for (int i = 0; i < nodes; ++i) {
    pos.push_back(offset(kOrigin, coord(rng), coord(rng)));
    b.add_node(i + 1, pos.back());
  }
  std::int64_t extra_id = 1000;
  for (int w = 0; w < max_edges; ++w) {
    int a = pick(rng);
    int c = pick(rng);
    if (a == c) continue;
    std::vector<std::int64_t> refs{a + 1};
    if (dir(rng) < 2) {
      const GeoPoint mid = offset(interpolate(pos[a], pos[c], 0.5), coord(rng) * 0.2 - extent_m * 0.1,
                                  coord(rng) * 0.2 - extent_m * 0.1);
      b.add_node(extra_id, mid);
      refs.push_back(extra_id++);
    }
    refs.push_back(c + 1);
    Tags tags{{"highway", "residential"}};
    const int d = dir(rng);
    if (d == 0) tags["oneway"] = "yes";
    if (d == 1) tags["oneway"] = "-1";
    b.add_way(100 + w, refs, tags);
  }
  return b.build();
}

/// A road along the x axis with `features` random infrastructure items in
/// the band |y| <= 12 m: every focus kind (roundabouts as ring ways), bus
/// stops, and intersections where two short streets meet.
inline RoadNetwork random_feature_network(std::mt19937_64& rng, int features, double length_m) {
  static const std::map<std::string_view, std::pair<std::string, std::string>> tag_of = {
      {"bollard", {"barrier", "bollard"}},
      {"bump", {"traffic_calming", "bump"}},
      {"crossing", {"highway", "crossing"}},
      {"gate", {"barrier", "gate"}},
      {"lift_gate", {"barrier", "lift_gate"}},
      {"give_way", {"highway", "give_way"}},
      {"hump", {"traffic_calming", "hump"}},
      {"level_crossing", {"railway", "level_crossing"}},
      {"mini_roundabout", {"highway", "mini_roundabout"}},
      {"motorway_junction", {"highway", "motorway_junction"}},
      {"stop_sign", {"highway", "stop"}},
      {"swing_gate", {"barrier", "swing_gate"}},
      {"traffic_signal", {"highway", "traffic_signals"}},
      {"turning_circle", {"highway", "turning_circle"}},
      {"turning_loop", {"highway", "turning_loop"}}};
  std::uniform_real_distribution<double> x(0.0, length_m);
  std::uniform_real_distribution<double> y(-12.0, 12.0);
  std::uniform_int_distribution<int> kind(0, 18);
  RoadNetworkBuilder b;
  b.add_node(1, kOrigin);
  b.add_node(2, offset(kOrigin, length_m, 0));
  b.add_way(1, {1, 2}, {{"highway", "residential"}});
  for (int f = 0; f < features; ++f) {
    const std::int64_t id = 100 + f;
    const std::int64_t aux = 10000 + 10 * static_cast<std::int64_t>(f);
    const GeoPoint p = offset(kOrigin, x(rng), y(rng));
    const int k = kind(rng);
    Tags tags;
    if (k < 16 && kFocusPointNames[k] == "roundabout") {
      constexpr double dx[] = {4, 0, -4, 0};
      constexpr double dy[] = {0, 4, 0, -4};
      std::vector<std::int64_t> ring;
      for (int q = 0; q < 4; ++q) {
        b.add_node(aux + q, offset(p, dx[q], dy[q]));
        ring.push_back(aux + q);
      }
      ring.push_back(ring.front());
      b.add_way(id, ring, {{"highway", "residential"}, {"junction", "roundabout"}});
    } else if (k < 16) {
      const auto& [key, value] = tag_of.at(kFocusPointNames[k]);
      tags[key] = value;
    } else if (k == 16) {
      tags["highway"] = "bus_stop";
    } else {
      b.add_node(aux, offset(p, 20, 0));
      b.add_node(aux + 1, offset(p, 0, 20));
      b.add_way(id, {id, aux}, {{"highway", "service"}});
      b.add_way(id + 5000, {id, aux + 1}, {{"highway", "service"}});
    }
    b.add_node(id, p, tags);
  }
  return b.build();
}

}  // namespace te_test
