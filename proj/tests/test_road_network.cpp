#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synthetic.hpp"
#include "trace_enrich/osm_xml.hpp"

using namespace trace_enrich;
using te_test::kOrigin;
using te_test::offset;

namespace {

struct XmlNode {
  std::int64_t id;
  GeoPoint pos;
  std::vector<std::pair<std::string, std::string>> tags = {};
};

struct XmlWay {
  std::int64_t id;
  std::vector<std::int64_t> refs;
  std::vector<std::pair<std::string, std::string>> tags;
};

std::string osm(const std::vector<XmlNode>& nodes, const std::vector<XmlWay>& ways) {
  std::string x = "<?xml version=\"1.0\"?>\n<osm version=\"0.6\">\n";
  char buf[128];
  for (const auto& n : nodes) {
    std::snprintf(buf, sizeof buf, "<node id=\"%lld\" lat=\"%.9f\" lon=\"%.9f\"", static_cast<long long>(n.id),
                  n.pos.lat(), n.pos.lon());
    x += buf;
    if (n.tags.empty()) {
      x += "/>\n";
      continue;
    }
    x += ">\n";
    for (const auto& [k, v] : n.tags) x += " <tag k=\"" + k + "\" v=\"" + v + "\"/>\n";
    x += "</node>\n";
  }
  for (const auto& w : ways) {
    x += "<way id=\"" + std::to_string(w.id) + "\">\n";
    for (auto r : w.refs) x += " <nd ref=\"" + std::to_string(r) + "\"/>\n";
    for (const auto& [k, v] : w.tags) x += " <tag k=\"" + k + "\" v=\"" + v + "\"/>\n";
    x += "</way>\n";
  }
  return x + "</osm>\n";
}

// A plus-shaped crossing: way 10 runs west-east, way 20 south-north, sharing node 5.
std::string cross_xml(const std::string& second_highway = "residential") {
  return osm({{1, offset(kOrigin, -100, 0)},
              {2, offset(kOrigin, 100, 0)},
              {3, offset(kOrigin, 0, -100)},
              {4, offset(kOrigin, 0, 100)},
              {5, kOrigin}},
             {{10, {1, 5, 2}, {{"highway", "primary"}}}, {20, {3, 5, 4}, {{"highway", second_highway}}}});
}

}  // namespace

TEST(LoadOsm, MinimalCrossGivesFourEdgesOneIntersection) {
  const RoadNetwork net = parse_osm(cross_xml());
  EXPECT_EQ(net.edges().size(), 4u);
  ASSERT_EQ(net.intersections().size(), 1u);
  EXPECT_EQ(net.intersections()[0], kOrigin);
  EXPECT_EQ(net.node_count(), 5u);
}

TEST(LoadOsm, NonDrivableWaysContributeNothing) {
  const RoadNetwork net = parse_osm(cross_xml("footway"));
  EXPECT_EQ(net.edges().size(), 1u);
  EXPECT_TRUE(net.intersections().empty());
  EXPECT_THROW(parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 0)}}, {{1, {1, 2}, {{"highway", "footway"}}}})),
               EmptyNetwork);
  EXPECT_THROW(parse_osm("<osm></osm>"), EmptyNetwork);
}

TEST(LoadOsm, LinkClassesAreDrivable) {
  for (const char* hw : {"motorway_link", "trunk_link", "primary_link", "secondary_link", "tertiary_link"}) {
    const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 0)}}, {{1, {1, 2}, {{"highway", hw}}}}));
    EXPECT_EQ(net.edges().size(), 1u) << hw;
  }
  EXPECT_EQ(drivable_class("motorway_link"), HighwayClass::Motorway);
  EXPECT_FALSE(drivable_class("cycleway"));
  EXPECT_FALSE(drivable_class("track"));
}

TEST(LoadOsm, GridEdgeAndIntersectionCounts) {
  te_test::Grid g{5, 5, 100.0, kOrigin};
  const RoadNetwork net = parse_osm(g.osm_xml());
  EXPECT_EQ(net.edges().size(), 40u);
  // Node multiplicity scan over way membership: every grid node lies on one row and one column.
  std::map<std::int64_t, std::set<int>> ways_of;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) ways_of[g.node_id(r, c)] = {1000 + r, 2000 + c};
  std::size_t shared = 0;
  for (const auto& [id, ws] : ways_of) shared += ws.size() >= 2;
  EXPECT_EQ(net.intersections().size(), shared);
  EXPECT_EQ(shared, 25u);
}

TEST(LoadOsm, EdgeInvariants) {
  const RoadNetwork net = parse_osm(te_test::Grid{4, 6, 150.0, kOrigin}.osm_xml());
  for (const auto& e : net.edges()) {
    ASSERT_GE(e.geometry.size(), 2u);
    EXPECT_GT(e.length_m, 0.0);
    double sum = 0.0;
    for (std::size_t i = 1; i < e.geometry.size(); ++i) sum += great_circle_m(e.geometry[i - 1], e.geometry[i]);
    EXPECT_NEAR(e.length_m, sum, 1e-6);
    EXPECT_EQ(e.geometry.front(), net.node_position(e.from_node));
    EXPECT_EQ(e.geometry.back(), net.node_position(e.to_node));
  }
  for (std::uint32_t n = 0; n < net.node_count(); ++n)
    for (auto eid : net.incident_edges(n)) {
      ASSERT_LT(eid, net.edges().size());
      const auto& e = net.edge(eid);
      EXPECT_TRUE(e.from_node == n || e.to_node == n);
    }
}

TEST(LoadOsm, IntermediateShapeNodesStayInsideEdges) {
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 10)}, {3, offset(kOrigin, 100, 0)}},
                                 {{1, {1, 2, 3}, {{"highway", "service"}, {"maxspeed", "15 mph"}, {"name", "X"}}}}));
  ASSERT_EQ(net.edges().size(), 1u);
  const auto& e = net.edge(0);
  EXPECT_EQ(e.geometry.size(), 3u);
  EXPECT_EQ(e.highway_class, HighwayClass::Service);
  EXPECT_EQ(e.tag("maxspeed"), "15 mph");
  EXPECT_FALSE(e.tag("name"));
  EXPECT_EQ(e.way_id, 1);
}

TEST(LoadOsm, OneWayTags) {
  EXPECT_EQ(parse_oneway("yes"), OneWay::Forward);
  EXPECT_EQ(parse_oneway("true"), OneWay::Forward);
  EXPECT_EQ(parse_oneway("1"), OneWay::Forward);
  EXPECT_EQ(parse_oneway("-1"), OneWay::Backward);
  EXPECT_EQ(parse_oneway("reverse"), OneWay::Backward);
  EXPECT_EQ(parse_oneway("no"), OneWay::Both);
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 0)}},
                                 {{1, {1, 2}, {{"highway", "primary"}, {"oneway", "-1"}}}}));
  EXPECT_FALSE(net.edge(0).forward_allowed());
  EXPECT_TRUE(net.edge(0).backward_allowed());
}

TEST(LoadOsm, SelfIntersectingWaySplitsAtRepeatedNode) {
  // Lollipop: 1 -> 2 -> 3 -> 4 -> 2.
  const auto net = parse_osm(osm({{1, kOrigin},
                                  {2, offset(kOrigin, 100, 0)},
                                  {3, offset(kOrigin, 150, 50)},
                                  {4, offset(kOrigin, 150, -50)}},
                                 {{1, {1, 2, 3, 4, 2}, {{"highway", "residential"}}}}));
  EXPECT_EQ(net.edges().size(), 2u);
  EXPECT_TRUE(net.intersections().empty());
}

TEST(LoadOsm, FocusPointsAndBusStops) {
  const auto net = parse_osm(osm({{1, kOrigin, {{"highway", "traffic_signals"}}},
                                  {2, offset(kOrigin, 100, 0), {{"highway", "crossing"}}},
                                  {3, offset(kOrigin, 50, 20), {{"highway", "bus_stop"}}},
                                  {4, offset(kOrigin, 60, 0), {{"traffic_calming", "hump"}, {"barrier", "gate"}}},
                                  {5, offset(kOrigin, 70, 0), {{"highway", "speed_camera"}}},
                                  {6, offset(kOrigin, 80, 0), {{"railway", "level_crossing"}}}},
                                 {{1, {1, 4, 5, 6, 2}, {{"highway", "residential"}}}}));
  std::multiset<std::string_view> kinds;
  for (const auto& f : net.focus_points()) kinds.insert(to_string(f.kind));
  EXPECT_EQ(kinds, (std::multiset<std::string_view>{"traffic_signal", "crossing", "hump", "gate", "level_crossing"}));
  ASSERT_EQ(net.bus_stops().size(), 1u);
  EXPECT_LT(great_circle_m(net.bus_stops()[0], offset(kOrigin, 50, 20)), 1e-3);
}

TEST(FocusKinds, AllSixteenNamesRoundTripAndUnknownIsIgnored) {
  EXPECT_EQ(kFocusPointNames.size(), 16u);
  for (std::size_t i = 0; i < kFocusPointKindCount; ++i) {
    auto k = focus_kind_from_name(kFocusPointNames[i]);
    ASSERT_TRUE(k);
    EXPECT_EQ(to_string(*k), kFocusPointNames[i]);
  }
  EXPECT_FALSE(focus_kind_from_name("speed_camera"));
  EXPECT_TRUE(focus_kinds_from_node_tags({{"highway", "speed_camera"}}).empty());
  EXPECT_TRUE(focus_kinds_from_node_tags({{"barrier", "wall"}}).empty());
  const std::map<std::string, std::string> each = {
      {"highway=crossing", "crossing"},          {"highway=traffic_signals", "traffic_signal"},
      {"highway=stop", "stop_sign"},             {"highway=give_way", "give_way"},
      {"highway=turning_circle", "turning_circle"}, {"highway=turning_loop", "turning_loop"},
      {"highway=mini_roundabout", "mini_roundabout"}, {"highway=motorway_junction", "motorway_junction"},
      {"railway=level_crossing", "level_crossing"}, {"traffic_calming=bump", "bump"},
      {"traffic_calming=hump", "hump"},          {"barrier=gate", "gate"},
      {"barrier=lift_gate", "lift_gate"},        {"barrier=bollard", "bollard"},
      {"barrier=swing_gate", "swing_gate"}};
  for (const auto& [kv, name] : each) {
    const auto eq = kv.find('=');
    const auto kinds = focus_kinds_from_node_tags({{kv.substr(0, eq), kv.substr(eq + 1)}});
    ASSERT_EQ(kinds.size(), 1u) << kv;
    EXPECT_EQ(to_string(kinds[0]), name);
  }
}

TEST(LoadOsm, RoundaboutWayAddsCentroidFocusPoint) {
  const auto net = parse_osm(osm({{1, offset(kOrigin, 0, 20)},
                                  {2, offset(kOrigin, 20, 0)},
                                  {3, offset(kOrigin, 0, -20)},
                                  {4, offset(kOrigin, -20, 0)}},
                                 {{1, {1, 2, 3, 4, 1}, {{"highway", "primary"}, {"junction", "roundabout"}}}}));
  ASSERT_EQ(net.focus_points().size(), 1u);
  EXPECT_EQ(net.focus_points()[0].kind, FocusPointKind::Roundabout);
  EXPECT_LT(great_circle_m(net.focus_points()[0].pos, kOrigin), 0.01);
}

TEST(LoadOsm, BoundingBoxDropsOutsideNodes) {
  OsmLoadOptions opts;
  const GeoPoint lo = offset(kOrigin, -150, -150);
  const GeoPoint hi = offset(kOrigin, 50, 150);
  opts.bbox = BoundingBox{lo.lat(), lo.lon(), hi.lat(), hi.lon()};
  const RoadNetwork net = parse_osm(cross_xml(), opts);
  // Node 2 (east) is outside, so way 10 keeps only 1-5.
  EXPECT_EQ(net.edges().size(), 3u);
}

TEST(LoadOsm, MalformedXmlReportsLine) {
  try {
    parse_osm("<osm>\n<node id=\"1\" lat=\"1\" lon=\"2\">\n</way>\n</osm>", {}, "bad.osm");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "bad.osm");
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bad.osm:3:"), std::string::npos);
  }
  try {
    parse_osm("<osm>\n\n<node id=\"x\" lat=\"1\" lon=\"2\"/>\n</osm>", {}, "ids.osm");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_osm("<osm><node id=\"1\" lat=\"95\" lon=\"2\"/></osm>"), ParseError);
  EXPECT_THROW(parse_osm("<osm><node id=\"1\" lat=\"5\" lon=\"nan\"/></osm>"), ParseError);
  EXPECT_THROW(load_osm("/nonexistent/map.osm"), ParseError);
}

TEST(LoadOsm, BusStopCsv) {
  const auto path = std::filesystem::temp_directory_path() / "te_bus_stops.csv";
  {
    std::ofstream os(path);
    os << "stop_id,lat,lon\nA,42.28,-83.74\nB,42.281,-83.741\n";
  }
  OsmLoadOptions opts;
  opts.bus_stop_csv = path.string();
  const auto net = parse_osm(cross_xml(), opts);
  EXPECT_EQ(net.bus_stops().size(), 2u);
  {
    std::ofstream os(path);
    os << "stop_id,lat,lon\nA,42.28,-83.74\nB,abc,-83.741\n";
  }
  try {
    parse_osm(cross_xml(), opts);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::filesystem::remove(path);
}

TEST(DefaultSpeedLimit, Table) {
  EXPECT_NEAR(default_speed_limit(HighwayClass::Motorway), 112.65, 0.01);
  EXPECT_NEAR(default_speed_limit(HighwayClass::Residential), 40.23, 0.01);
  EXPECT_DOUBLE_EQ(default_speed_limit(HighwayClass::Motorway), 112.65408);
  EXPECT_DOUBLE_EQ(default_speed_limit(HighwayClass::Residential), 40.2336);
  EXPECT_DOUBLE_EQ(default_speed_limit(HighwayClass::Secondary), 72.42048);
  EXPECT_DOUBLE_EQ(default_speed_limit(HighwayClass::Tertiary), 56.32704);
  EXPECT_DOUBLE_EQ(default_speed_limit(HighwayClass::Primary), 88.51392);
  EXPECT_THROW(default_speed_limit(HighwayClass::Other), NoDefault);
}

TEST(Intersections, SingleWayHasNone) {
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 0)}, {3, offset(kOrigin, 100, 0)}},
                                 {{1, {1, 2, 3}, {{"highway", "residential"}}}}));
  EXPECT_TRUE(derive_intersections(net).empty());
}

TEST(Intersections, TJunctionIsTheSharedNode) {
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 50, 0)}, {3, offset(kOrigin, 100, 0)},
                                  {4, offset(kOrigin, 50, 80)}},
                                 {{1, {1, 2, 3}, {{"highway", "residential"}}}, {2, {2, 4}, {{"highway", "service"}}}}));
  ASSERT_EQ(derive_intersections(net).size(), 1u);
  EXPECT_LT(great_circle_m(derive_intersections(net)[0], offset(kOrigin, 50, 0)), 1e-3);
  EXPECT_EQ(net.edges().size(), 3u);
}

TEST(Intersections, RandomNetworksMatchMembershipScan) {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 50; ++round) {
    std::uniform_int_distribution<int> node(1, 30);
    std::uniform_int_distribution<int> len(2, 6);
    std::uniform_int_distribution<int> kind(0, 3);
    RoadNetworkBuilder b;
    std::uniform_real_distribution<double> m(0, 1000);
    for (int i = 1; i <= 30; ++i) b.add_node(i, offset(kOrigin, m(rng), m(rng)));
    std::map<std::int64_t, std::set<std::int64_t>> membership;
    for (int w = 1; w <= 12; ++w) {
      std::vector<std::int64_t> refs;
      const int n = len(rng);
      for (int k = 0; k < n; ++k) {
        const int id = node(rng);
        if (refs.empty() || refs.back() != id) refs.push_back(id);
      }
      const bool drivable = kind(rng) != 0;
      b.add_way(w, refs, {{"highway", drivable ? "residential" : "footway"}});
      if (drivable && refs.size() >= 2)
        for (auto r : refs) membership[r].insert(w);
    }
    RoadNetwork net;
    try {
      net = b.build();
    } catch (const EmptyNetwork&) {
      continue;
    }
    std::set<std::pair<double, double>> expected;
    for (const auto& [id, ws] : membership)
      if (ws.size() >= 2) {
        // Recover the position through the graph.
        const auto n = te_test::graph_node(net, id);
        expected.insert({net.node_position(n).lat(), net.node_position(n).lon()});
      }
    std::set<std::pair<double, double>> got;
    for (const auto& p : derive_intersections(net)) got.insert({p.lat(), p.lon()});
    EXPECT_EQ(got, expected);
  }
}

TEST(NearestEdges, VertexAndPerpendicular) {
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 100, 0)}}, {{1, {1, 2}, {{"highway", "primary"}}}}));
  auto on_vertex = nearest_edges(net, kOrigin, 10.0);
  ASSERT_EQ(on_vertex.size(), 1u);
  EXPECT_EQ(on_vertex[0].distance_m, 0.0);
  EXPECT_EQ(on_vertex[0].offset_m, 0.0);
  auto perp = nearest_edges(net, offset(kOrigin, 30, 5), 10.0);
  ASSERT_EQ(perp.size(), 1u);
  EXPECT_NEAR(perp[0].distance_m, 5.0, 0.05);
  EXPECT_NEAR(perp[0].offset_m, 30.0, 0.05);
  EXPECT_TRUE(nearest_edges(net, offset(kOrigin, 30, 60), 50.0).empty());
  EXPECT_THROW(nearest_edges(net, kOrigin, 0.0), InvalidArgument);
}

TEST(NearestEdges, ParallelRoadsNearerFirst) {
  const auto net = parse_osm(osm({{1, kOrigin}, {2, offset(kOrigin, 200, 0)}, {3, offset(kOrigin, 0, 20)},
                                  {4, offset(kOrigin, 200, 20)}},
                                 {{1, {1, 2}, {{"highway", "primary"}}}, {2, {3, 4}, {{"highway", "primary"}}}}));
  const auto c = nearest_edges(net, offset(kOrigin, 100, 13), 50.0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(net.edge(c[0].edge_id).way_id, 2);
  EXPECT_EQ(net.edge(c[1].edge_id).way_id, 1);
  EXPECT_LT(c[0].distance_m, c[1].distance_m);
}

TEST(NearestEdges, MatchesBruteForceScan) {
  std::mt19937_64 rng(2024);
  const auto net = te_test::Grid{6, 6, 120.0, kOrigin}.network();
  std::uniform_real_distribution<double> m(-100.0, 700.0);
  for (int q = 0; q < 2000; ++q) {
    const GeoPoint p = offset(kOrigin, m(rng), m(rng));
    for (double r : {5.0, 30.0, 150.0}) {
      const auto got = nearest_edges(net, p, r);
      const auto want = te_test::brute_candidates(net, p, r);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].edge_id, want[i].edge_id);
        EXPECT_EQ(got[i].distance_m, want[i].distance_m);
        EXPECT_EQ(got[i].point, want[i].point);
        EXPECT_EQ(got[i].offset_m, want[i].offset_m);
      }
    }
  }
}
