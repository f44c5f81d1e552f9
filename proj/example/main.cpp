// Library walkthrough: build a small road network, match a noisy trace onto
// it, enrich the matched records and estimate the trip's energy.

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "trace_enrich.hpp"

using namespace trace_enrich;

namespace {

GeoPoint local(double east_m, double north_m) {
  const GeoPoint origin(42.28, -83.74);
  return GeoPoint(origin.lat() + north_m / kMetersPerDegree,
                  origin.lon() + east_m / (kMetersPerDegree * std::cos(deg_to_rad(origin.lat()))));
}

// Terrain rising 3 m per 100 m eastwards.
class Ramp : public ElevationProvider {
 public:
  std::vector<std::optional<double>> elevations(std::span<const GeoPoint> points) override {
    std::vector<std::optional<double>> out;
    const GeoPoint west = local(0, 0);
    for (const auto& p : points) out.push_back(250.0 + 0.03 * great_circle_m(west, GeoPoint(west.lat(), p.lon())));
    return out;
  }
};

}  // namespace

int main() {
  // An east-west arterial crossed by a residential street at a signal.
  RoadNetworkBuilder b;
  b.add_node(1, local(0, 0));
  b.add_node(2, local(400, 0), {{"highway", "traffic_signals"}});
  b.add_node(3, local(800, 0));
  b.add_node(4, local(400, -300));
  b.add_node(5, local(400, 300));
  b.add_way(10, {1, 2, 3}, {{"highway", "secondary"}, {"maxspeed", "35 mph"}});
  b.add_way(20, {4, 2, 5}, {{"highway", "residential"}});
  b.add_bus_stop(local(606, 4));
  const RoadNetwork net = b.build();

  // One sample per second at 54 km/h with 4 m of GPS noise.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 4.0);
  std::vector<TracePoint> trace;
  for (int i = 0; i < 50; ++i) {
    TracePoint p;
    p.veh_id = 1;
    p.trip = 1;
    p.timestamp_ms = i * 1000;
    p.raw = local(15.0 * i + noise(rng), noise(rng));
    p.speed_kmh = 54.0;
    p.energy = 0.02 + 0.0004 * i;
    trace.push_back(p);
  }

  const auto matched = viterbi_match(trace, net, HmmParams{});
  std::printf("match rate %.3f\n", match_rate(matched));

  Ramp terrain;
  const auto enriched = enrich_trip(matched, net, &terrain);
  std::printf("%4s %-12s %6s %10s %9s %5s %4s %s\n", "i", "status", "edge", "limit_kmh", "gradient", "inter", "bus",
              "focus");
  for (std::size_t i = 0; i < enriched.records.size(); ++i) {
    const auto& r = enriched.records[i];
    if (i % 10 && !r.at_intersection && !r.at_bus_stop && r.focus.empty()) continue;
    std::printf("%4zu %-12.*s %6d %10.2f %9.4f %5d %4d %s\n", i, static_cast<int>(to_string(r.matched.status).size()),
                to_string(r.matched.status).data(), r.matched.edge_id ? static_cast<int>(*r.matched.edge_id) : -1,
                r.speed_limit ? r.speed_limit->value_kmh : 0.0, r.elevation ? r.elevation->gradient : 0.0,
                r.at_intersection, r.at_bus_stop, r.focus.join().c_str());
  }

  // Per-second energy by speed bin, then the trip estimate from those rates.
  AnalysisTrip trip{1, 1, {}};
  for (std::size_t i = 0; i < trace.size(); ++i) {
    AnalysisRecord a;
    a.timestamp_ms = trace[i].timestamp_ms;
    a.day_num = 100.5;
    a.speed_kmh = trace[i].speed_kmh;
    a.energy = trace[i].energy;
    if (const auto& l = enriched.records[i].speed_limit) a.limit_kmh = l->value_kmh;
    trip.records.push_back(a);
  }
  const std::vector<AnalysisTrip> trips{trip};
  const auto stats = build_stats(trips);
  const auto est = estimate_trip_energy(trip, stats);
  std::printf("estimated energy %.4f, recorded %.4f\n", est.estimated, est.actual.value_or(0.0));
  return 0;
}
