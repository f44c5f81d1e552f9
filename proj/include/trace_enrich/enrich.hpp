#ifndef TRACE_ENRICH_ENRICH_HPP
#define TRACE_ENRICH_ENRICH_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trace_enrich/elevation.hpp"
#include "trace_enrich/map_match.hpp"
#include "trace_enrich/road_network.hpp"
#include "trace_enrich/speed_limit.hpp"

namespace trace_enrich {

/// Set of focus-point kinds, as a 16-bit mask.
class FocusSet {
 public:
  void insert(FocusPointKind k) noexcept { bits_ |= bit(k); }
  bool contains(FocusPointKind k) const noexcept { return (bits_ & bit(k)) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  std::uint16_t mask() const noexcept { return bits_; }

  /// Kind names in enum order joined by ';'.
  std::string join() const {
    std::string out;
    for (std::size_t i = 0; i < kFocusPointKindCount; ++i) {
      if (!(bits_ & (1u << i))) continue;
      if (!out.empty()) out.push_back(';');
      out += kFocusPointNames[i];
    }
    return out;
  }

  static FocusSet parse(std::string_view joined) {
    FocusSet s;
    while (!joined.empty()) {
      const auto pos = joined.find(';');
      auto name = joined.substr(0, pos);
      if (auto k = focus_kind_from_name(name)) s.insert(*k);
      if (pos == std::string_view::npos) break;
      joined.remove_prefix(pos + 1);
    }
    return s;
  }

  friend bool operator==(const FocusSet&, const FocusSet&) = default;

 private:
  static std::uint16_t bit(FocusPointKind k) noexcept {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(k));
  }
  std::uint16_t bits_ = 0;
};

struct ElevationRecord {
  double raw_m = 0.0;
  double smoothed_m = 0.0;
  double gradient = 0.0;
};

/// A matched record with its speed-limit, elevation and infrastructure
/// annotations. Unmatched records keep every annotation empty.
struct AnnotatedRecord {
  MatchedPoint matched;
  std::optional<SpeedLimitRecord> speed_limit;
  std::optional<TravelDirection> direction;
  std::optional<ElevationRecord> elevation;
  bool at_intersection = false;
  bool at_bus_stop = false;
  FocusSet focus;

  bool any_infrastructure() const noexcept { return at_intersection || at_bus_stop || !focus.empty(); }
};

struct InfrastructureRadii {
  double intersection_m = 5.0;
  double bus_stop_m = 10.0;
  double focus_m = 3.0;

  void validate() const {
    if (!(intersection_m > 0.0) || !(bus_stop_m > 0.0) || !(focus_m > 0.0))
      throw ConfigError("radii must be > 0");
  }
};

/// Flags each matched or interpolated point that has an intersection, bus
/// stop or focus point within the corresponding radius of its snapped
/// position.
inline std::vector<AnnotatedRecord> annotate_infrastructure(std::span<const MatchedPoint> trace,
                                                            const RoadNetwork& net,
                                                            const InfrastructureRadii& radii = {}) {
  radii.validate();
  std::vector<AnnotatedRecord> out;
  out.reserve(trace.size());
  for (const auto& m : trace) {
    AnnotatedRecord r;
    r.matched = m;
    if (m.status != MatchStatus::Unmatched) {
      r.at_intersection = net.intersection_index().any_within(m.snapped, radii.intersection_m);
      r.at_bus_stop = net.bus_stop_index().any_within(m.snapped, radii.bus_stop_m);
      net.focus_index().for_each_within(m.snapped, radii.focus_m, [&](const auto& item, double) {
        r.focus.insert(net.focus_points()[item.id].kind);
      });
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct EnrichOptions {
  InfrastructureRadii radii;
  PerpendicularRule perpendicular = PerpendicularRule::Forward;
};

struct EnrichStats {
  std::size_t tag_parse_errors = 0;
  std::size_t missing_limits = 0;
  std::size_t elevation_requested = 0;
  std::size_t elevation_unresolved = 0;
  std::size_t gradient_warnings = 0;

  EnrichStats& operator+=(const EnrichStats& o) {
    tag_parse_errors += o.tag_parse_errors;
    missing_limits += o.missing_limits;
    elevation_requested += o.elevation_requested;
    elevation_unresolved += o.elevation_unresolved;
    gradient_warnings += o.gradient_warnings;
    return *this;
  }
};

struct EnrichedTrip {
  std::vector<AnnotatedRecord> records;
  EnrichStats stats;
};

namespace detail {

// Bearing of the first non-degenerate geometry segment at or around `seg`.
inline std::optional<BearingRad> edge_bearing_at(const RoadEdge& e, std::size_t seg) {
  for (std::size_t d = 0; d < e.geometry.size(); ++d) {
    for (std::size_t s : {seg + d, seg >= d ? seg - d : e.geometry.size()}) {
      if (s + 1 < e.geometry.size() && !(e.geometry[s] == e.geometry[s + 1]))
        return initial_bearing(e.geometry[s], e.geometry[s + 1]);
    }
  }
  return std::nullopt;
}

// Trip heading at record i: towards the next distinct snapped position,
// else from the previous one. Neighbours on the same edge are preferred.
inline std::optional<BearingRad> trip_bearing_at(std::span<const MatchedPoint> trace, std::size_t i) {
  const MatchedPoint& here = trace[i];
  auto usable = [&](const MatchedPoint& m, bool same_edge) {
    return m.status != MatchStatus::Unmatched && !(m.snapped == here.snapped) &&
           (!same_edge || m.edge_id == here.edge_id);
  };
  for (bool same_edge : {true, false}) {
    for (std::size_t j = i + 1; j < trace.size(); ++j)
      if (usable(trace[j], same_edge)) return initial_bearing(here.snapped, trace[j].snapped);
    for (std::size_t j = i; j-- > 0;)
      if (usable(trace[j], same_edge)) return initial_bearing(trace[j].snapped, here.snapped);
  }
  return std::nullopt;
}

}  // namespace detail

/// Full per-trip annotation: infrastructure flags, travel direction and
/// speed limit, then elevation (queried at snapped positions), five-point
/// smoothing and gradient over the records whose elevation resolved.
/// `elevation` may be null, leaving elevation annotations empty.
inline EnrichedTrip enrich_trip(std::span<const MatchedPoint> trace, const RoadNetwork& net,
                                ElevationProvider* elevation, const EnrichOptions& opts = {}) {
  EnrichedTrip result;
  result.records = annotate_infrastructure(trace, net, opts.radii);
  auto& recs = result.records;

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const MatchedPoint& m = trace[i];
    if (m.status == MatchStatus::Unmatched || !m.edge_id) continue;
    const RoadEdge& e = net.edge(*m.edge_id);
    TravelDirection dir = TravelDirection::Forward;
    const auto edge_b = detail::edge_bearing_at(e, e.segment_at(m.offset_m.value_or(0.0)));
    const auto trip_b = detail::trip_bearing_at(trace, i);
    if (edge_b && trip_b) dir = travel_direction(*edge_b, *trip_b, opts.perpendicular);
    recs[i].direction = dir;
    try {
      recs[i].speed_limit = speed_limit_for(e, dir);
      if (!recs[i].speed_limit) ++result.stats.missing_limits;
    } catch (const TagParseError&) {
      ++result.stats.tag_parse_errors;
      ++result.stats.missing_limits;
    }
  }

  if (elevation == nullptr) return result;
  std::vector<std::size_t> idx;
  std::vector<GeoPoint> pts;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (trace[i].status == MatchStatus::Unmatched) continue;
    idx.push_back(i);
    pts.push_back(trace[i].snapped);
  }
  result.stats.elevation_requested = pts.size();
  if (pts.empty()) return result;
  const auto values = elevation->elevations(pts);
  std::vector<std::size_t> resolved;
  std::vector<GeoPoint> res_pts;
  std::vector<double> raw;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!values[k]) {
      ++result.stats.elevation_unresolved;
      continue;
    }
    resolved.push_back(idx[k]);
    res_pts.push_back(pts[k]);
    raw.push_back(*values[k]);
  }
  const auto smoothed = smooth_elevation(raw);
  const auto grad = gradient(res_pts, smoothed);
  result.stats.gradient_warnings += grad.coincident_warnings;
  for (std::size_t k = 0; k < resolved.size(); ++k)
    recs[resolved[k]].elevation = ElevationRecord{raw[k], smoothed[k], grad.values[k]};
  return result;
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ENRICH_HPP
