#ifndef TRACE_ENRICH_SPEED_LIMIT_HPP
#define TRACE_ENRICH_SPEED_LIMIT_HPP

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "trace_enrich/geo.hpp"
#include "trace_enrich/road_network.hpp"

namespace trace_enrich {

enum class TravelDirection { Forward, Backward };

/// Resolution for the perpendicular case cos(edge - trip) == 0.
enum class PerpendicularRule { Forward, Backward };

/// Forward when the trip bearing lies within 90 degrees of the edge bearing.
/// A wrapped difference of exactly +-kPi/2 is the perpendicular case.
inline TravelDirection travel_direction(BearingRad edge_bearing, BearingRad trip_bearing,
                                        PerpendicularRule tie = PerpendicularRule::Forward) {
  double d = edge_bearing.value() - trip_bearing.value();
  if (d > kPi) d -= 2.0 * kPi;
  if (d <= -kPi) d += 2.0 * kPi;
  if (std::abs(d) == kPi / 2.0)
    return tie == PerpendicularRule::Forward ? TravelDirection::Forward : TravelDirection::Backward;
  return std::cos(d) > 0.0 ? TravelDirection::Forward : TravelDirection::Backward;
}

/// Parses an OSM speed value: a bare number (km/h), or a number followed by
/// "mph", "km/h", "kmh", "kph" or "knots". Throws TagParseError otherwise.
inline double parse_speed_kmh(std::string_view raw) {
  std::string_view s = raw;
  auto trim = [](std::string_view& v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
  };
  trim(s);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr == s.data()) throw TagParseError(std::string(raw));
  std::string_view unit(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr));
  trim(unit);
  double factor = 0.0;
  if (unit.empty() || unit == "km/h" || unit == "kmh" || unit == "kph") {
    factor = 1.0;
  } else if (unit == "mph") {
    factor = kKmhPerMph;
  } else if (unit == "knots") {
    factor = 1.852;
  } else {
    throw TagParseError(std::string(raw));
  }
  if (!std::isfinite(value) || !(value > 0.0)) throw TagParseError(std::string(raw));
  return value * factor;
}

struct SpeedLimitRecord {
  double value_kmh = 0.0;
  SpeedLimitClass cls = SpeedLimitClass::Default;
  std::optional<double> directional_value_kmh;

  friend bool operator==(const SpeedLimitRecord&, const SpeedLimitRecord&) = default;
};

/// Speed limit of `edge` for a vehicle travelling in `dir`.
///
/// Precedence: direction-specific tag (class -1) > maxspeed (0) >
/// maxspeed:advisory (2) > maxspeed:practical (3) > statutory default (1).
/// A class -1 record needs the tag for the travelled direction; when only
/// the opposite direction is tagged the lower classes apply. Returns
/// nullopt when nothing applies (untagged `Other` road). Throws
/// TagParseError on an unparsable value.
inline std::optional<SpeedLimitRecord> speed_limit_for(const RoadEdge& edge, TravelDirection dir) {
  const auto legal = edge.tag("maxspeed");
  const auto directional = edge.tag(dir == TravelDirection::Forward ? "maxspeed:forward" : "maxspeed:backward");
  if (directional) {
    const double d = parse_speed_kmh(*directional);
    return SpeedLimitRecord{legal ? parse_speed_kmh(*legal) : d, SpeedLimitClass::DirectionDependent, d};
  }
  if (legal) return SpeedLimitRecord{parse_speed_kmh(*legal), SpeedLimitClass::Legal, std::nullopt};
  if (auto v = edge.tag("maxspeed:advisory"))
    return SpeedLimitRecord{parse_speed_kmh(*v), SpeedLimitClass::Advisory, std::nullopt};
  if (auto v = edge.tag("maxspeed:practical"))
    return SpeedLimitRecord{parse_speed_kmh(*v), SpeedLimitClass::Practical, std::nullopt};
  if (edge.highway_class == HighwayClass::Other) return std::nullopt;
  return SpeedLimitRecord{default_speed_limit(edge.highway_class), SpeedLimitClass::Default, std::nullopt};
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_SPEED_LIMIT_HPP
