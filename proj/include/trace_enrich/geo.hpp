#ifndef TRACE_ENRICH_GEO_HPP
#define TRACE_ENRICH_GEO_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "trace_enrich/errors.hpp"

namespace trace_enrich {

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kPi = std::numbers::pi;
// Meters per degree of arc on the reference sphere.
inline constexpr double kMetersPerDegree = kEarthRadiusM * kPi / 180.0;

constexpr double deg_to_rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / kPi; }

// Maps any finite longitude into (-180, 180]; -180 becomes +180.
inline double normalize_lon(double lon) {
  if (lon > -180.0 && lon <= 180.0) return lon;
  double r = std::fmod(lon, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

/// A WGS84 latitude/longitude pair in degrees.
///
/// Latitude must lie in [-90, 90]; longitude is normalized into (-180, 180]
/// so that equal locations compare equal.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
    if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0) {
      throw InvalidArgument("invalid coordinate (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
    }
    lon_ = normalize_lon(lon);
  }

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Bearing in radians, clockwise from north, in (-pi, pi].
class BearingRad {
 public:
  constexpr BearingRad() = default;
  explicit BearingRad(double rad) : value_(wrap(rad)) {}

  constexpr double value() const noexcept { return value_; }

 private:
  static double wrap(double rad) {
    if (rad > -kPi && rad <= kPi) return rad;
    double r = std::remainder(rad, 2.0 * kPi);
    return r <= -kPi ? r + 2.0 * kPi : r;
  }

  double value_ = 0.0;
};

/// Initial bearing of the great-circle path from `a` to `b`.
/// Throws DegenerateSegment when the points coincide.
inline BearingRad initial_bearing(const GeoPoint& a, const GeoPoint& b) {
  if (a == b) throw DegenerateSegment();
  const double phi1 = deg_to_rad(a.lat());
  const double phi2 = deg_to_rad(b.lat());
  const double dlambda = deg_to_rad(b.lon() - a.lon());
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return BearingRad(std::atan2(y, x));
}

/// Haversine distance in meters on a sphere of radius kEarthRadiusM.
inline double great_circle_m(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double phi1 = deg_to_rad(a.lat());
  const double phi2 = deg_to_rad(b.lat());
  const double sdphi = std::sin((phi2 - phi1) / 2.0);
  const double sdlambda = std::sin(deg_to_rad(b.lon() - a.lon()) / 2.0);
  const double h = sdphi * sdphi + std::cos(phi1) * std::cos(phi2) * sdlambda * sdlambda;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

// Signed longitude difference b - a wrapped into (-180, 180].
inline double lon_delta(double a, double b) noexcept { return normalize_lon(b - a); }

/// Point at fraction t of the straight lat/lon segment a->b. The endpoints are
/// returned bit-exactly for t <= 0 and t >= 1.
inline GeoPoint interpolate(const GeoPoint& a, const GeoPoint& b, double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  return GeoPoint(a.lat() + t * (b.lat() - a.lat()), a.lon() + t * lon_delta(a.lon(), b.lon()));
}

struct SegmentProjection {
  GeoPoint point;
  double t = 0.0;           // fraction along the segment, in [0, 1]
  double distance_m = 0.0;  // great-circle distance from the query point
};

/// Closest point to `p` on segment a->b, found in a local equirectangular
/// frame centered at `p` and measured back with the haversine distance.
inline SegmentProjection project_onto_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double kx = std::cos(deg_to_rad(p.lat()));
  const double ax = lon_delta(p.lon(), a.lon()) * kx;
  const double ay = a.lat() - p.lat();
  const double bx = lon_delta(p.lon(), b.lon()) * kx;
  const double by = b.lat() - p.lat();
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(-(ax * dx + ay * dy) / len2, 0.0, 1.0);
  GeoPoint q = interpolate(a, b, t);
  return {q, t, great_circle_m(p, q)};
}

/// Axis-aligned lat/lon box, inclusive.
struct BoundingBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  bool contains(const GeoPoint& p) const noexcept {
    return p.lat() >= min_lat && p.lat() <= max_lat && p.lon() >= min_lon && p.lon() <= max_lon;
  }
};

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_GEO_HPP
