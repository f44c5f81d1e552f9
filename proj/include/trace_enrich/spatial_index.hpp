#ifndef TRACE_ENRICH_SPATIAL_INDEX_HPP
#define TRACE_ENRICH_SPATIAL_INDEX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "trace_enrich/geo.hpp"

namespace trace_enrich {

namespace detail {

// Lat/lon extent of the spherical cap of `radius_m` around `center`.
// full_lon is set when the cap reaches a pole or wraps the antimeridian.
struct CapBounds {
  double min_lat, max_lat, min_lon, max_lon;
  bool full_lon;
};

inline CapBounds cap_bounds(const GeoPoint& center, double radius_m) {
  // Small outward pad so the filter never loses an item to rounding.
  const double delta = radius_m / kEarthRadiusM * (1.0 + 1e-9) + 1e-12;
  const double phi = deg_to_rad(center.lat());
  CapBounds b{};
  b.min_lat = rad_to_deg(phi - delta);
  b.max_lat = rad_to_deg(phi + delta);
  b.full_lon = true;
  if (phi + delta < kPi / 2 && phi - delta > -kPi / 2) {
    const double s = std::sin(delta) / std::cos(phi);
    if (s < 1.0) {
      const double dlon = rad_to_deg(std::asin(s)) * (1.0 + 1e-9) + 1e-12;
      b.min_lon = center.lon() - dlon;
      b.max_lon = center.lon() + dlon;
      b.full_lon = b.min_lon <= -180.0 || b.max_lon > 180.0;
    }
  }
  return b;
}

// Uniform grid over a lat/lon bounding box with roughly square cells of
// `cell_m` meters. Cells hold indices into an external item array.
class Grid {
 public:
  Grid() = default;

  Grid(const BoundingBox& box, double cell_m) : box_(box) {
    const double ref_lat = std::max(std::abs(box.min_lat), std::abs(box.max_lat));
    const double coslat = std::max(std::cos(deg_to_rad(std::min(ref_lat, 89.0))), 1e-3);
    cell_lat_ = cell_m / kMetersPerDegree;
    cell_lon_ = cell_m / (kMetersPerDegree * coslat);
    rows_ = static_cast<std::size_t>(std::floor((box.max_lat - box.min_lat) / cell_lat_)) + 1;
    cols_ = static_cast<std::size_t>(std::floor((box.max_lon - box.min_lon) / cell_lon_)) + 1;
    // Huge extents would explode memory; coarsen instead.
    constexpr std::size_t kMaxCells = std::size_t{1} << 22;
    while (rows_ * cols_ > kMaxCells) {
      cell_lat_ *= 2;
      cell_lon_ *= 2;
      rows_ = static_cast<std::size_t>(std::floor((box.max_lat - box.min_lat) / cell_lat_)) + 1;
      cols_ = static_cast<std::size_t>(std::floor((box.max_lon - box.min_lon) / cell_lon_)) + 1;
    }
    cells_.assign(rows_ * cols_, {});
  }

  bool empty() const noexcept { return cells_.empty(); }

  // Registers `item` in every cell overlapping the given box.
  void insert(std::uint32_t item, double min_lat, double max_lat, double min_lon, double max_lon) {
    auto [r0, r1] = row_range(min_lat, max_lat);
    auto [c0, c1] = col_range(min_lon, max_lon);
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) cells_[r * cols_ + c].push_back(item);
  }

  // Visits the item lists of every cell that may intersect the cap.
  template <class Visit>
  void visit_cap(const GeoPoint& center, double radius_m, Visit&& visit) const {
    if (cells_.empty()) return;
    const CapBounds cap = cap_bounds(center, radius_m);
    if (cap.max_lat < box_.min_lat || cap.min_lat > box_.max_lat) return;
    auto [r0, r1] = row_range(cap.min_lat, cap.max_lat);
    std::size_t c0 = 0;
    std::size_t c1 = cols_ - 1;
    if (!cap.full_lon) {
      if (cap.max_lon < box_.min_lon || cap.min_lon > box_.max_lon) return;
      std::tie(c0, c1) = col_range(cap.min_lon, cap.max_lon);
    }
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) visit(std::span<const std::uint32_t>(cells_[r * cols_ + c]));
  }

 private:
  static std::size_t clamp_index(double v, std::size_t n) {
    if (!(v > 0.0)) return 0;
    const double hi = static_cast<double>(n - 1);
    return v >= hi ? n - 1 : static_cast<std::size_t>(v);
  }
  std::pair<std::size_t, std::size_t> row_range(double lo, double hi) const {
    return {clamp_index(std::floor((lo - box_.min_lat) / cell_lat_), rows_),
            clamp_index(std::floor((hi - box_.min_lat) / cell_lat_), rows_)};
  }
  std::pair<std::size_t, std::size_t> col_range(double lo, double hi) const {
    return {clamp_index(std::floor((lo - box_.min_lon) / cell_lon_), cols_),
            clamp_index(std::floor((hi - box_.min_lon) / cell_lon_), cols_)};
  }

  BoundingBox box_{};
  double cell_lat_ = 1.0;
  double cell_lon_ = 1.0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
};

inline BoundingBox bounds_of(std::span<const GeoPoint> pts) {
  BoundingBox b{90.0, 180.0, -90.0, -180.0};
  for (const auto& p : pts) {
    b.min_lat = std::min(b.min_lat, p.lat());
    b.max_lat = std::max(b.max_lat, p.lat());
    b.min_lon = std::min(b.min_lon, p.lon());
    b.max_lon = std::max(b.max_lon, p.lon());
  }
  return b;
}

}  // namespace detail

/// Radius queries over a fixed set of points.
///
/// Items are bucketed on a uniform grid (default cell 100 m); a query visits
/// every cell touching the bounding box of the spherical cap and keeps the
/// items whose great-circle distance is within the radius, so results match
/// a full scan exactly.
template <class Id = std::size_t>
class SpatialIndex {
 public:
  struct Item {
    Id id;
    GeoPoint pos;
  };

  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<Item> items, double cell_m = 100.0) : items_(std::move(items)) {
    if (!(cell_m > 0.0)) throw InvalidArgument("spatial index cell size must be positive");
    if (items_.empty()) return;
    std::vector<GeoPoint> pts;
    pts.reserve(items_.size());
    for (const auto& it : items_) pts.push_back(it.pos);
    grid_ = detail::Grid(detail::bounds_of(pts), cell_m);
    for (std::uint32_t i = 0; i < items_.size(); ++i) {
      const auto& p = items_[i].pos;
      grid_.insert(i, p.lat(), p.lat(), p.lon(), p.lon());
    }
  }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const std::vector<Item>& items() const noexcept { return items_; }

  /// Ids of all items within `radius_m` of `center`, ascending by id.
  std::vector<Id> query_radius(const GeoPoint& center, double radius_m) const {
    std::vector<Id> out;
    for_each_within(center, radius_m, [&](const Item& it, double) { out.push_back(it.id); });
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Calls visit(item, distance_m) for every item within the radius.
  template <class Visit>
  void for_each_within(const GeoPoint& center, double radius_m, Visit&& visit) const {
    if (!(radius_m > 0.0)) throw InvalidArgument("query radius must be positive");
    grid_.visit_cap(center, radius_m, [&](std::span<const std::uint32_t> cell) {
      for (std::uint32_t i : cell) {
        const double d = great_circle_m(center, items_[i].pos);
        if (d <= radius_m) visit(items_[i], d);
      }
    });
  }

  bool any_within(const GeoPoint& center, double radius_m) const {
    bool hit = false;
    for_each_within(center, radius_m, [&](const Item&, double) { hit = true; });
    return hit;
  }

 private:
  std::vector<Item> items_;
  detail::Grid grid_;
};

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_SPATIAL_INDEX_HPP
