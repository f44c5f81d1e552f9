#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "synthetic.hpp"
#include "trace_enrich/spatial_index.hpp"

using namespace trace_enrich;
using te_test::kOrigin;
using te_test::offset;

namespace {

std::vector<std::size_t> brute(const std::vector<SpatialIndex<>::Item>& items, const GeoPoint& c, double r) {
  std::vector<std::size_t> out;
  for (const auto& it : items)
    if (great_circle_m(c, it.pos) <= r) out.push_back(it.id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(SpatialIndex, ConstructedLayout) {
  const GeoPoint c = kOrigin;
  SpatialIndex<> idx({{1, offset(c, 2, 0)}, {2, offset(c, 0, 20)}});
  EXPECT_EQ(idx.query_radius(c, 10.0), std::vector<std::size_t>{1});
  EXPECT_EQ(idx.query_radius(c, 25.0), (std::vector<std::size_t>{1, 2}));
}

TEST(SpatialIndex, TinyRadiusAroundExactPosition) {
  const GeoPoint p = offset(kOrigin, 37, -12);
  SpatialIndex<> idx({{7, p}, {8, offset(p, 0.01, 0)}});
  EXPECT_EQ(idx.query_radius(p, 0.0001), std::vector<std::size_t>{7});
}

TEST(SpatialIndex, RejectsNonPositiveRadiusAndCell) {
  SpatialIndex<> idx({{1, kOrigin}});
  EXPECT_THROW(idx.query_radius(kOrigin, 0.0), InvalidArgument);
  EXPECT_THROW(idx.query_radius(kOrigin, -1.0), InvalidArgument);
  EXPECT_THROW(SpatialIndex<>({{1, kOrigin}}, 0.0), InvalidArgument);
}

TEST(SpatialIndex, EmptyIndexReturnsNothing) {
  SpatialIndex<> idx;
  EXPECT_TRUE(idx.query_radius(kOrigin, 100.0).empty());
  EXPECT_FALSE(idx.any_within(kOrigin, 100.0));
}

TEST(SpatialIndex, MatchesBruteForceScan) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> m(-1500.0, 1500.0);
  std::vector<SpatialIndex<>::Item> items;
  for (std::size_t i = 0; i < 1000; ++i) items.push_back({i, offset(kOrigin, m(rng), m(rng))});
  for (double cell : {10.0, 100.0, 1000.0}) {
    SpatialIndex<> idx(items, cell);
    for (int q = 0; q < 300; ++q) {
      const GeoPoint c = offset(kOrigin, m(rng) * 1.1, m(rng) * 1.1);
      for (double r : {3.0, 50.0, 400.0}) EXPECT_EQ(idx.query_radius(c, r), brute(items, c, r));
    }
  }
}

TEST(SpatialIndex, BoundaryDistanceIsInclusive) {
  const GeoPoint c = kOrigin;
  const GeoPoint p = offset(c, 10, 0);
  SpatialIndex<> idx({{1, p}});
  const double d = great_circle_m(c, p);
  EXPECT_EQ(idx.query_radius(c, d).size(), 1u);
  EXPECT_TRUE(idx.query_radius(c, std::nextafter(d, 0.0)).empty());
}

TEST(SpatialIndex, WorksAcrossAntimeridianAndNearPoles) {
  std::vector<SpatialIndex<>::Item> items{{1, {10.0, 179.9999}}, {2, {10.0, -179.9999}}, {3, {89.9999, 0.0}},
                                          {4, {89.9999, 180.0}}, {5, {-89.9999, 45.0}}};
  SpatialIndex<> idx(items);
  for (const auto& c : {GeoPoint(10.0, 180.0), GeoPoint(90.0, 0.0), GeoPoint(-90.0, 0.0), GeoPoint(89.99, 90.0)})
    for (double r : {5.0, 50.0, 5000.0}) EXPECT_EQ(idx.query_radius(c, r), brute(items, c, r));
}

TEST(SpatialIndex, ForEachReportsDistance) {
  const GeoPoint c = kOrigin;
  SpatialIndex<int> idx({{4, offset(c, 3, 4)}});
  int hits = 0;
  idx.for_each_within(c, 10.0, [&](const auto& item, double d) {
    EXPECT_EQ(item.id, 4);
    EXPECT_NEAR(d, 5.0, 1e-3);
    ++hits;
  });
  EXPECT_EQ(hits, 1);
}
