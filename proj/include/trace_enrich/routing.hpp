#ifndef TRACE_ENRICH_ROUTING_HPP
#define TRACE_ENRICH_ROUTING_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "trace_enrich/road_network.hpp"

namespace trace_enrich {

/// A position on the network: an edge and a distance from its start.
struct EdgeAnchor {
  std::uint32_t edge_id = 0;
  double offset_m = 0.0;
};

/// Shortest drivable distances between edge anchors.
///
/// Uniform-cost search over graph nodes with the two anchors as virtual
/// endpoints. One-way edges are only traversed in their permitted direction.
/// A Router keeps scratch buffers between queries and is not thread-safe;
/// use one per worker.
class Router {
 public:
  explicit Router(const RoadNetwork& net)
      : net_(net), dist_(net.node_count(), kInf) {}

  static constexpr double kInf = std::numeric_limits<double>::infinity();

  /// Distances from `source` to every target; nullopt where the shortest
  /// route is longer than `limit_m` (or absent).
  std::vector<std::optional<double>> one_to_many(const EdgeAnchor& source, std::span<const EdgeAnchor> targets,
                                                 double limit_m) {
    std::vector<double> best(targets.size(), kInf);
    const RoadEdge& se = net_.edge(source.edge_id);

    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i].edge_id != source.edge_id) continue;
      const double d = targets[i].offset_m - source.offset_m;
      if (d >= 0.0 && se.forward_allowed()) best[i] = d;
      if (d <= 0.0 && se.backward_allowed()) best[i] = std::min(best[i], -d);
    }

    // Node -> targets that can be entered from it, with the entry cost.
    std::vector<std::pair<std::uint32_t, std::pair<std::size_t, double>>> entries;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const RoadEdge& te = net_.edge(targets[i].edge_id);
      if (te.forward_allowed()) entries.push_back({te.from_node, {i, targets[i].offset_m}});
      if (te.backward_allowed()) entries.push_back({te.to_node, {i, te.length_m - targets[i].offset_m}});
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    using QItem = std::pair<double, std::uint32_t>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;
    auto relax = [&](std::uint32_t node, double d) {
      if (d < dist_[node]) {
        if (dist_[node] == kInf) touched_.push_back(node);
        dist_[node] = d;
        queue.push({d, node});
      }
    };
    if (se.forward_allowed()) relax(se.to_node, se.length_m - source.offset_m);
    if (se.backward_allowed()) relax(se.from_node, source.offset_m);

    auto bound = [&] {
      double worst = 0.0;
      for (double b : best) worst = std::max(worst, b);
      return std::min(worst, limit_m);
    };
    double stop_at = bound();
    while (!queue.empty()) {
      const auto [d, node] = queue.top();
      queue.pop();
      if (d > dist_[node]) continue;
      if (d > stop_at) break;
      auto it = std::lower_bound(entries.begin(), entries.end(), node,
                                 [](const auto& e, std::uint32_t n) { return e.first < n; });
      bool improved = false;
      for (; it != entries.end() && it->first == node; ++it) {
        const auto [ti, cost] = it->second;
        if (d + cost < best[ti]) {
          best[ti] = d + cost;
          improved = true;
        }
      }
      if (improved) stop_at = bound();
      for (std::uint32_t eid : net_.incident_edges(node)) {
        const RoadEdge& e = net_.edge(eid);
        if (e.from_node == node && e.forward_allowed()) relax(e.to_node, d + e.length_m);
        if (e.to_node == node && e.backward_allowed()) relax(e.from_node, d + e.length_m);
      }
    }
    for (std::uint32_t n : touched_) dist_[n] = kInf;
    touched_.clear();

    std::vector<std::optional<double>> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (best[i] <= limit_m) out[i] = best[i];
    return out;
  }

 private:
  const RoadNetwork& net_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> touched_;
};

/// Shortest drivable distance from one anchor to another, or nullopt when
/// it exceeds `limit_m`.
inline std::optional<double> route_distance(const RoadNetwork& net, const EdgeAnchor& from, const EdgeAnchor& to,
                                            double limit_m) {
  Router router(net);
  return router.one_to_many(from, std::span<const EdgeAnchor>(&to, 1), limit_m)[0];
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ROUTING_HPP
