#ifndef TRACE_ENRICH_MAP_MATCH_HPP
#define TRACE_ENRICH_MAP_MATCH_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trace_enrich/geo.hpp"
#include "trace_enrich/road_network.hpp"
#include "trace_enrich/routing.hpp"
#include "trace_enrich/viterbi.hpp"

namespace trace_enrich {

/// HMM map-matching parameters. Distances in meters, gap in seconds.
struct HmmParams {
  double sigma_z = 4.07;
  double beta = 20.0;
  double candidate_radius_m = 50.0;
  double route_search_limit_m = 2000.0;
  double break_gap_s = 120.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("hmm.") + name + " must be > 0");
    };
    positive(sigma_z, "sigma_z");
    positive(beta, "beta");
    positive(candidate_radius_m, "candidate_radius");
    positive(route_search_limit_m, "route_search_limit");
    positive(break_gap_s, "break_gap");
  }
};

enum class MatchStatus { Matched, Interpolated, Unmatched };

inline std::string_view to_string(MatchStatus s) {
  switch (s) {
    case MatchStatus::Matched: return "matched";
    case MatchStatus::Interpolated: return "interpolated";
    case MatchStatus::Unmatched: return "unmatched";
  }
  return "unmatched";
}

/// One raw trace record.
struct TracePoint {
  std::int64_t veh_id = 0;
  std::int64_t trip = 0;
  std::int64_t timestamp_ms = 0;
  GeoPoint raw;
  std::optional<double> speed_kmh;
  std::optional<double> energy;
};

struct MatchedPoint {
  std::size_t source_index = 0;
  GeoPoint snapped;  // raw position when unmatched
  MatchStatus status = MatchStatus::Unmatched;
  std::optional<std::uint32_t> edge_id;
  std::optional<double> offset_m;

  friend bool operator==(const MatchedPoint&, const MatchedPoint&) = default;
};

/// Gaussian log-density of a GPS fix `distance_m` away from the road.
inline double emission_log_prob(double distance_m, double sigma_z) {
  const double z = distance_m / sigma_z;
  return -0.5 * z * z - std::log(sigma_z * std::sqrt(2.0 * kPi));
}

/// Exponential log-density of the route vs. straight-line discrepancy;
/// an absent route is impossible.
inline double transition_log_prob(double great_circle_m, std::optional<double> route_m, double beta) {
  if (!route_m) return kImpossibleLogProb;
  return -std::abs(*route_m - great_circle_m) / beta - std::log(beta);
}

namespace detail {

struct Observation {
  std::size_t first;  // first and last record of a run of identical coordinates
  std::size_t last;
  GeoPoint pos;
  std::vector<EdgeCandidate> candidates;
};

}  // namespace detail

/// Snaps one trip to the network.
///
/// Consecutive records with identical coordinates form one observation: the
/// first record is Matched and the rest Interpolated onto the same point.
/// Observations without candidates are Unmatched. The Viterbi recursion is
/// run separately on every chain between unmatched observations and time
/// gaps longer than `break_gap_s`, and restarts where no candidate is
/// reachable from the previous layer.
inline std::vector<MatchedPoint> viterbi_match(std::span<const TracePoint> trace, const RoadNetwork& net,
                                               const HmmParams& params) {
  if (trace.empty()) throw EmptyTrace();
  params.validate();
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].timestamp_ms < trace[i - 1].timestamp_ms) {
      throw OrderError("trip " + std::to_string(trace[i].veh_id) + "/" + std::to_string(trace[i].trip) +
                       ": timestamp decreases at record " + std::to_string(i));
    }
  }

  std::vector<detail::Observation> obs;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!obs.empty() && trace[i].raw == obs.back().pos) {
      obs.back().last = i;
      continue;
    }
    obs.push_back({i, i, trace[i].raw, net.nearest_edges(trace[i].raw, params.candidate_radius_m)});
  }

  std::vector<MatchedPoint> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) out[i] = MatchedPoint{i, trace[i].raw, MatchStatus::Unmatched, {}, {}};

  Router router(net);
  const auto gap_ms = static_cast<std::int64_t>(std::llround(params.break_gap_s * 1000.0));

  auto solve_chain = [&](std::size_t begin, std::size_t end) {
    std::vector<std::vector<double>> emissions;
    for (std::size_t k = begin; k < end; ++k) {
      std::vector<double> e;
      for (const auto& c : obs[k].candidates) e.push_back(emission_log_prob(c.distance_m, params.sigma_z));
      emissions.push_back(std::move(e));
    }
    std::vector<std::vector<double>> trans;
    auto transitions = [&](std::size_t t) -> const std::vector<std::vector<double>>& {
      const auto& from = obs[begin + t - 1];
      const auto& to = obs[begin + t];
      const double gc = great_circle_m(from.pos, to.pos);
      std::vector<EdgeAnchor> targets;
      for (const auto& c : to.candidates) targets.push_back({c.edge_id, c.offset_m});
      trans.assign(from.candidates.size(), {});
      for (std::size_t i = 0; i < from.candidates.size(); ++i) {
        const auto& c = from.candidates[i];
        auto routes = router.one_to_many({c.edge_id, c.offset_m}, targets, params.route_search_limit_m);
        trans[i].resize(targets.size());
        for (std::size_t j = 0; j < targets.size(); ++j) trans[i][j] = transition_log_prob(gc, routes[j], params.beta);
      }
      return trans;
    };
    const ViterbiResult vr = viterbi(emissions, transitions);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& o = obs[k];
      const EdgeCandidate& c = o.candidates[vr.states[k - begin]];
      for (std::size_t r = o.first; r <= o.last; ++r) {
        out[r] = MatchedPoint{r, c.point, r == o.first ? MatchStatus::Matched : MatchStatus::Interpolated, c.edge_id,
                              c.offset_m};
      }
    }
  };

  std::size_t begin = 0;
  for (std::size_t k = 0; k <= obs.size(); ++k) {
    const bool boundary = k == obs.size() || obs[k].candidates.empty() ||
                          (k > begin && trace[obs[k].first].timestamp_ms - trace[obs[k - 1].last].timestamp_ms > gap_ms);
    if (!boundary) continue;
    if (k > begin) solve_chain(begin, k);
    begin = (k < obs.size() && obs[k].candidates.empty()) ? k + 1 : k;
  }
  return out;
}

/// Fraction of records labeled matched or interpolated.
inline double match_rate(std::span<const MatchedPoint> results) {
  if (results.empty()) throw EmptyTrace("match_rate of an empty result");
  std::size_t ok = 0;
  for (const auto& m : results) ok += m.status != MatchStatus::Unmatched;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_MAP_MATCH_HPP
