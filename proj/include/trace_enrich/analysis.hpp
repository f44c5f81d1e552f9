#ifndef TRACE_ENRICH_ANALYSIS_HPP
#define TRACE_ENRICH_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trace_enrich/errors.hpp"

namespace trace_enrich {

/// One enriched record as consumed by the analyses.
struct AnalysisRecord {
  std::int64_t timestamp_ms = 0;
  double day_num = 0.0;  // fractional day; the fraction is the time of day
  std::optional<double> speed_kmh;
  std::optional<double> energy;  // energy spent over the interval to the next record
  std::optional<double> limit_kmh;
  std::optional<double> gradient;
  bool at_intersection = false;
  bool at_bus_stop = false;
  bool at_focus_point = false;

  bool any_infrastructure() const noexcept { return at_intersection || at_bus_stop || at_focus_point; }
  double time_of_day_h() const noexcept { return (day_num - std::floor(day_num)) * 24.0; }
};

struct AnalysisTrip {
  std::int64_t veh_id = 0;
  std::int64_t trip = 0;
  std::vector<AnalysisRecord> records;
};

/// Speed limits are grouped at 0.01 km/h resolution.
using LimitKey = std::int64_t;
inline LimitKey limit_key(double kmh) { return std::llround(kmh * 100.0); }
inline double limit_of(LimitKey k) { return static_cast<double>(k) / 100.0; }
inline std::string limit_label(LimitKey k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", limit_of(k));
  return buf;
}

namespace detail {

inline std::vector<const AnalysisTrip*> canonical_order(std::span<const AnalysisTrip> trips) {
  std::vector<const AnalysisTrip*> out;
  for (const auto& t : trips) out.push_back(&t);
  std::stable_sort(out.begin(), out.end(), [](const AnalysisTrip* a, const AnalysisTrip* b) {
    return a->veh_id != b->veh_id ? a->veh_id < b->veh_id : a->trip < b->trip;
  });
  return out;
}

// Seconds until the next record, or nullopt for the last record and for
// non-increasing timestamps.
inline std::optional<double> interval_s(const AnalysisTrip& t, std::size_t i) {
  if (i + 1 >= t.records.size()) return std::nullopt;
  const auto dt = t.records[i + 1].timestamp_ms - t.records[i].timestamp_ms;
  if (dt <= 0) return std::nullopt;
  return static_cast<double>(dt) / 1000.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Statistical trip energy estimation

struct EnergyBin {
  double speed_bin_kmh = 0.0;  // lower edge of the bin
  std::size_t count = 0;       // records
  double seconds = 0.0;        // driving time covered by those records
  double mean_energy_per_s = 0.0;
};

struct LimitStats {
  std::vector<EnergyBin> bins;  // ascending by speed
  double weighted_mean_per_s = 0.0;
};

struct SkipReport {
  std::size_t missing_energy = 0;
  std::size_t missing_limit = 0;
  std::size_t missing_speed = 0;
  std::size_t no_interval = 0;

  std::size_t total() const noexcept { return missing_energy + missing_limit + missing_speed + no_interval; }
};

/// Per-speed-limit distribution of driving time over speed bins, with the
/// mean energy rate of each bin.
struct SpeedEnergyStats {
  double bin_width_kmh = 1.0;
  std::map<LimitKey, LimitStats> limits;
  SkipReport skipped;

  std::optional<double> weighted_mean(double limit_kmh) const {
    auto it = limits.find(limit_key(limit_kmh));
    if (it == limits.end()) return std::nullopt;
    return it->second.weighted_mean_per_s;
  }

  /// {"<limit>": [{"bin", "count", "seconds", "mean"}, ...], ...}
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, ls] : limits) {
      auto arr = nlohmann::json::array();
      for (const auto& b : ls.bins)
        arr.push_back({{"bin", b.speed_bin_kmh}, {"count", b.count}, {"seconds", b.seconds}, {"mean", b.mean_energy_per_s}});
      j[limit_label(k)] = std::move(arr);
    }
    return j;
  }

  static SpeedEnergyStats from_json(const nlohmann::json& j) {
    SpeedEnergyStats s;
    if (!j.is_object()) throw ParseError("", 1, "stats document must be a JSON object");
    for (const auto& [label, arr] : j.items()) {
      char* end = nullptr;
      const double limit = std::strtod(label.c_str(), &end);
      if (end == label.c_str() || *end != '\0' || !arr.is_array())
        throw ParseError("", 1, "invalid stats entry '" + label + "'");
      LimitStats ls;
      double energy = 0.0;
      double seconds = 0.0;
      for (const auto& b : arr) {
        EnergyBin bin;
        bin.speed_bin_kmh = b.at("bin").get<double>();
        bin.count = b.at("count").get<std::size_t>();
        bin.mean_energy_per_s = b.at("mean").get<double>();
        bin.seconds = b.contains("seconds") ? b.at("seconds").get<double>() : static_cast<double>(bin.count);
        energy += bin.seconds * bin.mean_energy_per_s;
        seconds += bin.seconds;
        ls.bins.push_back(bin);
      }
      ls.weighted_mean_per_s = seconds > 0.0 ? energy / seconds : 0.0;
      s.limits[limit_key(limit)] = std::move(ls);
    }
    return s;
  }
};

/// Bins every record with speed, energy, limit and a positive interval by
/// speed limit and speed. Bin means and the per-limit mean are weighted by
/// driving time, so with uniform intervals they reduce to record counts.
inline SpeedEnergyStats build_stats(std::span<const AnalysisTrip> trips, double bin_width_kmh = 1.0) {
  if (!(bin_width_kmh > 0.0)) throw InvalidArgument("speed bin width must be > 0");
  struct Acc {
    std::size_t count = 0;
    double seconds = 0.0;
    double energy = 0.0;
  };
  std::map<LimitKey, std::map<std::int64_t, Acc>> acc;
  SpeedEnergyStats stats;
  stats.bin_width_kmh = bin_width_kmh;
  for (const AnalysisTrip* t : detail::canonical_order(trips)) {
    for (std::size_t i = 0; i < t->records.size(); ++i) {
      const auto& r = t->records[i];
      const auto dt = detail::interval_s(*t, i);
      if (!dt) {
        ++stats.skipped.no_interval;
      } else if (!r.limit_kmh) {
        ++stats.skipped.missing_limit;
      } else if (!r.energy) {
        ++stats.skipped.missing_energy;
      } else if (!r.speed_kmh) {
        ++stats.skipped.missing_speed;
      } else {
        auto bin = static_cast<std::int64_t>(std::floor(*r.speed_kmh / bin_width_kmh));
        Acc& a = acc[limit_key(*r.limit_kmh)][bin];
        ++a.count;
        a.seconds += *dt;
        a.energy += *r.energy;
      }
    }
  }
  for (const auto& [k, bins] : acc) {
    LimitStats ls;
    double energy = 0.0;
    double seconds = 0.0;
    for (const auto& [b, a] : bins) {
      const double mean = a.energy / a.seconds;
      ls.bins.push_back({static_cast<double>(b) * bin_width_kmh, a.count, a.seconds, mean});
      energy += a.seconds * mean;
      seconds += a.seconds;
    }
    ls.weighted_mean_per_s = energy / seconds;
    stats.limits[k] = std::move(ls);
  }
  return stats;
}

struct TripEnergyEstimate {
  std::int64_t veh_id = 0;
  std::int64_t trip = 0;
  double estimated = 0.0;
  std::optional<double> actual;              // present when every interval carries energy
  std::map<LimitKey, double> seconds_by_limit;  // limits found in the stats
  double uncovered_s = 0.0;                  // time under no limit or a limit absent from the stats
};

/// Time under each speed limit times that limit's mean energy rate.
/// Throws UncoveredTrip when no driving time maps to a known limit.
inline TripEnergyEstimate estimate_trip_energy(const AnalysisTrip& trip, const SpeedEnergyStats& stats) {
  TripEnergyEstimate est;
  est.veh_id = trip.veh_id;
  est.trip = trip.trip;
  double actual = 0.0;
  bool all_energy = true;
  for (std::size_t i = 0; i < trip.records.size(); ++i) {
    const auto dt = detail::interval_s(trip, i);
    if (!dt) continue;
    const auto& r = trip.records[i];
    if (r.energy) {
      actual += *r.energy;
    } else {
      all_energy = false;
    }
    if (r.limit_kmh && stats.limits.contains(limit_key(*r.limit_kmh))) {
      est.seconds_by_limit[limit_key(*r.limit_kmh)] += *dt;
    } else {
      est.uncovered_s += *dt;
    }
  }
  if (est.seconds_by_limit.empty()) {
    throw UncoveredTrip("trip " + std::to_string(trip.veh_id) + "/" + std::to_string(trip.trip) +
                        " has no driving time under a speed limit present in the stats");
  }
  for (const auto& [k, s] : est.seconds_by_limit) est.estimated += s * stats.limits.at(k).weighted_mean_per_s;
  if (all_energy) est.actual = actual;
  return est;
}

inline double rmse(std::span<const double> actual, std::span<const double> estimated) {
  if (actual.size() != estimated.size()) throw ShapeError("rmse: length mismatch");
  if (actual.empty()) throw ShapeError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - estimated[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

// ---------------------------------------------------------------------------
// Speed distributions

struct SpeedHistogram {
  double limit_kmh = 0.0;
  double bin_width_kmh = 1.0;
  std::vector<std::pair<double, std::size_t>> bins;  // (lower edge, count), contiguous
  std::size_t total = 0;
  std::size_t excluded = 0;  // samples under the limit dropped for infrastructure flags
  double slow_threshold_kmh = 50.0;
  std::size_t below_threshold = 0;

  double fraction_below() const { return total ? static_cast<double>(below_threshold) / static_cast<double>(total) : 0.0; }
};

inline bool same_limit(const std::optional<double>& limit, double limit_kmh) {
  return limit && limit_key(*limit) == limit_key(limit_kmh);
}

/// Free-flow speed histogram under one limit: samples at an intersection,
/// bus stop or focus point are excluded. Throws EmptyHistogram when nothing
/// qualifies.
inline SpeedHistogram free_flow_histogram(std::span<const AnalysisTrip> trips, double limit_kmh, double bin_width_kmh = 1.0,
                                          double slow_threshold_kmh = 50.0) {
  if (!(bin_width_kmh > 0.0)) throw InvalidArgument("histogram bin width must be > 0");
  SpeedHistogram h;
  h.limit_kmh = limit_kmh;
  h.bin_width_kmh = bin_width_kmh;
  h.slow_threshold_kmh = slow_threshold_kmh;
  std::map<std::int64_t, std::size_t> counts;
  for (const auto& t : trips) {
    for (const auto& r : t.records) {
      if (!r.speed_kmh || !same_limit(r.limit_kmh, limit_kmh)) continue;
      if (r.any_infrastructure()) {
        ++h.excluded;
        continue;
      }
      ++counts[static_cast<std::int64_t>(std::floor(*r.speed_kmh / bin_width_kmh))];
      ++h.total;
      if (*r.speed_kmh < slow_threshold_kmh) ++h.below_threshold;
    }
  }
  if (counts.empty()) {
    throw EmptyHistogram("no free-flow samples under limit " + limit_label(limit_key(limit_kmh)) + " km/h");
  }
  for (auto b = counts.begin()->first; b <= counts.rbegin()->first; ++b) {
    auto it = counts.find(b);
    h.bins.emplace_back(static_cast<double>(b) * bin_width_kmh, it == counts.end() ? 0 : it->second);
  }
  return h;
}

/// Counts over (time-of-day bin x speed bin) plus, for each time bin, the
/// speed below which the lowest p% of samples fall (empirical CDF: the
/// smallest sample s with #(speed <= s) >= p% of the column).
struct SpeedHeatmap {
  double limit_kmh = 0.0;
  double time_bin_min = 15.0;
  double speed_bin_kmh = 1.0;
  std::vector<std::vector<std::size_t>> counts;  // [time bin][speed bin]
  std::vector<std::size_t> column_totals;        // per time bin
  std::vector<int> percents;
  std::vector<std::vector<std::optional<double>>> contours;  // [percent][time bin]
};

/// Smallest sample whose cumulative count reaches `percent`% of the sorted
/// sample set.
inline double empirical_quantile(std::span<const double> sorted, int percent) {
  const std::size_t n = sorted.size();
  std::size_t need = (static_cast<std::size_t>(percent) * n + 99) / 100;
  if (need == 0) need = 1;
  return sorted[std::min(need, n) - 1];
}

inline SpeedHeatmap speed_time_heatmap(std::span<const AnalysisTrip> trips, double limit_kmh, double time_bin_min = 15.0,
                                       double speed_bin_kmh = 1.0, std::vector<int> percents = {10, 20, 30}) {
  if (!(time_bin_min > 0.0) || !(speed_bin_kmh > 0.0)) throw InvalidArgument("heatmap bin widths must be > 0");
  SpeedHeatmap hm;
  hm.limit_kmh = limit_kmh;
  hm.time_bin_min = time_bin_min;
  hm.speed_bin_kmh = speed_bin_kmh;
  std::sort(percents.begin(), percents.end());
  hm.percents = percents;
  const auto time_bins = static_cast<std::size_t>(std::ceil(1440.0 / time_bin_min));
  std::vector<std::vector<double>> samples(time_bins);
  double max_speed = 0.0;
  for (const auto& t : trips) {
    for (const auto& r : t.records) {
      if (!r.speed_kmh || !same_limit(r.limit_kmh, limit_kmh)) continue;
      auto tb = static_cast<std::size_t>(std::floor(r.time_of_day_h() * 60.0 / time_bin_min));
      samples[std::min(tb, time_bins - 1)].push_back(std::max(0.0, *r.speed_kmh));
      max_speed = std::max(max_speed, *r.speed_kmh);
    }
  }
  const auto speed_bins = static_cast<std::size_t>(std::floor(max_speed / speed_bin_kmh)) + 1;
  hm.counts.assign(time_bins, std::vector<std::size_t>(speed_bins, 0));
  hm.column_totals.assign(time_bins, 0);
  hm.contours.assign(percents.size(), std::vector<std::optional<double>>(time_bins));
  for (std::size_t tb = 0; tb < time_bins; ++tb) {
    auto& col = samples[tb];
    for (double s : col) ++hm.counts[tb][std::min(static_cast<std::size_t>(s / speed_bin_kmh), speed_bins - 1)];
    hm.column_totals[tb] = col.size();
    if (col.empty()) continue;
    std::sort(col.begin(), col.end());
    for (std::size_t p = 0; p < percents.size(); ++p) hm.contours[p][tb] = empirical_quantile(col, percents[p]);
  }
  return hm;
}

// ---------------------------------------------------------------------------
// Learning segments

struct FeatureRow {
  std::int64_t timestamp_ms = 0;
  double time_of_day_h = 0.0;
  double speed_limit_kmh = 0.0;  // 0 when unresolved
  double gradient = 0.0;         // 0 when unresolved
  int at_intersection = 0;
  int at_bus_stop = 0;
  int at_focus_point = 0;
  int approaching_within = 0;
  int departing_within = 0;
};

struct LearningSegment {
  std::int64_t veh_id = 0;
  std::int64_t trip = 0;
  std::size_t index = 0;  // position of the window within its trip
  std::vector<FeatureRow> rows;
  double target_median_speed_kmh = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ShapeError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Cuts every trip into non-overlapping windows of `segment_len` records
/// (the remainder is dropped). Approaching/departing flags look for a
/// flagged record strictly after/before within `horizon_s` anywhere in the
/// same trip. The target is the median speed of the window; windows
/// without any speed sample are skipped.
inline std::vector<LearningSegment> extract_learning_segments(std::span<const AnalysisTrip> trips,
                                                              std::size_t segment_len = 240, double horizon_s = 30.0) {
  if (segment_len == 0) throw InvalidArgument("segment length must be > 0");
  const auto horizon_ms = static_cast<std::int64_t>(std::llround(horizon_s * 1000.0));
  std::vector<LearningSegment> out;
  for (const AnalysisTrip* t : detail::canonical_order(trips)) {
    const auto& recs = t->records;
    const std::size_t n = recs.size();
    std::vector<int> approaching(n, 0);
    std::vector<int> departing(n, 0);
    std::optional<std::int64_t> next_flag;
    for (std::size_t i = n; i-- > 0;) {
      if (next_flag && *next_flag - recs[i].timestamp_ms <= horizon_ms) approaching[i] = 1;
      if (recs[i].any_infrastructure()) next_flag = recs[i].timestamp_ms;
    }
    std::optional<std::int64_t> prev_flag;
    for (std::size_t i = 0; i < n; ++i) {
      if (prev_flag && recs[i].timestamp_ms - *prev_flag <= horizon_ms) departing[i] = 1;
      if (recs[i].any_infrastructure()) prev_flag = recs[i].timestamp_ms;
    }
    for (std::size_t start = 0, seg = 0; start + segment_len <= n; start += segment_len, ++seg) {
      LearningSegment s;
      s.veh_id = t->veh_id;
      s.trip = t->trip;
      s.index = seg;
      std::vector<double> speeds;
      for (std::size_t i = start; i < start + segment_len; ++i) {
        const auto& r = recs[i];
        s.rows.push_back(FeatureRow{r.timestamp_ms, r.time_of_day_h(), r.limit_kmh.value_or(0.0), r.gradient.value_or(0.0),
                                    r.at_intersection ? 1 : 0, r.at_bus_stop ? 1 : 0, r.at_focus_point ? 1 : 0,
                                    approaching[i], departing[i]});
        if (r.speed_kmh) speeds.push_back(*r.speed_kmh);
      }
      if (speeds.empty()) continue;
      s.target_median_speed_kmh = median(std::move(speeds));
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ANALYSIS_HPP
