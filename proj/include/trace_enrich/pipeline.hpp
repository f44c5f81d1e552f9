#ifndef TRACE_ENRICH_PIPELINE_HPP
#define TRACE_ENRICH_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "trace_enrich/analysis.hpp"
#include "trace_enrich/csv.hpp"
#include "trace_enrich/enrich.hpp"
#include "trace_enrich/map_match.hpp"
#include "trace_enrich/osm_xml.hpp"

namespace trace_enrich {

/// Everything a batch run needs. Paths are validated before any work.
struct PipelineConfig {
  struct Paths {
    std::string network;
    std::vector<std::string> trips;
    std::string output_dir = ".";
    std::optional<std::string> elevation_cache;
    std::optional<std::string> bus_stops;
    std::vector<std::string> enriched;  // analysis inputs; defaults to the enrich outputs
    std::optional<std::string> stats;   // defaults to <output_dir>/stats.json
  } paths;

  struct Input {
    std::string energy_column = "Energy";
    std::string speed_column = "Vehicle Speed[km/h]";
  } input;

  struct Analysis {
    double speed_bin_kmh = 1.0;
    double hist_bin_kmh = 1.0;
    double time_bin_min = 15.0;
    double slow_threshold_kmh = 50.0;
    std::optional<double> limit_kmh;
    std::size_t segment_len = 240;
    double horizon_s = 30.0;
    bool skip_uncovered = false;
  } analysis;

  HmmParams hmm;
  InfrastructureRadii radii;
  PerpendicularRule perpendicular = PerpendicularRule::Forward;
  double max_unresolved_elevation = 0.05;
  unsigned workers = 1;

  std::string stats_path() const {
    return paths.stats ? *paths.stats : (std::filesystem::path(paths.output_dir) / "stats.json").string();
  }

  void validate() const {
    hmm.validate();
    radii.validate();
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
    };
    positive(analysis.speed_bin_kmh, "analysis.speed_bin_kmh");
    positive(analysis.hist_bin_kmh, "analysis.hist_bin_kmh");
    positive(analysis.time_bin_min, "analysis.time_bin_min");
    positive(analysis.horizon_s, "analysis.horizon_s");
    if (analysis.segment_len == 0) throw ConfigError("analysis.segment_len must be > 0");
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (max_unresolved_elevation < 0.0 || max_unresolved_elevation > 1.0)
      throw ConfigError("elevation.max_unresolved_fraction must be within [0, 1]");
  }
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  for (unsigned w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline std::size_t column_any(const csv::Table& t, std::initializer_list<std::string_view> names) {
  for (auto n : names)
    if (auto c = t.column(n)) return *c;
  throw ParseError(t.file, 1, "missing column '" + std::string(*names.begin()) + "'");
}

inline std::optional<std::size_t> optional_column(const csv::Table& t, std::initializer_list<std::string_view> names) {
  for (auto n : names)
    if (auto c = t.column(n)) return c;
  return std::nullopt;
}

inline std::string fixed(double v, int decimals) { return fmt::format("{:.{}f}", v, decimals); }

inline std::string output_stem(const std::string& path) {
  std::string stem = std::filesystem::path(path).stem().string();
  for (std::string_view suffix : {".matched", ".enriched"})
    if (stem.ends_with(suffix)) stem.resize(stem.size() - suffix.size());
  return stem;
}

}  // namespace detail

/// Rows of one trip inside a loaded CSV, in file order.
struct TripRows {
  std::int64_t veh_id = 0;
  std::int64_t trip = 0;
  std::vector<std::size_t> rows;
};

/// A trip CSV with its records grouped by (VehId, Trip), trips sorted by key.
struct TripFile {
  csv::Table table;
  std::vector<TripRows> trips;
  std::size_t day_col = 0, veh_col = 0, trip_col = 0, ts_col = 0, lat_col = 0, lon_col = 0;
  std::optional<std::size_t> speed_col, energy_col;

  std::optional<double> number(std::size_t row, std::size_t col) const { return csv::parse_double(table.rows[row][col]); }
};

/// Loads and validates a VED-style trip file: required numeric columns,
/// unique (VehId, Trip, Timestamp) and non-decreasing time within a trip.
inline TripFile read_trip_file(const std::string& path, const PipelineConfig::Input& input) {
  TripFile f;
  f.table = csv::read_table_file(path);
  const auto& t = f.table;
  f.day_col = detail::column_any(t, {"DayNum"});
  f.veh_col = detail::column_any(t, {"VehId"});
  f.trip_col = detail::column_any(t, {"Trip"});
  f.ts_col = detail::column_any(t, {"Timestamp(ms)", "Timestamp_ms"});
  f.lat_col = detail::column_any(t, {"Latitude[deg]", "Latitude"});
  f.lon_col = detail::column_any(t, {"Longitude[deg]", "Longitude"});
  f.speed_col = detail::optional_column(t, {input.speed_column, "VehicleSpeed_kmh"});
  f.energy_col = detail::optional_column(t, {input.energy_column});

  std::map<std::pair<std::int64_t, std::int64_t>, TripRows> grouped;
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> last_ts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto veh = csv::parse_int(row[f.veh_col]);
    auto trip = csv::parse_int(row[f.trip_col]);
    auto ts = csv::parse_int(row[f.ts_col]);
    auto lat = csv::parse_double(row[f.lat_col]);
    auto lon = csv::parse_double(row[f.lon_col]);
    if (!csv::parse_double(row[f.day_col])) throw ParseError(path, t.lines[r], "invalid DayNum");
    if (!veh || !trip || !ts) throw ParseError(path, t.lines[r], "invalid VehId, Trip or Timestamp");
    if (!lat || !lon || *lat < -90.0 || *lat > 90.0 || !std::isfinite(*lon))
      throw ParseError(path, t.lines[r], "invalid coordinate");
    const auto key = std::make_pair(*veh, *trip);
    auto [it, fresh] = last_ts.try_emplace(key, *ts);
    if (!fresh) {
      if (*ts == it->second) {
        throw ParseError(path, t.lines[r], fmt::format("duplicate timestamp {} in trip {}/{}", *ts, *veh, *trip));
      }
      if (*ts < it->second) {
        throw OrderError(fmt::format("{}:{}: trip {}/{}: timestamps out of order", path, t.lines[r], *veh, *trip));
      }
      it->second = *ts;
    }
    auto& g = grouped[key];
    g.veh_id = *veh;
    g.trip = *trip;
    g.rows.push_back(r);
  }
  for (auto& [k, g] : grouped) f.trips.push_back(std::move(g));
  return f;
}

inline std::vector<TracePoint> trace_points(const TripFile& f, const TripRows& trip) {
  std::vector<TracePoint> pts;
  pts.reserve(trip.rows.size());
  for (std::size_t r : trip.rows) {
    TracePoint p;
    p.veh_id = trip.veh_id;
    p.trip = trip.trip;
    p.timestamp_ms = *csv::parse_int(f.table.rows[r][f.ts_col]);
    p.raw = GeoPoint(*f.number(r, f.lat_col), *f.number(r, f.lon_col));
    if (f.speed_col) p.speed_kmh = f.number(r, *f.speed_col);
    if (f.energy_col) p.energy = f.number(r, *f.energy_col);
    pts.push_back(p);
  }
  return pts;
}

inline RoadNetwork load_network(const PipelineConfig& cfg) {
  OsmLoadOptions opts;
  opts.bus_stop_csv = cfg.paths.bus_stops;
  return load_osm(cfg.paths.network, opts);
}

inline std::vector<std::string> matched_paths(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& p : cfg.paths.trips)
    out.push_back((std::filesystem::path(cfg.paths.output_dir) / (detail::output_stem(p) + ".matched.csv")).string());
  return out;
}

inline std::vector<std::string> enriched_paths(const PipelineConfig& cfg) {
  if (!cfg.paths.enriched.empty()) return cfg.paths.enriched;
  std::vector<std::string> out;
  for (const auto& p : cfg.paths.trips)
    out.push_back((std::filesystem::path(cfg.paths.output_dir) / (detail::output_stem(p) + ".enriched.csv")).string());
  return out;
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty() || !std::filesystem::is_regular_file(path))
    throw ConfigError(std::string(what) + " not found: '" + path + "'");
}

inline void write_table(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : std::filesystem::path(path).parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  csv::write_record(os, header);
  for (const auto& r : rows) csv::write_record(os, r);
}

// ---------------------------------------------------------------------------
// match

struct MatchSummary {
  std::size_t files = 0;
  std::size_t trips = 0;
  std::size_t records = 0;
  std::size_t matched_or_interpolated = 0;
  std::vector<std::string> outputs;

  double match_rate() const {
    return records ? static_cast<double>(matched_or_interpolated) / static_cast<double>(records) : 0.0;
  }
};

inline const std::vector<std::string> kMatchColumns = {"MatchedLatitude", "MatchedLongitude", "MatchType", "EdgeId",
                                                       "OffsetM"};

inline MatchSummary cmd_match(const PipelineConfig& cfg) {
  cfg.validate();
  require_file(cfg.paths.network, "map extract");
  if (cfg.paths.trips.empty()) throw ConfigError("paths.trips is empty");
  for (const auto& p : cfg.paths.trips) require_file(p, "trip file");
  if (cfg.paths.bus_stops) require_file(*cfg.paths.bus_stops, "bus stop catalog");

  const RoadNetwork net = load_network(cfg);
  MatchSummary summary;
  const auto outputs = matched_paths(cfg);
  for (std::size_t fi = 0; fi < cfg.paths.trips.size(); ++fi) {
    const TripFile f = read_trip_file(cfg.paths.trips[fi], cfg.input);
    std::vector<std::vector<MatchedPoint>> results(f.trips.size());
    parallel_for(f.trips.size(), cfg.workers, [&](std::size_t i) {
      const auto pts = trace_points(f, f.trips[i]);
      results[i] = viterbi_match(pts, net, cfg.hmm);
    });

    auto header = f.table.header;
    header.insert(header.end(), kMatchColumns.begin(), kMatchColumns.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < f.trips.size(); ++i) {
      ++summary.trips;
      for (std::size_t k = 0; k < f.trips[i].rows.size(); ++k) {
        const MatchedPoint& m = results[i][k];
        auto row = f.table.rows[f.trips[i].rows[k]];
        ++summary.records;
        if (m.status == MatchStatus::Unmatched) {
          row.insert(row.end(), {"", "", "unmatched", "", ""});
        } else {
          ++summary.matched_or_interpolated;
          row.insert(row.end(), {detail::fixed(m.snapped.lat(), 8), detail::fixed(m.snapped.lon(), 8),
                                 std::string(to_string(m.status)), std::to_string(*m.edge_id),
                                 detail::fixed(*m.offset_m, 3)});
        }
        rows.push_back(std::move(row));
      }
    }
    write_table(outputs[fi], header, rows);
    summary.outputs.push_back(outputs[fi]);
    ++summary.files;
  }
  return summary;
}

// ---------------------------------------------------------------------------
// enrich

struct EnrichSummary {
  std::size_t files = 0;
  std::size_t trips = 0;
  std::size_t records = 0;
  EnrichStats stats;
  std::vector<std::string> outputs;
};

inline const std::vector<std::string> kEnrichColumns = {
    "SpeedLimit_kmh", "SpeedLimitDirectional_kmh", "SpeedLimitClass", "ElevationRaw_m", "ElevationSmoothed_m",
    "Gradient",       "Intersection",              "BusStop",         "FocusPoints"};

/// Rebuilds matched points from a file written by cmd_match.
inline std::vector<MatchedPoint> matched_points(const TripFile& f, const TripRows& trip, const RoadNetwork& net) {
  const auto& t = f.table;
  const auto lat_c = t.require_column("MatchedLatitude");
  const auto lon_c = t.require_column("MatchedLongitude");
  const auto type_c = t.require_column("MatchType");
  const auto edge_c = t.require_column("EdgeId");
  const auto off_c = t.require_column("OffsetM");
  std::vector<MatchedPoint> out;
  for (std::size_t k = 0; k < trip.rows.size(); ++k) {
    const std::size_t r = trip.rows[k];
    const auto& row = t.rows[r];
    MatchedPoint m;
    m.source_index = k;
    m.snapped = GeoPoint(*f.number(r, f.lat_col), *f.number(r, f.lon_col));
    const std::string& type = row[type_c];
    if (type == "unmatched") {
      out.push_back(m);
      continue;
    }
    if (type == "matched") {
      m.status = MatchStatus::Matched;
    } else if (type == "interpolated") {
      m.status = MatchStatus::Interpolated;
    } else {
      throw ParseError(t.file, t.lines[r], "unknown MatchType '" + type + "'");
    }
    auto lat = csv::parse_double(row[lat_c]);
    auto lon = csv::parse_double(row[lon_c]);
    auto edge = csv::parse_int(row[edge_c]);
    auto off = csv::parse_double(row[off_c]);
    if (!lat || !lon || !edge || !off || *edge < 0 || static_cast<std::size_t>(*edge) >= net.edges().size())
      throw ParseError(t.file, t.lines[r], "invalid matched columns");
    m.snapped = GeoPoint(*lat, *lon);
    m.edge_id = static_cast<std::uint32_t>(*edge);
    m.offset_m = *off;
    out.push_back(m);
  }
  return out;
}

inline std::vector<std::string> enrich_fields(const AnnotatedRecord& r) {
  if (r.matched.status == MatchStatus::Unmatched) return std::vector<std::string>(kEnrichColumns.size());
  std::vector<std::string> f;
  if (r.speed_limit) {
    f.push_back(detail::fixed(r.speed_limit->value_kmh, 2));
    f.push_back(r.speed_limit->directional_value_kmh ? detail::fixed(*r.speed_limit->directional_value_kmh, 2) : "");
    f.push_back(std::to_string(static_cast<int>(r.speed_limit->cls)));
  } else {
    f.insert(f.end(), {"", "", ""});
  }
  if (r.elevation) {
    f.push_back(detail::fixed(r.elevation->raw_m, 3));
    f.push_back(detail::fixed(r.elevation->smoothed_m, 3));
    f.push_back(detail::fixed(r.elevation->gradient, 6));
  } else {
    f.insert(f.end(), {"", "", ""});
  }
  f.push_back(r.at_intersection ? "1" : "0");
  f.push_back(r.at_bus_stop ? "1" : "0");
  f.push_back(r.focus.join());
  return f;
}

inline EnrichSummary cmd_enrich(const PipelineConfig& cfg) {
  cfg.validate();
  require_file(cfg.paths.network, "map extract");
  if (cfg.paths.trips.empty()) throw ConfigError("paths.trips is empty");
  const auto inputs = matched_paths(cfg);
  for (const auto& p : inputs) require_file(p, "matched file (run match first)");
  if (cfg.paths.elevation_cache) require_file(*cfg.paths.elevation_cache, "elevation cache");
  if (cfg.paths.bus_stops) require_file(*cfg.paths.bus_stops, "bus stop catalog");

  const RoadNetwork net = load_network(cfg);
  std::optional<FileElevationCache> cache;
  if (cfg.paths.elevation_cache) cache = FileElevationCache::load(*cfg.paths.elevation_cache);
  EnrichOptions opts{cfg.radii, cfg.perpendicular};

  EnrichSummary summary;
  for (const auto& in : inputs) {
    const TripFile f = read_trip_file(in, cfg.input);
    std::vector<EnrichedTrip> results(f.trips.size());
    parallel_for(f.trips.size(), cfg.workers, [&](std::size_t i) {
      const auto pts = matched_points(f, f.trips[i], net);
      results[i] = enrich_trip(pts, net, cache ? &*cache : nullptr, opts);
    });
    auto header = f.table.header;
    header.insert(header.end(), kEnrichColumns.begin(), kEnrichColumns.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < f.trips.size(); ++i) {
      ++summary.trips;
      summary.stats += results[i].stats;
      for (std::size_t k = 0; k < f.trips[i].rows.size(); ++k) {
        auto row = f.table.rows[f.trips[i].rows[k]];
        auto extra = enrich_fields(results[i].records[k]);
        row.insert(row.end(), extra.begin(), extra.end());
        rows.push_back(std::move(row));
        ++summary.records;
      }
    }
    const auto out =
        (std::filesystem::path(cfg.paths.output_dir) / (detail::output_stem(in) + ".enriched.csv")).string();
    write_table(out, header, rows);
    summary.outputs.push_back(out);
    ++summary.files;
  }
  const auto& s = summary.stats;
  if (cache && s.elevation_requested > 0 &&
      static_cast<double>(s.elevation_unresolved) > cfg.max_unresolved_elevation * static_cast<double>(s.elevation_requested)) {
    throw ElevationError(fmt::format("elevation unresolved for {} of {} points (limit {:.1f}%)", s.elevation_unresolved,
                                     s.elevation_requested, cfg.max_unresolved_elevation * 100.0));
  }
  return summary;
}

// ---------------------------------------------------------------------------
// analyses

/// Loads enriched files into analysis trips. The travelled direction's limit
/// is preferred over the plain value.
inline std::vector<AnalysisTrip> load_analysis_trips(const PipelineConfig& cfg) {
  std::vector<AnalysisTrip> trips;
  for (const auto& path : enriched_paths(cfg)) {
    require_file(path, "enriched file (run enrich first)");
    const TripFile f = read_trip_file(path, cfg.input);
    const auto& t = f.table;
    const auto limit_c = t.require_column("SpeedLimit_kmh");
    const auto dir_c = t.require_column("SpeedLimitDirectional_kmh");
    const auto grad_c = t.require_column("Gradient");
    const auto inter_c = t.require_column("Intersection");
    const auto bus_c = t.require_column("BusStop");
    const auto focus_c = t.require_column("FocusPoints");
    for (const auto& tr : f.trips) {
      AnalysisTrip at{tr.veh_id, tr.trip, {}};
      for (std::size_t r : tr.rows) {
        const auto& row = t.rows[r];
        AnalysisRecord rec;
        rec.timestamp_ms = *csv::parse_int(row[f.ts_col]);
        rec.day_num = *f.number(r, f.day_col);
        if (f.speed_col) rec.speed_kmh = f.number(r, *f.speed_col);
        if (f.energy_col) rec.energy = f.number(r, *f.energy_col);
        rec.limit_kmh = csv::parse_double(row[dir_c]);
        if (!rec.limit_kmh) rec.limit_kmh = csv::parse_double(row[limit_c]);
        rec.gradient = csv::parse_double(row[grad_c]);
        rec.at_intersection = row[inter_c] == "1";
        rec.at_bus_stop = row[bus_c] == "1";
        rec.at_focus_point = !row[focus_c].empty();
        at.records.push_back(rec);
      }
      trips.push_back(std::move(at));
    }
  }
  std::stable_sort(trips.begin(), trips.end(), [](const AnalysisTrip& a, const AnalysisTrip& b) {
    return a.veh_id != b.veh_id ? a.veh_id < b.veh_id : a.trip < b.trip;
  });
  return trips;
}

struct StatsSummary {
  std::string output;
  SpeedEnergyStats stats;
};

inline StatsSummary cmd_stats(const PipelineConfig& cfg) {
  cfg.validate();
  const auto trips = load_analysis_trips(cfg);
  StatsSummary s;
  s.stats = build_stats(trips, cfg.analysis.speed_bin_kmh);
  s.output = cfg.stats_path();
  std::filesystem::create_directories(std::filesystem::path(s.output).parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : std::filesystem::path(s.output).parent_path());
  std::ofstream os(s.output, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + s.output);
  os << s.stats.to_json().dump(2) << '\n';
  return s;
}

struct EstimateSummary {
  std::string output;
  std::vector<TripEnergyEstimate> estimates;
  std::vector<std::pair<std::int64_t, std::int64_t>> uncovered;  // skipped trips
  std::optional<double> rmse;
  double total_estimated = 0.0;
  std::optional<double> total_actual;
};

inline EstimateSummary cmd_estimate(const PipelineConfig& cfg) {
  cfg.validate();
  const std::string stats_file = cfg.stats_path();
  require_file(stats_file, "stats file (run stats first)");
  SpeedEnergyStats stats;
  {
    std::ifstream in(stats_file);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(stats_file, 0, e.what());
    }
    stats = SpeedEnergyStats::from_json(j);
  }
  const auto trips = load_analysis_trips(cfg);
  EstimateSummary s;
  std::vector<double> actual;
  std::vector<double> estimated;
  bool all_actual = true;
  double total_actual = 0.0;
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : trips) {
    TripEnergyEstimate e;
    try {
      e = estimate_trip_energy(t, stats);
    } catch (const UncoveredTrip&) {
      if (!cfg.analysis.skip_uncovered) throw;
      s.uncovered.emplace_back(t.veh_id, t.trip);
      continue;
    }
    double covered = 0.0;
    for (const auto& [k, sec] : e.seconds_by_limit) covered += sec;
    rows.push_back({std::to_string(e.veh_id), std::to_string(e.trip), detail::fixed(e.estimated, 6),
                    e.actual ? detail::fixed(*e.actual, 6) : "", detail::fixed(covered, 3),
                    detail::fixed(e.uncovered_s, 3)});
    s.total_estimated += e.estimated;
    if (e.actual) {
      actual.push_back(*e.actual);
      estimated.push_back(e.estimated);
      total_actual += *e.actual;
    } else {
      all_actual = false;
    }
    s.estimates.push_back(std::move(e));
  }
  if (s.estimates.empty()) throw UncoveredTrip("no trip could be estimated");
  if (!actual.empty()) s.rmse = rmse(actual, estimated);
  if (all_actual) s.total_actual = total_actual;
  s.output = (std::filesystem::path(cfg.paths.output_dir) / "estimate.csv").string();
  write_table(s.output, {"VehId", "Trip", "Estimated", "Actual", "CoveredSeconds", "UncoveredSeconds"}, rows);
  return s;
}

inline double require_limit(const PipelineConfig& cfg) {
  if (!cfg.analysis.limit_kmh) throw ConfigError("analysis.limit_kmh is required");
  return *cfg.analysis.limit_kmh;
}

struct HistogramSummary {
  std::string output;
  SpeedHistogram histogram;
};

inline HistogramSummary cmd_histogram(const PipelineConfig& cfg) {
  cfg.validate();
  const double limit = require_limit(cfg);
  const auto trips = load_analysis_trips(cfg);
  HistogramSummary s;
  s.histogram = free_flow_histogram(trips, limit, cfg.analysis.hist_bin_kmh, cfg.analysis.slow_threshold_kmh);
  std::vector<std::vector<std::string>> rows;
  for (const auto& [b, c] : s.histogram.bins) rows.push_back({detail::fixed(b, 2), std::to_string(c)});
  s.output = (std::filesystem::path(cfg.paths.output_dir) / "histogram.csv").string();
  write_table(s.output, {"speed_bin_kmh", "count"}, rows);
  return s;
}

struct HeatmapSummary {
  std::string heatmap_output;
  std::string contour_output;
  SpeedHeatmap heatmap;
};

inline HeatmapSummary cmd_heatmap(const PipelineConfig& cfg) {
  cfg.validate();
  const double limit = require_limit(cfg);
  const auto trips = load_analysis_trips(cfg);
  HeatmapSummary s;
  s.heatmap = speed_time_heatmap(trips, limit, cfg.analysis.time_bin_min, cfg.analysis.speed_bin_kmh);
  const auto& hm = s.heatmap;
  std::size_t total = 0;
  for (auto c : hm.column_totals) total += c;
  if (total == 0) throw EmptyHistogram("no samples under limit " + limit_label(limit_key(limit)) + " km/h");
  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<std::string>> contours;
  for (std::size_t tb = 0; tb < hm.counts.size(); ++tb) {
    const std::string hour = detail::fixed(static_cast<double>(tb) * hm.time_bin_min / 60.0, 4);
    for (std::size_t sb = 0; sb < hm.counts[tb].size(); ++sb)
      cells.push_back({hour, detail::fixed(static_cast<double>(sb) * hm.speed_bin_kmh, 2), std::to_string(hm.counts[tb][sb])});
    std::vector<std::string> row{hour, std::to_string(hm.column_totals[tb])};
    for (const auto& c : hm.contours) row.push_back(c[tb] ? detail::fixed(*c[tb], 2) : "");
    contours.push_back(std::move(row));
  }
  const auto dir = std::filesystem::path(cfg.paths.output_dir);
  s.heatmap_output = (dir / "heatmap.csv").string();
  s.contour_output = (dir / "contours.csv").string();
  write_table(s.heatmap_output, {"time_of_day_h", "speed_bin_kmh", "count"}, cells);
  std::vector<std::string> header{"time_of_day_h", "samples"};
  for (int p : hm.percents) header.push_back("lowest_" + std::to_string(p) + "pct_kmh");
  write_table(s.contour_output, header, contours);
  return s;
}

struct SegmentsSummary {
  std::string rows_output;
  std::string targets_output;
  std::size_t segments = 0;
};

inline SegmentsSummary cmd_segments(const PipelineConfig& cfg) {
  cfg.validate();
  const auto trips = load_analysis_trips(cfg);
  const auto segs = extract_learning_segments(trips, cfg.analysis.segment_len, cfg.analysis.horizon_s);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> targets;
  for (std::size_t id = 0; id < segs.size(); ++id) {
    const auto& s = segs[id];
    for (const auto& r : s.rows) {
      rows.push_back({std::to_string(id), std::to_string(s.veh_id), std::to_string(s.trip), std::to_string(r.timestamp_ms),
                      detail::fixed(r.time_of_day_h, 6), detail::fixed(r.speed_limit_kmh, 2), detail::fixed(r.gradient, 6),
                      std::to_string(r.at_intersection), std::to_string(r.at_bus_stop), std::to_string(r.at_focus_point),
                      std::to_string(r.approaching_within), std::to_string(r.departing_within)});
    }
    targets.push_back({std::to_string(id), std::to_string(s.veh_id), std::to_string(s.trip), std::to_string(s.index),
                       detail::fixed(s.target_median_speed_kmh, 3)});
  }
  SegmentsSummary sum;
  sum.segments = segs.size();
  const auto dir = std::filesystem::path(cfg.paths.output_dir);
  sum.rows_output = (dir / "segments.csv").string();
  sum.targets_output = (dir / "segment_targets.csv").string();
  write_table(sum.rows_output,
              {"segment_id", "VehId", "Trip", "Timestamp_ms", "time_of_day_h", "speed_limit_kmh", "gradient",
               "at_intersection", "at_bus_stop", "at_focus_point", "approaching", "departing"},
              rows);
  write_table(sum.targets_output, {"segment_id", "VehId", "Trip", "segment_index", "median_speed_kmh"}, targets);
  return sum;
}

/// Process exit code for a failure: 2 input parse, 3 network, 4 enrichment,
/// 5 analysis.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Parse:
    case ErrorKind::Order:
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::EmptyTrace:
      return 2;
    case ErrorKind::EmptyNetwork:
      return 3;
    case ErrorKind::Elevation:
    case ErrorKind::TagParse:
    case ErrorKind::DegenerateSegment:
    case ErrorKind::NoDefault:
      return 4;
    case ErrorKind::EmptyHistogram:
    case ErrorKind::UncoveredTrip:
    case ErrorKind::Shape:
      return 5;
  }
  return 1;
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_PIPELINE_HPP
