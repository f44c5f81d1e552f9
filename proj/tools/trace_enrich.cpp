// trace-enrich: batch map matching, enrichment and analysis of vehicle trips.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "trace_enrich/pipeline.hpp"

namespace {

using namespace trace_enrich;

void init_logging() {
  auto logger = spdlog::stderr_color_mt("trace-enrich");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("TRACE_ENRICH_LOG")) {
    const std::string level = env;
    if (level == "error" || level == "warn" || level == "info" || level == "debug") {
      spdlog::set_level(spdlog::level::from_str(level));
    } else {
      spdlog::warn("ignoring TRACE_ENRICH_LOG={} (expected error, warn, info or debug)", level);
    }
  }
}

void print_enrich(const EnrichSummary& s) {
  for (const auto& o : s.outputs) spdlog::info("wrote {}", o);
  const auto& st = s.stats;
  if (st.tag_parse_errors) spdlog::warn("{} records had an unparsable speed tag", st.tag_parse_errors);
  if (st.gradient_warnings) spdlog::warn("{} coincident points with distinct elevations", st.gradient_warnings);
  fmt::print("enrich: {} files, {} trips, {} records, missing_limit={}, elevation_unresolved={}/{}\n", s.files, s.trips,
             s.records, st.missing_limits, st.elevation_unresolved, st.elevation_requested);
}

int run(const std::string& command, const PipelineConfig& cfg) {
  spdlog::debug("command {} with {} worker(s)", command, cfg.workers);
  if (command == "match") {
    const auto s = cmd_match(cfg);
    for (const auto& o : s.outputs) spdlog::info("wrote {}", o);
    fmt::print("match: {} files, {} trips, {} records, match_rate={:.4f}\n", s.files, s.trips, s.records,
               s.match_rate());
  } else if (command == "enrich") {
    print_enrich(cmd_enrich(cfg));
  } else if (command == "stats") {
    const auto s = cmd_stats(cfg);
    const auto& k = s.stats.skipped;
    spdlog::info("wrote {}", s.output);
    fmt::print("stats: {} speed limits, skipped missing_energy={} missing_limit={} missing_speed={} no_interval={}\n",
               s.stats.limits.size(), k.missing_energy, k.missing_limit, k.missing_speed, k.no_interval);
  } else if (command == "estimate") {
    const auto s = cmd_estimate(cfg);
    for (const auto& [veh, trip] : s.uncovered) spdlog::warn("trip {}/{} skipped: no covered driving time", veh, trip);
    spdlog::info("wrote {}", s.output);
    fmt::print("estimate: {} trips, total_estimated={:.6f}", s.estimates.size(), s.total_estimated);
    if (s.total_actual) fmt::print(", total_actual={:.6f}", *s.total_actual);
    if (s.rmse) fmt::print(", rmse={:.6f}", *s.rmse);
    fmt::print("\n");
  } else if (command == "histogram") {
    const auto s = cmd_histogram(cfg);
    const auto& h = s.histogram;
    spdlog::info("wrote {}", s.output);
    fmt::print("histogram: limit={:.2f} km/h, samples={}, excluded={}, below_{:.0f}_kmh={:.4f}\n", h.limit_kmh, h.total,
               h.excluded, h.slow_threshold_kmh,
               static_cast<double>(h.below_threshold) / static_cast<double>(h.total));
  } else if (command == "heatmap") {
    const auto s = cmd_heatmap(cfg);
    spdlog::info("wrote {} and {}", s.heatmap_output, s.contour_output);
    std::size_t total = 0;
    for (auto c : s.heatmap.column_totals) total += c;
    fmt::print("heatmap: limit={:.2f} km/h, samples={}\n", s.heatmap.limit_kmh, total);
  } else if (command == "segments") {
    const auto s = cmd_segments(cfg);
    spdlog::info("wrote {} and {}", s.rows_output, s.targets_output);
    fmt::print("segments: {}\n", s.segments);
  }
  return 0;
}

std::string filter_of(const std::string& command, const PipelineConfig& cfg) {
  if ((command == "histogram" || command == "heatmap") && cfg.analysis.limit_kmh)
    return fmt::format(" (filter: analysis.limit_kmh={})", *cfg.analysis.limit_kmh);
  if (command == "estimate") return fmt::format(" (stats: {})", cfg.stats_path());
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Map-match, enrich and analyse vehicle trip records", "trace-enrich"};
  app.require_subcommand(1, 1);
  std::string config_path;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"match", "Snap trip records to the road network"},
      {"enrich", "Annotate matched records with limits, elevation and infrastructure"},
      {"stats", "Build speed-energy statistics per speed limit"},
      {"estimate", "Estimate trip energy from speed-energy statistics"},
      {"histogram", "Free-flow speed histogram under one speed limit"},
      {"heatmap", "Speed by time-of-day heatmap with percentile contours"},
      {"segments", "Cut trips into fixed-length learning segments"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
    sub->allow_extras();
    sub->footer("Any configuration key may be overridden as --section.key value.");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  PipelineConfig cfg;
  try {
    if (!config_path.empty()) tools::apply_config_file(cfg, config_path);
    tools::apply_overrides(cfg, sub->remaining());
    return run(command, cfg);
  } catch (const Error& e) {
    spdlog::error("{}{}", e.what(), e.kind() == ErrorKind::EmptyHistogram || e.kind() == ErrorKind::UncoveredTrip
                                        ? filter_of(command, cfg)
                                        : "");
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
