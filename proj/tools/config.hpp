#ifndef TRACE_ENRICH_TOOLS_CONFIG_HPP
#define TRACE_ENRICH_TOOLS_CONFIG_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <toml.hpp>

#include "trace_enrich/pipeline.hpp"

namespace trace_enrich::tools {

namespace fs = std::filesystem;

/// One configuration value: a TOML node plus, for command-line overrides,
/// the raw text it came from. Relative paths resolve against `base`.
struct ConfigValue {
  const toml::node& node;
  std::string raw;
  fs::path base;
};

namespace detail {

inline double as_number(const std::string& key, const ConfigValue& v) {
  if (auto d = v.node.value<double>()) return *d;
  throw ConfigError(key + ": expected a number");
}

inline std::int64_t as_integer(const std::string& key, const ConfigValue& v) {
  if (auto i = v.node.as_integer()) return i->get();
  throw ConfigError(key + ": expected an integer");
}

inline bool as_bool(const std::string& key, const ConfigValue& v) {
  if (auto b = v.node.as_boolean()) return b->get();
  throw ConfigError(key + ": expected true or false");
}

inline std::string as_string(const std::string& key, const ConfigValue& v) {
  if (auto s = v.node.as_string()) return s->get();
  if (!v.raw.empty()) return v.raw;
  throw ConfigError(key + ": expected a string");
}

inline std::string as_path(const std::string& key, const ConfigValue& v) {
  fs::path p = as_string(key, v);
  if (p.is_relative() && !v.base.empty()) p = v.base / p;
  return p.lexically_normal().string();
}

inline std::vector<std::string> as_paths(const std::string& key, const ConfigValue& v) {
  if (auto arr = v.node.as_array()) {
    std::vector<std::string> out;
    for (const auto& item : *arr) out.push_back(as_path(key, ConfigValue{item, "", v.base}));
    return out;
  }
  return {as_path(key, v)};
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const ConfigValue&)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> m;
    auto number = [&m](const char* key, auto member) {
      m[key] = [member](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
        std::invoke(member, c) = as_number(k, v);
      };
    };
    m["paths.network"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.network = as_path(k, v);
    };
    m["paths.trips"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.trips = as_paths(k, v);
    };
    m["paths.output_dir"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.output_dir = as_path(k, v);
    };
    m["paths.elevation_cache"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.elevation_cache = as_path(k, v);
    };
    m["paths.bus_stops"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.bus_stops = as_path(k, v);
    };
    m["paths.enriched"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.enriched = as_paths(k, v);
    };
    m["paths.stats"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.paths.stats = as_path(k, v);
    };
    m["input.energy_column"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.input.energy_column = as_string(k, v);
    };
    m["input.speed_column"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.input.speed_column = as_string(k, v);
    };
    number("hmm.sigma_z", [](PipelineConfig& c) -> double& { return c.hmm.sigma_z; });
    number("hmm.beta", [](PipelineConfig& c) -> double& { return c.hmm.beta; });
    number("hmm.candidate_radius_m", [](PipelineConfig& c) -> double& { return c.hmm.candidate_radius_m; });
    number("hmm.route_search_limit_m", [](PipelineConfig& c) -> double& { return c.hmm.route_search_limit_m; });
    number("hmm.break_gap_s", [](PipelineConfig& c) -> double& { return c.hmm.break_gap_s; });
    number("radii.intersection_m", [](PipelineConfig& c) -> double& { return c.radii.intersection_m; });
    number("radii.bus_stop_m", [](PipelineConfig& c) -> double& { return c.radii.bus_stop_m; });
    number("radii.focus_m", [](PipelineConfig& c) -> double& { return c.radii.focus_m; });
    number("analysis.speed_bin_kmh", [](PipelineConfig& c) -> double& { return c.analysis.speed_bin_kmh; });
    number("analysis.hist_bin_kmh", [](PipelineConfig& c) -> double& { return c.analysis.hist_bin_kmh; });
    number("analysis.time_bin_min", [](PipelineConfig& c) -> double& { return c.analysis.time_bin_min; });
    number("analysis.slow_threshold_kmh", [](PipelineConfig& c) -> double& { return c.analysis.slow_threshold_kmh; });
    number("analysis.horizon_s", [](PipelineConfig& c) -> double& { return c.analysis.horizon_s; });
    number("elevation.max_unresolved_fraction",
           [](PipelineConfig& c) -> double& { return c.max_unresolved_elevation; });
    m["analysis.limit_kmh"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.analysis.limit_kmh = as_number(k, v);
    };
    m["analysis.segment_len"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      const auto n = as_integer(k, v);
      if (n <= 0) throw ConfigError(k + " must be > 0");
      c.analysis.segment_len = static_cast<std::size_t>(n);
    };
    m["analysis.skip_uncovered"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      c.analysis.skip_uncovered = as_bool(k, v);
    };
    m["direction.perpendicular"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      const auto s = as_string(k, v);
      if (s == "forward") {
        c.perpendicular = PerpendicularRule::Forward;
      } else if (s == "backward") {
        c.perpendicular = PerpendicularRule::Backward;
      } else {
        throw ConfigError(k + ": expected \"forward\" or \"backward\"");
      }
    };
    m["workers"] = [](PipelineConfig& c, const std::string& k, const ConfigValue& v) {
      const auto n = as_integer(k, v);
      if (n < 1 || n > 1024) throw ConfigError(k + " must be within 1..1024");
      c.workers = static_cast<unsigned>(n);
    };
    return m;
  }();
  return table;
}

inline void apply(PipelineConfig& cfg, const std::string& key, const ConfigValue& v) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(cfg, key, v);
}

inline void apply_table(PipelineConfig& cfg, const toml::table& t, const std::string& prefix, const fs::path& base) {
  for (const auto& [k, node] : t) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (auto sub = node.as_table()) {
      apply_table(cfg, *sub, key, base);
    } else {
      apply(cfg, key, ConfigValue{node, "", base});
    }
  }
}

}  // namespace detail

/// Parses a TOML configuration file. Relative paths resolve against the
/// file's directory.
inline void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  toml::table t;
  try {
    t = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    throw ParseError(path, e.source().begin.line, std::string(e.description()));
  }
  detail::apply_table(cfg, t, "", fs::path(path).parent_path());
}

/// Applies `--dotted.key value` (or `--dotted.key=value`) pairs. A key given
/// more than once collects into a list. Values parse as TOML scalars, falling
/// back to plain strings; relative paths resolve against the working directory.
inline void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::vector<std::string>>> grouped;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (!a.starts_with("--") || a.size() == 2) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= args.size()) throw ConfigError("missing value for --" + key);
      value = args[++i];
    }
    auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.first == key; });
    if (it == grouped.end()) {
      grouped.emplace_back(key, std::vector<std::string>{value});
    } else {
      it->second.push_back(value);
    }
  }
  for (const auto& [key, values] : grouped) {
    auto scalar = [](const std::string& raw) -> toml::table {
      toml::table holder;
      try {
        holder = toml::parse("v = " + raw);
      } catch (const toml::parse_error&) {
        holder.insert_or_assign("v", raw);
      }
      if (holder["v"].is_table() || holder["v"].is_array()) holder.insert_or_assign("v", raw);
      return holder;
    };
    if (values.size() == 1) {
      const auto holder = scalar(values.front());
      detail::apply(cfg, key, ConfigValue{*holder.get("v"), values.front(), fs::path()});
    } else {
      toml::array arr;
      for (const auto& v : values) arr.push_back(v);
      detail::apply(cfg, key, ConfigValue{arr, "", fs::path()});
    }
  }
}

}  // namespace trace_enrich::tools

#endif  // TRACE_ENRICH_TOOLS_CONFIG_HPP
