#ifndef TRACE_ENRICH_ELEVATION_HPP
#define TRACE_ENRICH_ELEVATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trace_enrich/csv.hpp"
#include "trace_enrich/geo.hpp"

namespace trace_enrich {

/// Supplies terrain elevation (meters) for a batch of coordinates; nullopt
/// where the source has no value.
class ElevationProvider {
 public:
  virtual ~ElevationProvider() = default;
  virtual std::vector<std::optional<double>> elevations(std::span<const GeoPoint> points) = 0;
};

/// Coordinate rounded to 5 decimal places, stored as scaled integers.
struct ElevationKey {
  std::int64_t lat5 = 0;
  std::int64_t lon5 = 0;

  static ElevationKey of(const GeoPoint& p) {
    return {std::llround(p.lat() * 1e5), std::llround(p.lon() * 1e5)};
  }

  static std::string format(std::int64_t v) {
    const std::int64_t a = v < 0 ? -v : v;
    std::string frac = std::to_string(a % 100000);
    frac.insert(0, 5 - frac.size(), '0');
    return (v < 0 ? "-" : "") + std::to_string(a / 100000) + "." + frac;
  }

  friend auto operator<=>(const ElevationKey&, const ElevationKey&) = default;
};

/// Elevation cache backed by a `lat5,lon5,elevation_m` CSV file.
///
/// Reads may run concurrently; inserts take an exclusive lock. Saving writes
/// rows sorted by key so the file is stable across runs.
class FileElevationCache : public ElevationProvider {
 public:
  FileElevationCache() = default;

  static FileElevationCache load(const std::string& path) {
    FileElevationCache cache;
    const csv::Table t = csv::read_table_file(path);
    const auto lat_col = t.require_column("lat5");
    const auto lon_col = t.require_column("lon5");
    const auto elev_col = t.require_column("elevation_m");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      auto lat = csv::parse_double(t.rows[i][lat_col]);
      auto lon = csv::parse_double(t.rows[i][lon_col]);
      auto elev = csv::parse_double(t.rows[i][elev_col]);
      if (!lat || !lon || !elev || !std::isfinite(*elev)) throw ParseError(path, t.lines[i], "invalid elevation row");
      cache.values_[{std::llround(*lat * 1e5), std::llround(*lon * 1e5)}] = *elev;
    }
    return cache;
  }

  FileElevationCache(FileElevationCache&& other) noexcept : values_(std::move(other.values_)) {}
  FileElevationCache& operator=(FileElevationCache&& other) noexcept {
    values_ = std::move(other.values_);
    return *this;
  }

  std::optional<double> lookup(const GeoPoint& p) const {
    std::shared_lock lock(mutex_);
    auto it = values_.find(ElevationKey::of(p));
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const GeoPoint& p, double elevation_m) {
    std::unique_lock lock(mutex_);
    values_[ElevationKey::of(p)] = elevation_m;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return values_.size();
  }

  std::vector<std::optional<double>> elevations(std::span<const GeoPoint> points) override {
    std::vector<std::optional<double>> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(lookup(p));
    return out;
  }

  void save(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream os(path);
    if (!os) throw ElevationError("cannot write elevation cache " + path);
    os << "lat5,lon5,elevation_m\n";
    char buf[64];
    for (const auto& [k, v] : values_) {
      std::snprintf(buf, sizeof buf, "%.3f", v);
      os << ElevationKey::format(k.lat5) << ',' << ElevationKey::format(k.lon5) << ',' << buf << '\n';
    }
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<ElevationKey, double> values_;
};

/// Thrown by an upstream elevation source for failures worth retrying.
class TransientElevationError : public ElevationError {
 public:
  using ElevationError::ElevationError;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

/// Fronts a remote elevation service with a cache. Misses are fetched in
/// batches of at most `batch_size` (service limit 512) with exponential
/// backoff on TransientElevationError; results are written to the cache.
class CachedElevationService : public ElevationProvider {
 public:
  using Fetch = std::function<std::vector<double>(std::span<const GeoPoint>)>;
  using Sleep = std::function<void(std::chrono::milliseconds)>;

  static constexpr std::size_t kMaxBatch = 512;

  CachedElevationService(FileElevationCache& cache, Fetch fetch, RetryPolicy retry = {},
                         std::size_t batch_size = kMaxBatch,
                         Sleep sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : cache_(cache), fetch_(std::move(fetch)), retry_(retry), batch_size_(batch_size), sleep_(std::move(sleep)) {
    if (batch_size_ == 0 || batch_size_ > kMaxBatch) throw InvalidArgument("elevation batch size must be 1..512");
  }

  std::vector<std::optional<double>> elevations(std::span<const GeoPoint> points) override {
    std::vector<std::optional<double>> out = cache_.elevations(points);
    std::vector<GeoPoint> missing;
    std::map<ElevationKey, bool> queued;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (!out[i] && !queued[ElevationKey::of(points[i])]) {
        queued[ElevationKey::of(points[i])] = true;
        missing.push_back(points[i]);
      }
    for (std::size_t start = 0; start < missing.size(); start += batch_size_) {
      std::span<const GeoPoint> batch(missing.data() + start, std::min(batch_size_, missing.size() - start));
      auto values = fetch_with_retry(batch);
      if (values.size() != batch.size()) throw ElevationError("elevation service returned a short batch");
      for (std::size_t i = 0; i < batch.size(); ++i) cache_.insert(batch[i], values[i]);
    }
    for (std::size_t i = 0; i < points.size(); ++i)
      if (!out[i]) out[i] = cache_.lookup(points[i]);
    return out;
  }

 private:
  std::vector<double> fetch_with_retry(std::span<const GeoPoint> batch) {
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        return fetch_(batch);
      } catch (const TransientElevationError&) {
        if (attempt >= retry_.max_attempts) throw;
        sleep_(backoff);
        backoff = std::chrono::milliseconds(static_cast<std::int64_t>(backoff.count() * retry_.multiplier));
      }
    }
  }

  FileElevationCache& cache_;
  Fetch fetch_;
  RetryPolicy retry_;
  std::size_t batch_size_;
  Sleep sleep_;
};

/// Five-point moving average. Near the ends the window is clipped to the
/// available indices [max(0, i-2), min(n-1, i+2)].
inline std::vector<double> smooth_elevation(std::span<const double> raw) {
  const std::size_t n = raw.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, i + 2);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += raw[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct GradientResult {
  std::vector<double> values;
  std::size_t coincident_warnings = 0;  // distinct elevations at the same position
};

/// Rise over great-circle run between consecutive points. Equal elevations
/// give exactly 0; the last point repeats the previous gradient.
inline GradientResult gradient(std::span<const GeoPoint> points, std::span<const double> elevations_m) {
  if (points.size() != elevations_m.size()) throw ShapeError("gradient: points and elevations differ in length");
  GradientResult r;
  const std::size_t n = points.size();
  if (n == 0) return r;
  r.values.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (elevations_m[i] == elevations_m[i + 1]) continue;
    const double run = great_circle_m(points[i], points[i + 1]);
    if (run == 0.0) {
      ++r.coincident_warnings;
      continue;
    }
    r.values[i] = (elevations_m[i + 1] - elevations_m[i]) / run;
  }
  if (n >= 2) r.values[n - 1] = r.values[n - 2];
  return r;
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ELEVATION_HPP
