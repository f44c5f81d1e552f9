#ifndef TRACE_ENRICH_ERRORS_HPP
#define TRACE_ENRICH_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace trace_enrich {

enum class ErrorKind {
  InvalidArgument,
  DegenerateSegment,
  Parse,
  EmptyNetwork,
  NoDefault,
  EmptyTrace,
  Order,
  TagParse,
  EmptyHistogram,
  UncoveredTrip,
  Shape,
  Elevation,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::InvalidArgument, what) {}
};

class DegenerateSegment : public Error {
 public:
  DegenerateSegment() : Error(ErrorKind::DegenerateSegment, "bearing undefined for identical points") {}
};

// Malformed input file. Carries the file name (may be empty) and a 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& message)
      : Error(ErrorKind::Parse, format(file, line, message)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& message) {
    return (file.empty() ? std::string("<input>") : file) + ":" + std::to_string(line) + ": " + message;
  }

  std::string file_;
  std::size_t line_;
};

class EmptyNetwork : public Error {
 public:
  explicit EmptyNetwork(const std::string& what = "map extract contains no drivable ways")
      : Error(ErrorKind::EmptyNetwork, what) {}
};

class NoDefault : public Error {
 public:
  explicit NoDefault(const std::string& what = "highway class has no default speed limit")
      : Error(ErrorKind::NoDefault, what) {}
};

class EmptyTrace : public Error {
 public:
  explicit EmptyTrace(const std::string& what = "empty trace") : Error(ErrorKind::EmptyTrace, what) {}
};

class OrderError : public Error {
 public:
  explicit OrderError(const std::string& what) : Error(ErrorKind::Order, what) {}
};

class TagParseError : public Error {
 public:
  explicit TagParseError(std::string raw)
      : Error(ErrorKind::TagParse, "cannot parse speed value '" + raw + "'"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class EmptyHistogram : public Error {
 public:
  explicit EmptyHistogram(const std::string& what) : Error(ErrorKind::EmptyHistogram, what) {}
};

class UncoveredTrip : public Error {
 public:
  explicit UncoveredTrip(const std::string& what) : Error(ErrorKind::UncoveredTrip, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class ElevationError : public Error {
 public:
  explicit ElevationError(const std::string& what) : Error(ErrorKind::Elevation, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_ERRORS_HPP
