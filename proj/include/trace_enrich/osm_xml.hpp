#ifndef TRACE_ENRICH_OSM_XML_HPP
#define TRACE_ENRICH_OSM_XML_HPP

#include <expat.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trace_enrich/csv.hpp"
#include "trace_enrich/road_network.hpp"

namespace trace_enrich {

struct OsmLoadOptions {
  std::optional<BoundingBox> bbox;  // nodes outside are dropped; ways split around them
  std::optional<std::string> bus_stop_csv;
  RoadNetwork::Options network;
};

namespace detail {

// Streams node/way/tag/nd elements of an OSM XML document into a builder.
class OsmXmlReader {
 public:
  OsmXmlReader(RoadNetworkBuilder& builder, std::string file, const std::optional<BoundingBox>& bbox)
      : builder_(builder), file_(std::move(file)), bbox_(bbox), parser_(XML_ParserCreate("UTF-8"), &XML_ParserFree) {
    XML_SetUserData(parser_.get(), this);
    XML_SetElementHandler(parser_.get(), &OsmXmlReader::on_start, &OsmXmlReader::on_end);
  }

  void feed(const char* data, std::size_t len, bool final) {
    if (XML_Parse(parser_.get(), data, static_cast<int>(len), final ? 1 : 0) == XML_STATUS_ERROR) {
      if (pending_error_) throw *pending_error_;
      throw ParseError(file_, XML_GetCurrentLineNumber(parser_.get()),
                       XML_ErrorString(XML_GetErrorCode(parser_.get())));
    }
  }

 private:
  enum class Element { None, Node, Way };

  static const char* attr(const XML_Char** atts, const char* name) {
    for (std::size_t i = 0; atts[i]; i += 2)
      if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
    return nullptr;
  }

  void fail(const std::string& message) {
    if (!pending_error_) pending_error_.emplace(file_, XML_GetCurrentLineNumber(parser_.get()), message);
    XML_StopParser(parser_.get(), XML_FALSE);
  }

  std::optional<double> number(const XML_Char** atts, const char* name) {
    const char* v = attr(atts, name);
    return v ? csv::parse_double(v) : std::nullopt;
  }

  std::optional<std::int64_t> integer(const XML_Char** atts, const char* name) {
    const char* v = attr(atts, name);
    return v ? csv::parse_int(v) : std::nullopt;
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char** atts) {
    static_cast<OsmXmlReader*>(self)->start(name, atts);
  }
  static void on_end(void* self, const XML_Char* name) { static_cast<OsmXmlReader*>(self)->end(name); }

  void start(std::string_view name, const XML_Char** atts) {
    if (name == "node") {
      auto id = integer(atts, "id");
      auto lat = number(atts, "lat");
      auto lon = number(atts, "lon");
      if (!id || !lat || !lon) return fail("node requires numeric id, lat and lon");
      if (!std::isfinite(*lat) || !std::isfinite(*lon) || *lat < -90.0 || *lat > 90.0)
        return fail("node coordinate out of range");
      current_ = Element::Node;
      node_id_ = *id;
      node_pos_ = GeoPoint(*lat, *lon);
      tags_.clear();
    } else if (name == "way") {
      auto id = integer(atts, "id");
      if (!id) return fail("way requires a numeric id");
      current_ = Element::Way;
      way_id_ = *id;
      refs_.clear();
      tags_.clear();
    } else if (name == "nd" && current_ == Element::Way) {
      auto ref = integer(atts, "ref");
      if (!ref) return fail("nd requires a numeric ref");
      refs_.push_back(*ref);
    } else if (name == "tag" && current_ != Element::None) {
      const char* k = attr(atts, "k");
      const char* v = attr(atts, "v");
      if (!k || !v) return fail("tag requires k and v");
      tags_[k] = v;
    }
  }

  void end(std::string_view name) {
    if (name == "node" && current_ == Element::Node) {
      if (!bbox_ || bbox_->contains(node_pos_)) builder_.add_node(node_id_, node_pos_, std::move(tags_));
      current_ = Element::None;
    } else if (name == "way" && current_ == Element::Way) {
      builder_.add_way(way_id_, std::move(refs_), std::move(tags_));
      current_ = Element::None;
    }
    if (name == "node" || name == "way") {
      tags_ = {};
      refs_ = {};
    }
  }

  RoadNetworkBuilder& builder_;
  std::string file_;
  std::optional<BoundingBox> bbox_;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser_;
  std::optional<ParseError> pending_error_;

  Element current_ = Element::None;
  std::int64_t node_id_ = 0;
  std::int64_t way_id_ = 0;
  GeoPoint node_pos_;
  std::vector<std::int64_t> refs_;
  Tags tags_;
};

}  // namespace detail

/// Reads a `stop_id,lat,lon` catalog.
inline std::vector<GeoPoint> load_bus_stop_csv(const std::string& path) {
  const csv::Table t = csv::read_table_file(path);
  const std::size_t lat_col = t.require_column("lat");
  const std::size_t lon_col = t.require_column("lon");
  t.require_column("stop_id");
  std::vector<GeoPoint> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto lat = csv::parse_double(t.rows[i][lat_col]);
    auto lon = csv::parse_double(t.rows[i][lon_col]);
    if (!lat || !lon || *lat < -90.0 || *lat > 90.0) throw ParseError(path, t.lines[i], "invalid bus stop coordinate");
    out.emplace_back(*lat, *lon);
  }
  return out;
}

/// Builds a network from an in-memory OSM XML document.
inline RoadNetwork parse_osm(std::string_view xml, const OsmLoadOptions& opts = {}, const std::string& file = {}) {
  RoadNetworkBuilder builder;
  detail::OsmXmlReader reader(builder, file, opts.bbox);
  reader.feed(xml.data(), xml.size(), true);
  if (opts.bus_stop_csv)
    for (const auto& p : load_bus_stop_csv(*opts.bus_stop_csv)) builder.add_bus_stop(p);
  return builder.build(opts.network);
}

/// Loads an OSM XML map extract. Throws ParseError (with line) on malformed
/// XML and EmptyNetwork when nothing drivable remains.
inline RoadNetwork load_osm(const std::string& path, const OsmLoadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open map extract");
  RoadNetworkBuilder builder;
  detail::OsmXmlReader reader(builder, path, opts.bbox);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    reader.feed(buf.data(), n, !in);
  }
  if (opts.bus_stop_csv)
    for (const auto& p : load_bus_stop_csv(*opts.bus_stop_csv)) builder.add_bus_stop(p);
  return builder.build(opts.network);
}

}  // namespace trace_enrich

#endif  // TRACE_ENRICH_OSM_XML_HPP
