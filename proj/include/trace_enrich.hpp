#ifndef TRACE_ENRICH_HPP
#define TRACE_ENRICH_HPP

#include "trace_enrich/analysis.hpp"
#include "trace_enrich/csv.hpp"
#include "trace_enrich/elevation.hpp"
#include "trace_enrich/enrich.hpp"
#include "trace_enrich/errors.hpp"
#include "trace_enrich/geo.hpp"
#include "trace_enrich/map_match.hpp"
#include "trace_enrich/osm_xml.hpp"
#include "trace_enrich/pipeline.hpp"
#include "trace_enrich/road_network.hpp"
#include "trace_enrich/routing.hpp"
#include "trace_enrich/spatial_index.hpp"
#include "trace_enrich/speed_limit.hpp"
#include "trace_enrich/viterbi.hpp"

#endif  // TRACE_ENRICH_HPP
