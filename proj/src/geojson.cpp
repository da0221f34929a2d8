#include <charconv>
#include <cstdio>
#include "json.hpp"
#include <sstream>

#include "openstreets/error.hpp"
#include "openstreets/roadnet.hpp"

namespace openstreets {

namespace {

std::string shortest(double value) {
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace

std::vector<MapFeature> map_features(const RoadNetwork& net, const SegmentOverlay& overlay) {
  for (const auto& [id, value] : overlay) {
    if (!net.find_segment(id)) {
      throw Error(ErrorCode::UnknownSegmentId, "overlay names segment " + std::to_string(id));
    }
  }
  std::vector<MapFeature> out;
  out.reserve(net.segment_count());
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    const auto& a = net.intersections()[net.from_vertex(i)];
    const auto& b = net.intersections()[net.to_vertex(i)];
    MapFeature f;
    f.segment_id = net.segment(i).segment_id;
    f.from_lon = a.lon;
    f.from_lat = a.lat;
    f.to_lon = b.lon;
    f.to_lat = b.lat;
    if (auto it = overlay.find(f.segment_id); it != overlay.end()) f.value = it->second;
    out.push_back(f);
  }
  return out;
}

std::string write_geojson(const std::vector<MapFeature>& features) {
  std::ostringstream out;
  out << "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < features.size(); ++i) {
    const MapFeature& f = features[i];
    out << (i ? ",\n" : "\n") << "{\"type\":\"Feature\",\"geometry\":{\"type\":\"LineString\",\"coordinates\":[["
        << fixed6(f.from_lon) << ',' << fixed6(f.from_lat) << "],[" << fixed6(f.to_lon) << ','
        << fixed6(f.to_lat) << "]]},\"properties\":{\"segment_id\":" << f.segment_id << ",\"value\":"
        << (f.value ? shortest(*f.value) : std::string("null")) << "}}";
  }
  out << "\n]}\n";
  return out.str();
}

std::vector<MapFeature> parse_geojson(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadValue, std::string("invalid GeoJSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw Error(ErrorCode::BadValue, "GeoJSON root must be a FeatureCollection");
  }
  std::vector<MapFeature> out;
  for (const auto& feature : doc.at("features")) {
    const auto& coords = feature.at("geometry").at("coordinates");
    if (coords.size() != 2) throw Error(ErrorCode::BadValue, "LineString must have two positions");
    MapFeature f;
    f.from_lon = coords[0][0].get<double>();
    f.from_lat = coords[0][1].get<double>();
    f.to_lon = coords[1][0].get<double>();
    f.to_lat = coords[1][1].get<double>();
    const auto& props = feature.at("properties");
    f.segment_id = props.at("segment_id").get<SegmentId>();
    if (!props.at("value").is_null()) f.value = props.at("value").get<double>();
    out.push_back(f);
  }
  return out;
}

std::string export_geojson(const RoadNetwork& net, const SegmentOverlay& overlay) {
  return write_geojson(map_features(net, overlay));
}

}  // namespace openstreets
