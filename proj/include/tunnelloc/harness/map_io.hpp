#ifndef TUNNELLOC_HARNESS_MAP_IO_HPP
#define TUNNELLOC_HARNESS_MAP_IO_HPP

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "tunnelloc/harness/scenario.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

inline constexpr const char* kLandmarkHeader = "index,latitude,longitude,type";
inline constexpr const char* kLaneHeader = "index,latitude,longitude,var_x,var_y,cov_xy";

struct MapLoad {
  Maps maps;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // one per rejected row, with its line number

  bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return trim(s.substr(used)).empty() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

// Calls row(line_no, fields) for each data line; header and blank lines are skipped.
template <typename Fn>
std::size_t for_each_row(std::istream& in, const char* header, const char* what, MapLoad& out, Fn&& row) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (line_no == 1 && lower(t).rfind("index", 0) == 0) {
      if (lower(t) != header)
        out.warnings.push_back(std::string(what) + " line 1: unexpected header '" + t + "'");
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    row(line_no, fields);
    ++rows;
  }
  return rows;
}

}  // namespace detail

inline std::string landmark_csv(const LandmarkMap& map, const GeoOrigin& origin) {
  std::string out = std::string(kLandmarkHeader) + "\n";
  for (std::size_t i = 0; i < map.landmarks.size(); ++i) {
    const auto& lm = map.landmarks[i];
    const LatLon g = local_to_geo(lm.position, origin);
    out += std::to_string(i + 1) + "," + detail::fmt("%.9f", g.lat) + "," + detail::fmt("%.9f", g.lon) + "," +
           std::string(to_string(lm.kind)) + "\n";
  }
  return out;
}

inline std::string lane_csv(const LaneDistMap& map, const GeoOrigin& origin) {
  std::string out = std::string(kLaneHeader) + "\n";
  for (std::size_t i = 0; i < map.gaussians.size(); ++i) {
    const auto& g = map.gaussians[i];
    const LatLon ll = local_to_geo(g.mean, origin);
    out += std::to_string(i + 1) + "," + detail::fmt("%.9f", ll.lat) + "," + detail::fmt("%.9f", ll.lon) + "," +
           detail::fmt("%.6g", g.cov(0, 0)) + "," + detail::fmt("%.6g", g.cov(1, 1)) + "," +
           detail::fmt("%.6g", g.cov(0, 1)) + "\n";
  }
  return out;
}

inline void parse_landmarks(std::istream& in, const GeoOrigin& origin, MapLoad& out) {
  const auto rows = detail::for_each_row(in, kLandmarkHeader, "landmarks", out, [&](std::size_t ln, const auto& f) {
    const std::string where = "landmarks line " + std::to_string(ln) + ": ";
    double lat = 0.0;
    double lon = 0.0;
    if (f.size() != 4) {
      out.errors.push_back(where + "expected 4 fields, got " + std::to_string(f.size()));
      return;
    }
    if (!detail::parse_double(f[1], lat) || !detail::parse_double(f[2], lon) || !(std::abs(lat) < 90.0)) {
      out.errors.push_back(where + "bad latitude/longitude");
      return;
    }
    const auto kind = parse_kind_name(f[3]);
    if (!kind || !is_landmark_kind(*kind)) {
      out.errors.push_back(where + "unknown facility type '" + f[3] + "'");
      return;
    }
    out.maps.landmarks.landmarks.push_back({*kind, geo_to_local(lat, lon, origin), 0.0});
  });
  if (rows == 0) out.warnings.push_back("landmark map is empty");
}

inline void parse_lanes(std::istream& in, const GeoOrigin& origin, MapLoad& out) {
  const auto rows = detail::for_each_row(in, kLaneHeader, "lanes", out, [&](std::size_t ln, const auto& f) {
    const std::string where = "lanes line " + std::to_string(ln) + ": ";
    if (f.size() != 6) {
      out.errors.push_back(where + "expected 6 fields, got " + std::to_string(f.size()));
      return;
    }
    double v[5];
    for (int i = 0; i < 5; ++i) {
      if (!detail::parse_double(f[i + 1], v[i])) {
        out.errors.push_back(where + "field " + std::to_string(i + 2) + " is not a number");
        return;
      }
    }
    if (!(std::abs(v[0]) < 90.0)) {
      out.errors.push_back(where + "bad latitude");
      return;
    }
    LaneGaussian g;
    g.mean = geo_to_local(v[0], v[1], origin);
    g.cov << v[2], v[4], v[4], v[3];
    if (!(v[2] > 0.0 && v[3] > 0.0 && v[2] * v[3] - v[4] * v[4] > 0.0)) {
      out.errors.push_back(where + "covariance of row " + f[0] + " is not positive definite");
      return;
    }
    out.maps.lanes.gaussians.push_back(g);
  });
  if (rows == 0) out.warnings.push_back("lane map is empty");
}

inline MapLoad load_maps(const std::string& landmark_path, const std::string& lane_path, const GeoOrigin& origin) {
  MapLoad out;
  std::ifstream lm(landmark_path);
  if (!lm) out.errors.push_back("cannot open " + landmark_path);
  else parse_landmarks(lm, origin, out);
  std::ifstream ln(lane_path);
  if (!ln) out.errors.push_back("cannot open " + lane_path);
  else parse_lanes(ln, origin, out);
  return out;
}

/// Writes both files; returns the total number of bytes written.
inline std::size_t write_maps(const Maps& maps, const GeoOrigin& origin, const std::string& landmark_path,
                              const std::string& lane_path) {
  const std::string a = landmark_csv(maps.landmarks, origin);
  const std::string b = lane_csv(maps.lanes, origin);
  for (const auto& [path, text] : {std::pair{landmark_path, a}, std::pair{lane_path, b}}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  return a.size() + b.size();
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_MAP_IO_HPP
