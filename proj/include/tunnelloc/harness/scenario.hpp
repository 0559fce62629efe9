#ifndef TUNNELLOC_HARNESS_SCENARIO_HPP
#define TUNNELLOC_HARNESS_SCENARIO_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tunnelloc/localizer/localizer.hpp"
#include "tunnelloc/sim/scan_sim.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

/// Malformed or inconsistent scenario/config input.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Thresholds {
  double lateral_rms = 0.15;
  double longitudinal_rms = 0.30;
  double mean_step_ms = 100.0;
  double max_step_ms = 200.0;
  double detection_rate = 0.85;
};

struct Scenario {
  std::string name = "default";
  TunnelSpec tunnel = default_tunnel_spec();
  SimConfig sim;  // route, sensor models, traffic
  std::set<FacilityKind> ablation = all_landmark_kinds();  // enabled kinds
  bool use_lane = true;
  bool corrections = true;
  NoiseConfig noise;
  std::uint64_t seed = 1;
  GeoOrigin origin{37.27, 127.18};
  double initial_heading_sigma_deg = 0.2;
  Thresholds thresholds;
  bool assert_thresholds = false;

  void validate() const {
    if (!ablation.count(FacilityKind::kFireExtinguisherLamp))
      throw ValidationError("ablation must keep the fire extinguisher lamp");
    for (auto k : ablation)
      if (!is_landmark_kind(k)) throw ValidationError("ablation lists a non-landmark kind");
    try {
      tunnelloc::validate(tunnel);
      sim.lidar.validate();
      sim.dr.validate();
      noise.validate();
    } catch (const InvalidArgument& e) {
      throw ValidationError(e.what());
    }
    if (sim.route.lane < 1 || sim.route.lane > tunnel.lane_count)
      throw ValidationError("route lane outside the tunnel");
    if (!(sim.route.speed_kmh > 0.0)) throw ValidationError("route speed must be > 0");
    if (!(initial_heading_sigma_deg >= 0.0)) throw ValidationError("initial heading sigma must be >= 0");
  }

  LocalizerConfig localizer_config() const {
    LocalizerConfig c;
    c.noise = noise;
    c.enabled = ablation;
    c.use_lane = use_lane;
    c.corrections = corrections;
    return c;
  }
};

inline Scenario default_scenario(int lane = 2, std::uint64_t seed = 1) {
  Scenario s;
  s.seed = seed;
  s.sim.seed = seed;
  s.sim.route.lane = lane;
  return s;
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

inline std::vector<std::pair<double, double>> parse_pairs(const std::string& s, const char* what) {
  std::vector<std::pair<double, double>> out;
  for (const auto& item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ValidationError(std::string(what) + ": expected a:b pairs, got '" + item + "'");
    try {
      out.emplace_back(std::stod(parts[0]), std::stod(parts[1]));
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": not a number in '" + item + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Accepts the report names (Lamp, ExitLight, LCS, ExitSign) and short forms, any case.
inline std::optional<FacilityKind> parse_kind_name(const std::string& name) {
  const std::string n = detail::lower(name);
  if (n == "lamp" || n == "fireextinguisherlamp" || n == "fire_extinguisher_lamp")
    return FacilityKind::kFireExtinguisherLamp;
  if (n == "exitlight" || n == "exit_light" || n == "el") return FacilityKind::kExitLight;
  if (n == "lcs") return FacilityKind::kLcs;
  if (n == "exitsign" || n == "exit_sign" || n == "es") return FacilityKind::kExitSign;
  if (n == "jetfan") return FacilityKind::kJetFan;
  if (n == "tunnellight") return FacilityKind::kTunnelLight;
  return std::nullopt;
}

/// Removes the listed kinds from the scenario's ablation set; "lane" disables lane matching.
inline void apply_ablation(Scenario& s, const std::string& list) {
  for (const auto& item : detail::split(list, ',')) {
    if (detail::lower(item) == "lane" || detail::lower(item) == "lanemarking") {
      s.use_lane = false;
      continue;
    }
    const auto k = parse_kind_name(item);
    if (!k || !is_landmark_kind(*k)) throw ValidationError("unknown facility kind '" + item + "'");
    s.ablation.erase(*k);
  }
  if (!s.ablation.count(FacilityKind::kFireExtinguisherLamp))
    throw ValidationError("the fire extinguisher lamp cannot be ablated");
}

inline std::string kinds_to_string(const std::set<FacilityKind>& kinds) {
  std::string out;
  for (auto k : kReportKinds) {
    if (!kinds.count(k)) continue;
    if (!out.empty()) out += ',';
    out += to_string(k);
  }
  return out;
}

/// Reads an INI scenario. Missing keys keep their defaults; unknown sections are rejected.
inline Scenario scenario_from_ptree(const boost::property_tree::ptree& pt) {
  Scenario s;
  static const std::set<std::string> known = {"scenario", "tunnel",  "route",     "lidar",
                                              "dr",       "gps",     "traffic",   "localizer",
                                              "origin",   "thresholds"};
  for (const auto& [section, _] : pt) {
    if (known.count(section) || section.rfind("facility_", 0) == 0) continue;
    throw ValidationError("unknown config section [" + section + "]");
  }
  auto num = [&](const std::string& key, double def) {
    const auto v = pt.get_optional<std::string>(key);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (detail::trim(v->substr(used)).empty()) return d;
    } catch (const std::exception&) {
    }
    throw ValidationError("config key " + key + ": not a number: '" + *v + "'");
  };
  auto flag = [&](const std::string& key, bool def) {
    const auto v = pt.get_optional<std::string>(key);
    if (!v) return def;
    const std::string l = detail::lower(detail::trim(*v));
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw ValidationError("config key " + key + ": not a boolean: '" + *v + "'");
  };
  auto integer = [&](const std::string& key, long long def) {
    const double d = num(key, static_cast<double>(def));
    if (d != std::floor(d)) throw ValidationError("config key " + key + ": not an integer");
    return static_cast<long long>(d);
  };

  s.name = pt.get<std::string>("scenario.name", s.name);
  s.seed = static_cast<std::uint64_t>(integer("scenario.seed", 1));
  s.sim.seed = s.seed;
  s.initial_heading_sigma_deg = num("scenario.initial_heading_sigma_deg", s.initial_heading_sigma_deg);
  s.assert_thresholds = flag("scenario.assert_thresholds", false);

  auto& t = s.tunnel;
  t.a = num("tunnel.a", t.a);
  t.b = num("tunnel.b", t.b);
  t.length = num("tunnel.length", t.length);
  t.lane_count = static_cast<int>(integer("tunnel.lanes", t.lane_count));
  t.lane_width = num("tunnel.lane_width", t.lane_width);
  t.entry_pose = Pose2D(num("tunnel.entry_x", t.entry_pose.x), num("tunnel.entry_y", t.entry_pose.y),
                        num("tunnel.entry_heading_deg", t.entry_pose.psi() * kRadToDeg) * kDegToRad);
  if (auto sec = pt.get_optional<std::string>("tunnel.sections")) {
    t.sections.clear();
    for (const auto& [len, k] : detail::parse_pairs(*sec, "tunnel.sections")) t.sections.push_back({len, k});
    if (!pt.get_optional<std::string>("tunnel.length")) {
      t.length = 0.0;
      for (const auto& x : t.sections) t.length += x.length;
    }
  }
  for (const auto& [section, _] : pt) {
    if (section.rfind("facility_", 0) != 0) continue;
    const auto k = parse_kind_name(section.substr(9));
    if (!k) throw ValidationError("unknown facility section [" + section + "]");
    auto it = std::find_if(t.facility_layout.begin(), t.facility_layout.end(),
                           [&](const FacilityRule& r) { return r.kind == *k; });
    if (it == t.facility_layout.end()) throw ValidationError("[" + section + "]: kind not in the layout");
    const std::string p = section + ".";
    it->interval = num(p + "interval", it->interval);
    it->height = num(p + "height", it->height);
    it->start = num(p + "start", it->start);
    it->lateral = num(p + "lateral", it->lateral);
    it->protrusion = num(p + "protrusion", it->protrusion);
    it->size.w = num(p + "w_mm", it->size.w);
    it->size.l = num(p + "l_mm", it->size.l);
    it->size.h = num(p + "h_mm", it->size.h);
  }

  auto& r = s.sim.route;
  r.lane = static_cast<int>(integer("route.lane", r.lane));
  r.speed_kmh = num("route.speed_kmh", r.speed_kmh);
  r.start_s = num("route.start_s", r.start_s);
  r.end_margin = num("route.end_margin", r.end_margin);
  r.wander_amplitude = num("route.wander_amplitude", r.wander_amplitude);
  r.wander_wavelength = num("route.wander_wavelength", r.wander_wavelength);
  if (auto prof = pt.get_optional<std::string>("route.speed_profile"))
    r.speed_profile = detail::parse_pairs(*prof, "route.speed_profile");

  auto& l = s.sim.lidar;
  l.channels = static_cast<int>(integer("lidar.channels", l.channels));
  l.vfov_min_deg = num("lidar.vfov_min_deg", l.vfov_min_deg);
  l.vfov_max_deg = num("lidar.vfov_max_deg", l.vfov_max_deg);
  l.h_res_deg = num("lidar.h_res_deg", l.h_res_deg);
  l.range_max = num("lidar.range_max", l.range_max);
  l.range_noise_sigma = num("lidar.range_noise", l.range_noise_sigma);
  l.rate = num("lidar.rate", l.rate);
  l.mount_height = num("lidar.mount_height", l.mount_height);
  s.sim.synthetic_distortion = flag("lidar.synthetic_distortion", s.sim.synthetic_distortion);

  auto& d = s.sim.dr;
  d.gyro_bias = num("dr.gyro_bias_deg_h", d.gyro_bias * kRadToDeg * 3600.0) * kDegToRad / 3600.0;
  d.gyro_noise = num("dr.gyro_noise_deg_s_rthz", d.gyro_noise * kRadToDeg) * kDegToRad;
  d.accel_bias = num("dr.accel_bias_ug", d.accel_bias / 9.80665 * 1e6) * 1e-6 * 9.80665;
  d.accel_noise = num("dr.accel_noise_ug_rthz", d.accel_noise / 9.80665 * 1e6) * 1e-6 * 9.80665;
  d.speed_noise = num("dr.speed_noise", d.speed_noise);
  d.rate = num("dr.rate", d.rate);

  s.sim.gps.cep = num("gps.cep", s.sim.gps.cep);
  s.sim.gps.correlation_time = num("gps.correlation_time", s.sim.gps.correlation_time);

  auto& o = s.sim.occluders;
  o.density = num("traffic.density", o.density);
  o.length = num("traffic.length", o.length);
  o.width = num("traffic.width", o.width);
  o.height = num("traffic.height", o.height);
  o.relative_speed_kmh = num("traffic.relative_speed_kmh", o.relative_speed_kmh);

  if (auto en = pt.get_optional<std::string>("localizer.enabled")) {
    s.ablation.clear();
    for (const auto& item : detail::split(*en, ',')) {
      const auto k = parse_kind_name(item);
      if (!k || !is_landmark_kind(*k)) throw ValidationError("localizer.enabled: unknown kind '" + item + "'");
      s.ablation.insert(*k);
    }
  }
  s.use_lane = flag("localizer.use_lane", s.use_lane);
  s.corrections = flag("localizer.corrections", s.corrections);
  auto& n = s.noise;
  auto sq = [](double v) { return v * v; };
  const double q_pos = num("localizer.q_pos", std::sqrt(n.Q(0, 0)));
  const double q_psi = num("localizer.q_heading_deg", std::sqrt(n.Q(2, 2)) * kRadToDeg);
  n.Q = Eigen::Vector3d(sq(q_pos), sq(q_pos), sq(q_psi * kDegToRad)).asDiagonal();
  const double e_pos = num("localizer.r_eta_pos", std::sqrt(n.R_eta(0, 0)));
  const double e_psi = num("localizer.r_eta_heading_deg", std::sqrt(n.R_eta(2, 2)) * kRadToDeg);
  n.R_eta = Eigen::Vector3d(sq(e_pos), sq(e_pos), sq(e_psi * kDegToRad)).asDiagonal();
  const double rr = num("localizer.r_range", std::sqrt(n.R_rb(0, 0)));
  const double rb = num("localizer.r_bearing", std::sqrt(n.R_rb(1, 1)));
  n.R_rb = Eigen::Vector2d(sq(rr), sq(rb)).asDiagonal();
  const double rg = num("localizer.r_gps", std::sqrt(n.R_gps(0, 0)));
  n.R_gps = Eigen::Vector2d(sq(rg), sq(rg)).asDiagonal();

  s.origin = GeoOrigin(num("origin.lat0", s.origin.lat0), num("origin.lon0", s.origin.lon0));

  auto& th = s.thresholds;
  th.lateral_rms = num("thresholds.lateral_rms", th.lateral_rms);
  th.longitudinal_rms = num("thresholds.longitudinal_rms", th.longitudinal_rms);
  th.mean_step_ms = num("thresholds.mean_step_ms", th.mean_step_ms);
  th.max_step_ms = num("thresholds.max_step_ms", th.max_step_ms);
  th.detection_rate = num("thresholds.detection_rate", th.detection_rate);
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(e.what());
  }
  Scenario s;
  try {
    s = scenario_from_ptree(pt);
  } catch (const InvalidArgument& e) {
    throw ValidationError(e.what());
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_SCENARIO_HPP
