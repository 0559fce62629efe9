#ifndef TUNNELLOC_TUNNEL_TUNNEL_MODEL_HPP
#define TUNNELLOC_TUNNEL_TUNNEL_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/tunnel/centerline.hpp"

namespace tunnelloc {

enum class FacilityKind : std::uint8_t {
  kFireExtinguisherLamp,
  kExitLight,
  kExitSign,
  kLcs,
  kJetFan,
  kTunnelLight,
};

inline constexpr std::array<FacilityKind, 4> kLandmarkKinds = {
    FacilityKind::kFireExtinguisherLamp, FacilityKind::kExitLight, FacilityKind::kExitSign,
    FacilityKind::kLcs};

enum class WallSide : std::uint8_t { kLeftWall, kRightWall, kCeiling };

/// Kinds that go into the point landmark map. Jet fans and tunnel lights are clutter only.
constexpr bool is_landmark_kind(FacilityKind k) {
  return k == FacilityKind::kFireExtinguisherLamp || k == FacilityKind::kExitLight ||
         k == FacilityKind::kExitSign || k == FacilityKind::kLcs;
}

constexpr std::string_view to_string(FacilityKind k) {
  switch (k) {
    case FacilityKind::kFireExtinguisherLamp: return "Lamp";
    case FacilityKind::kExitLight: return "ExitLight";
    case FacilityKind::kExitSign: return "ExitSign";
    case FacilityKind::kLcs: return "LCS";
    case FacilityKind::kJetFan: return "JetFan";
    case FacilityKind::kTunnelLight: return "TunnelLight";
  }
  return "?";
}

inline std::optional<FacilityKind> parse_facility_kind(std::string_view s) {
  for (auto k : {FacilityKind::kFireExtinguisherLamp, FacilityKind::kExitLight,
                 FacilityKind::kExitSign, FacilityKind::kLcs, FacilityKind::kJetFan,
                 FacilityKind::kTunnelLight}) {
    if (s == to_string(k)) return k;
  }
  if (s == "FireExtinguisherLamp") return FacilityKind::kFireExtinguisherLamp;
  return std::nullopt;
}

/// Where each kind is installed.
constexpr WallSide installed_side(FacilityKind k) {
  switch (k) {
    case FacilityKind::kFireExtinguisherLamp: return WallSide::kRightWall;
    case FacilityKind::kExitLight: return WallSide::kLeftWall;
    default: return WallSide::kCeiling;
  }
}

/// Facility body size in millimeters. For wall-mounted kinds w is the lateral extent, l the
/// along-track extent; for ceiling kinds w is lateral, l along-track (they face traffic).
struct SizeMm {
  double w = 0.0;
  double l = 0.0;
  double h = 0.0;
};

struct FacilityRule {
  FacilityKind kind = FacilityKind::kFireExtinguisherLamp;
  double interval = 50.0;  // m
  double height = 2.75;    // m, center of the install height range
  SizeMm size;
  WallSide wall_side = WallSide::kRightWall;
  double start = 0.0;       // m, arc length of the first instance
  double lateral = 0.0;     // m, ceiling kinds other than LCS: lateral center (right +)
  double protrusion = 0.0;  // m, wall kinds: how far the body stands off the wall surface
};

struct TunnelSpec {
  double a = 7.0;  // ellipse half-width
  double b = 6.8;  // ellipse height
  double length = 1500.0;
  int lane_count = 3;
  double lane_width = 3.6;
  Pose2D entry_pose{0.0, 0.0, 0.0};
  std::vector<FacilityRule> facility_layout;
  /// Axis shape over [0, length]. Empty means straight.
  std::vector<CenterlineSection> sections;

  Centerline centerline() const {
    if (sections.empty()) return {entry_pose, {{length, 0.0}}};
    return {entry_pose, sections};
  }

  /// Lateral position of lane `lane` (1 = leftmost) center, right positive.
  double lane_center(int lane) const {
    return -lane_count * lane_width / 2.0 + (lane - 0.5) * lane_width;
  }
  /// Lateral positions of the lane_count + 1 solid lane lines.
  std::vector<double> lane_lines() const {
    std::vector<double> out;
    for (int k = 0; k <= lane_count; ++k) out.push_back(-lane_count * lane_width / 2.0 + k * lane_width);
    return out;
  }
  /// Lateral position of the wall surface at height z (positive value).
  double wall_half_width(double z) const {
    const double r = std::clamp(z / b, -1.0, 1.0);
    return a * std::sqrt(1.0 - r * r);
  }
};

inline const FacilityRule* find_rule(const TunnelSpec& spec, FacilityKind k) {
  for (const auto& r : spec.facility_layout)
    if (r.kind == k) return &r;
  return nullptr;
}

inline void validate(const TunnelSpec& spec) {
  if (!(spec.a > 0.0) || !(spec.b > 0.0)) throw InvalidArgument("TunnelSpec: a, b must be > 0");
  if (spec.lane_count < 1 || !(spec.lane_width > 0.0))
    throw InvalidArgument("TunnelSpec: lane_count >= 1 and lane_width > 0 required");
  if (!(spec.a > spec.lane_count * spec.lane_width / 2.0))
    throw InvalidArgument("TunnelSpec: lanes do not fit between the walls");
  if (!(spec.b > 4.5)) throw InvalidArgument("TunnelSpec: b must exceed 4.5 m");
  if (!(spec.length > 0.0)) throw InvalidArgument("TunnelSpec: length must be > 0");
  if (!spec.sections.empty()) {
    double total = 0.0;
    for (const auto& s : spec.sections) total += s.length;
    if (std::abs(total - spec.length) > 1e-6)
      throw InvalidArgument("TunnelSpec: section lengths must sum to length");
  }
  for (const auto& r : spec.facility_layout) {
    if (!(r.interval > 0.0)) throw InvalidArgument("FacilityRule: interval must be > 0");
    if (!(r.size.w > 0.0 && r.size.l > 0.0 && r.size.h > 0.0))
      throw InvalidArgument("FacilityRule: size components must be > 0");
    if (r.wall_side != installed_side(r.kind))
      throw InvalidArgument("FacilityRule: wall side inconsistent with facility kind " +
                            std::string(to_string(r.kind)));
  }
}

/// Korean highway tunnel layout; intervals, heights and sizes follow the facility standard.
inline std::vector<FacilityRule> default_facility_layout() {
  using K = FacilityKind;
  using W = WallSide;
  return {
      {K::kFireExtinguisherLamp, 50.0, 2.75, {200, 220, 420}, W::kRightWall, 10.0, 0.0, 0.22},
      {K::kExitLight, 50.0, 1.75, {1200, 30, 730}, W::kLeftWall, 35.0, 0.0, 0.25},
      {K::kExitSign, 250.0, 5.25, {1310, 130, 610}, W::kCeiling, 25.0, -1.8, 0.0},
      {K::kLcs, 500.0, 5.25, {800, 250, 800}, W::kCeiling, 150.0, 0.0, 0.0},
      {K::kJetFan, 175.0, 5.5, {1200, 4900, 1200}, W::kCeiling, 200.0, 2.0, 0.0},
      {K::kTunnelLight, 7.5, 6.25, {1400, 400, 150}, W::kCeiling, 3.75, 0.0, 0.0},
  };
}

inline TunnelSpec default_tunnel_spec() {
  TunnelSpec spec;
  spec.entry_pose = Pose2D(0.0, 0.0, 0.35);
  spec.facility_layout = default_facility_layout();
  return spec;
}

/// One physical object placed in the tunnel: a box in the arc-length frame.
struct PlacedFacility {
  FacilityKind kind = FacilityKind::kFireExtinguisherLamp;
  double s = 0.0;        // along-track center
  double d = 0.0;        // lateral center of the box (right +)
  double z = 0.0;        // height of center
  Vec3 extent = Vec3::Zero();  // full extents: lateral, along, height
  Vec2 center_xy = Vec2::Zero();  // landmark point (center of the exposed body)
  double heading = 0.0;         // tunnel heading at s
  double box_d = 0.0;           // lateral center of the rendered box (may be recessed into the wall)
  double box_lateral = 0.0;     // lateral extent of the rendered box
  int row = 0;                  // instance index along the tunnel
};

struct Placement {
  std::vector<PlacedFacility> objects;

  std::size_t count(FacilityKind k) const {
    return static_cast<std::size_t>(
        std::count_if(objects.begin(), objects.end(), [k](const auto& o) { return o.kind == k; }));
  }
};

/// Lays out every facility rule along the tunnel. Positions get uniform along-track jitter of at
/// most `jitter` meters, deterministic in `seed`.
inline Placement place_facilities(const TunnelSpec& spec, std::uint64_t seed, double jitter = 0.5) {
  validate(spec);
  const Centerline axis = spec.centerline();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-jitter, jitter);
  constexpr double kEmbed = 0.10;

  Placement out;
  for (const auto& rule : spec.facility_layout) {
    const Vec3 size_m(rule.size.w / 1000.0, rule.size.l / 1000.0, rule.size.h / 1000.0);
    int row = 0;
    for (double s_nom = rule.start; s_nom < spec.length; s_nom += rule.interval, ++row) {
      const double s = std::clamp(s_nom + jit(rng), 0.0, spec.length);
      const Pose2D a = axis.pose_at(s);
      auto add = [&](double d_center, double box_d, double box_lat) {
        PlacedFacility f;
        f.kind = rule.kind;
        f.s = s;
        f.d = d_center;
        f.z = rule.height;
        f.extent = size_m;
        f.center_xy = axis.point_at({s, d_center});
        f.heading = a.psi();
        f.box_d = box_d;
        f.box_lateral = box_lat;
        f.row = row;
        out.objects.push_back(f);
      };
      switch (rule.wall_side) {
        case WallSide::kRightWall:
        case WallSide::kLeftWall: {
          const double side = rule.wall_side == WallSide::kRightWall ? 1.0 : -1.0;
          const double wall = spec.wall_half_width(rule.height);
          const double exposed = std::min(rule.protrusion > 0.0 ? rule.protrusion : size_m.x(), size_m.x());
          const double inner = wall - exposed;
          add(side * (inner + exposed / 2.0), side * (inner + (exposed + kEmbed) / 2.0), exposed + kEmbed);
          break;
        }
        case WallSide::kCeiling:
          if (rule.kind == FacilityKind::kLcs) {
            for (int lane = 1; lane <= spec.lane_count; ++lane) {
              const double d = spec.lane_center(lane);
              add(d, d, size_m.x());
            }
          } else {
            add(rule.lateral, rule.lateral, size_m.x());
          }
          break;
      }
    }
  }
  return out;
}

struct Landmark {
  FacilityKind kind = FacilityKind::kFireExtinguisherLamp;
  Vec2 position = Vec2::Zero();
  double height = 0.0;
};

struct LandmarkMap {
  std::vector<Landmark> landmarks;
};

/// Lane-marking segment as a 2-D Gaussian.
struct LaneGaussian {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
};

struct LaneDistMap {
  std::vector<LaneGaussian> gaussians;
};

struct Maps {
  LandmarkMap landmarks;
  LaneDistMap lanes;
};

inline constexpr double kPaintHalfWidth = 0.075;

/// Gaussian of a set of collinear-ish samples: mean, scatter along the principal axis, fixed minor
/// sigma across it.
inline LaneGaussian fit_lane_gaussian(const std::vector<Vec2>& pts, double minor_sigma = kPaintHalfWidth) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat2 scatter = Mat2::Zero();
  for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
  scatter /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat2> es(scatter);
  const Vec2 major = es.eigenvectors().col(1);
  const Vec2 minor(-major.y(), major.x());
  const double major_var = std::max(es.eigenvalues()(1), minor_sigma * minor_sigma);
  LaneGaussian g;
  g.mean = mean;
  g.cov = major_var * major * major.transpose() + minor_sigma * minor_sigma * minor * minor.transpose();
  return g;
}

/// Builds the point landmark map (usable facility centers) and the lane-marking Gaussian map.
inline Maps build_maps(const TunnelSpec& spec, const Placement& placement, double segment_len = 5.0) {
  if (placement.objects.empty()) throw InvalidArgument("build_maps: empty placement");
  if (!(segment_len >= 1.0 && segment_len <= 10.0))
    throw InvalidArgument("build_maps: segment_len must be in [1, 10] m");
  Maps maps;
  for (const auto& o : placement.objects) {
    if (is_landmark_kind(o.kind)) maps.landmarks.landmarks.push_back({o.kind, o.center_xy, o.z});
  }
  const Centerline axis = spec.centerline();
  const int n_seg = static_cast<int>(std::floor(spec.length / segment_len + 1e-9));
  constexpr int kSamples = 50;
  for (double d : spec.lane_lines()) {
    for (int k = 0; k < n_seg; ++k) {
      std::vector<Vec2> pts;
      pts.reserve(kSamples);
      for (int i = 0; i < kSamples; ++i) {
        const double s = (k + (i + 0.5) / kSamples) * segment_len;
        pts.push_back(axis.point_at({s, d}));
      }
      maps.lanes.gaussians.push_back(fit_lane_gaussian(pts));
    }
  }
  return maps;
}

/// Points of one tunnel cross-section (y = 0) on the ellipse x^2/a^2 + z^2/b^2 = 1, z >= 0.
inline std::vector<Point3> ellipse_ring(const TunnelSpec& spec, double angular_res_deg) {
  if (!(spec.a > 0.0) || !(spec.b > 0.0)) throw InvalidArgument("ellipse_ring: a, b must be > 0");
  if (!(angular_res_deg > 0.0 && angular_res_deg <= 45.0))
    throw InvalidArgument("ellipse_ring: angular resolution must be in (0, 45] deg");
  const double a = spec.a;
  const double b = spec.b;
  std::vector<Point3> ring;
  for (int i = 0;; ++i) {
    const double theta = i * angular_res_deg;
    if (theta >= 90.0 - 1e-9) break;
    const double t = std::tan(theta * kDegToRad);
    const double x = a * b / std::sqrt(b * b + a * a * t * t);
    const double r = x / a;
    const double z = b * std::sqrt(std::max(0.0, 1.0 - r * r));
    ring.push_back(make_point(x, 0.0, z));
    ring.push_back(make_point(-x, 0.0, z));
  }
  ring.push_back(make_point(0.0, 0.0, b));
  return ring;
}

/// Elliptical cylinder: rings placed every `ring_spacing` meters along y, centered on y = 0.
inline std::vector<Point3> virtual_cylinder(const TunnelSpec& spec, double angular_res_deg,
                                            double ring_spacing, double span) {
  if (!(ring_spacing > 0.0) || !(span > 0.0))
    throw InvalidArgument("virtual_cylinder: ring_spacing and span must be > 0");
  const auto ring = ellipse_ring(spec, angular_res_deg);
  const int n = static_cast<int>(std::floor(span / ring_spacing + 1e-9)) + 1;
  std::vector<Point3> out;
  out.reserve(ring.size() * n);
  for (int k = 0; k < n; ++k) {
    const double y = -(n - 1) * ring_spacing / 2.0 + k * ring_spacing;
    for (auto p : ring) {
      p.y = y;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_TUNNEL_TUNNEL_MODEL_HPP
