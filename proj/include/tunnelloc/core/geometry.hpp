#ifndef TUNNELLOC_CORE_GEOMETRY_HPP
#define TUNNELLOC_CORE_GEOMETRY_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace tunnelloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Thrown when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle into (-pi, pi]. The result differs from `a` by a multiple of 2*pi.
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

/// Standard counter-clockwise rotation of a planar vector.
inline Vec2 rotate2(const Vec2& v, double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

inline Mat2 rotation2(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// Planar vehicle pose in the local plane. Heading is CCW from +x (east).
class Pose2D {
 public:
  double x = 0.0;
  double y = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double psi_) : x(x_), y(y_), psi_(wrap_angle(psi_)) {}

  double psi() const { return psi_; }
  void set_psi(double p) { psi_ = wrap_angle(p); }

  Vec2 position() const { return {x, y}; }
  Vec2 forward() const { return {std::cos(psi_), std::sin(psi_)}; }
  /// Unit vector pointing to the vehicle's right.
  Vec2 right() const { return {std::sin(psi_), -std::cos(psi_)}; }

  /// Vehicle-frame [lateral (right +), longitudinal (forward +)] to local plane.
  Vec2 to_global(const Vec2& vehicle) const {
    return position() + vehicle.x() * right() + vehicle.y() * forward();
  }
  /// Local-plane point to vehicle-frame [lateral, longitudinal].
  Vec2 to_vehicle(const Vec2& global) const {
    const Vec2 d = global - position();
    return {d.dot(right()), d.dot(forward())};
  }

  friend bool operator==(const Pose2D& a, const Pose2D& b) {
    return a.x == b.x && a.y == b.y && a.psi_ == b.psi_;
  }

 private:
  double psi_ = 0.0;
};

/// Rotation taking vehicle-frame [lateral, longitudinal] vectors into the local plane.
/// The lateral axis points right, so this is a CCW rotation by psi - pi/2.
inline Mat2 vehicle_to_global_rotation(double psi) { return rotation2(psi - kPi / 2.0); }

/// One LIDAR return in the vehicle frame: x right, y forward, z up from the road surface.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  Vec3 xyz() const { return {x, y, z}; }
  Vec2 xy() const { return {x, y}; }

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 make_point(double x, double y, double z, double intensity = 0.0) {
  return {x, y, z, intensity};
}

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         std::isfinite(p.intensity);
}

inline constexpr double kEarthRadius = 6378137.0;

/// Origin of the equirectangular local plane.
struct GeoOrigin {
  double lat0 = 0.0;
  double lon0 = 0.0;

  GeoOrigin() = default;
  GeoOrigin(double lat, double lon) : lat0(lat), lon0(lon) {
    if (!(std::abs(lat) < 90.0)) throw InvalidArgument("GeoOrigin: |lat0| must be < 90");
  }
};

/// Small-area equirectangular projection: returns [east, north] meters.
inline Vec2 geo_to_local(double lat, double lon, const GeoOrigin& origin) {
  if (!(std::abs(lat) < 90.0)) throw InvalidArgument("geo_to_local: |lat| must be < 90");
  const double k = kEarthRadius * kDegToRad;
  return {(lon - origin.lon0) * std::cos(origin.lat0 * kDegToRad) * k, (lat - origin.lat0) * k};
}

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline LatLon local_to_geo(const Vec2& p, const GeoOrigin& origin) {
  const double k = kEarthRadius * kDegToRad;
  return {origin.lat0 + p.y() / k, origin.lon0 + p.x() / (k * std::cos(origin.lat0 * kDegToRad))};
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_CORE_GEOMETRY_HPP
