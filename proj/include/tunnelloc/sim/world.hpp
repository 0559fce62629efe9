#ifndef TUNNELLOC_SIM_WORLD_HPP
#define TUNNELLOC_SIM_WORLD_HPP

#include <cmath>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/tunnel/centerline.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

enum class SurfaceKind : std::uint8_t { kNone, kWall, kAsphalt, kPaint, kFacility, kOccluder };

/// Box with a vertical axis, yawed to `heading`. Half extents: lateral, along, vertical.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  double heading = 0.0;
  Vec3 half = Vec3::Zero();
  SurfaceKind surface = SurfaceKind::kFacility;

  /// Entry distance of the ray, or +inf when the ray misses.
  double intersect(const Vec3& o, const Vec3& d) const {
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    const Vec3 rel = o - center;
    // box axes: along = (c, s), lateral (right) = (s, -c)
    const double ol = rel.x() * s - rel.y() * c;
    const double oa = rel.x() * c + rel.y() * s;
    const double dl = d.x() * s - d.y() * c;
    const double da = d.x() * c + d.y() * s;
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
    auto slab = [&](double org, double dir, double h) {
      if (std::abs(dir) < 1e-15) return std::abs(org) <= h;
      double t1 = (-h - org) / dir;
      double t2 = (h - org) / dir;
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      return tmin <= tmax;
    };
    if (!slab(ol, dl, half.x()) || !slab(oa, da, half.y()) || !slab(rel.z(), d.z(), half.z()))
      return std::numeric_limits<double>::infinity();
    return tmin > 0.0 ? tmin : std::numeric_limits<double>::infinity();
  }

  std::array<Vec2, 4> footprint() const {
    const Vec2 along(std::cos(heading), std::sin(heading));
    const Vec2 right(std::sin(heading), -std::cos(heading));
    const Vec2 c = center.head<2>();
    return {c + half.y() * along + half.x() * right, c + half.y() * along - half.x() * right,
            c - half.y() * along - half.x() * right, c - half.y() * along + half.x() * right};
  }
};

/// Vehicles in the other lanes, moving at the ego speed plus a per-vehicle offset.
struct OccluderModel {
  double density = 0.6;  // vehicles per 100 m of each non-ego lane
  double length = 4.5;
  double width = 1.8;
  double height = 1.5;
  double relative_speed_kmh = 10.0;  // uniform in [-x, +x]
};

struct Occluder {
  int lane = 1;
  double s0 = 0.0;
  double speed = 0.0;
};

/// Static and dynamic geometry the LIDAR sees. Built once per scenario.
class World {
 public:
  World(const TunnelSpec& spec, const Placement& placement, double approach = 600.0,
        double runout = 600.0)
      : spec_(spec), axis_(spec.centerline()), chunks_(axis_.chunks(approach, runout)),
        lines_(spec.lane_lines()) {
    for (const auto& f : placement.objects) {
      OrientedBox box;
      const Vec2 c = axis_.point_at({f.s, f.box_d});
      box.center = Vec3(c.x(), c.y(), f.z);
      box.heading = f.heading;
      box.half = Vec3(f.box_lateral, f.extent.y(), f.extent.z()) / 2.0;
      box.surface = SurfaceKind::kFacility;
      static_boxes_.push_back(box);
    }
    road_begin_ = -approach;
    road_end_ = spec.length + runout;
  }

  const TunnelSpec& spec() const { return spec_; }
  const Centerline& axis() const { return axis_; }
  const std::vector<AxisChunk>& chunks() const { return chunks_; }
  const std::vector<OrientedBox>& static_boxes() const { return static_boxes_; }
  const std::vector<Occluder>& occluders() const { return occluders_; }

  void set_occluders(std::vector<Occluder> occ, const OccluderModel& model) {
    occluders_ = std::move(occ);
    occluder_model_ = model;
  }

  std::vector<OrientedBox> occluder_boxes(double t) const {
    std::vector<OrientedBox> out;
    out.reserve(occluders_.size());
    for (const auto& o : occluders_) {
      const double s = o.s0 + o.speed * t;
      const Pose2D a = axis_.pose_at(s);
      const Vec2 c = axis_.point_at({s, spec_.lane_center(o.lane)});
      OrientedBox b;
      b.center = Vec3(c.x(), c.y(), occluder_model_.height / 2.0);
      b.heading = a.psi();
      b.half = Vec3(occluder_model_.width, occluder_model_.length, occluder_model_.height) / 2.0;
      b.surface = SurfaceKind::kOccluder;
      out.push_back(b);
    }
    return out;
  }

  std::size_t chunk_index(double s) const {
    std::size_t lo = 0;
    for (std::size_t i = 0; i < chunks_.size(); ++i)
      if (chunks_[i].s0 <= s) lo = i;
    return lo;
  }

  /// Arc-length coordinates of a ground point, walking chunks from `hint`.
  TrackCoord locate(const Vec2& q, std::size_t hint) const {
    std::size_t i = hint;
    for (std::size_t guard = 0; guard < chunks_.size(); ++guard) {
      const auto& c = chunks_[i];
      const Vec2 rel = q - c.origin;
      const double u = rel.dot(c.dir());
      if (u < 0.0 && i > 0) {
        --i;
        continue;
      }
      if (u > c.length && i + 1 < chunks_.size()) {
        ++i;
        continue;
      }
      return {c.s0 + u * c.arc_per_chord, rel.dot(c.right())};
    }
    return axis_.project(q);
  }

  bool on_paint(const TrackCoord& tc) const {
    if (tc.s < road_begin_ || tc.s > road_end_) return false;
    for (double l : lines_)
      if (std::abs(tc.d - l) <= kPaintHalfWidth) return true;
    return false;
  }

  /// First intersection of a ray with the tunnel wall, walking the axis chunks.
  double wall_hit(const Vec3& o, const Vec3& d, std::size_t start_chunk, double t_max) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const double ia2 = 1.0 / (spec_.a * spec_.a);
    const double ib2 = 1.0 / (spec_.b * spec_.b);
    std::size_t i = start_chunk;
    double t_enter = 0.0;
    for (std::size_t guard = 0; guard < chunks_.size(); ++guard) {
      const auto& c = chunks_[i];
      const Vec2 rel = o.head<2>() - c.origin;
      const Vec2 dir = c.dir();
      const Vec2 right = c.right();
      const double u0 = rel.dot(dir);
      const double d0 = rel.dot(right);
      const double du = d.head<2>().dot(dir);
      const double dd = d.head<2>().dot(right);
      // leaving this chunk's along-track extent
      double t_leave = kInf;
      if (du > 1e-12) t_leave = (c.length - u0) / du;
      else if (du < -1e-12) t_leave = -u0 / du;
      // exit from the elliptical cylinder
      const double qa = dd * dd * ia2 + d.z() * d.z() * ib2;
      const double qb = 2.0 * (d0 * dd * ia2 + o.z() * d.z() * ib2);
      const double qc = d0 * d0 * ia2 + o.z() * o.z() * ib2 - 1.0;
      double t_exit = kInf;
      if (qa > 1e-15) {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) t_exit = (-qb + std::sqrt(disc)) / (2.0 * qa);
      }
      if (t_exit < t_enter) return kInf;  // already outside the cross-section
      if (t_exit <= t_leave) return c.walled ? t_exit : kInf;
      if (t_leave > t_max) return kInf;
      if (du > 0.0) {
        if (i + 1 >= chunks_.size()) return kInf;
        ++i;
      } else {
        if (i == 0) return kInf;
        --i;
      }
      t_enter = t_leave;
    }
    return kInf;
  }

 private:
  TunnelSpec spec_;
  Centerline axis_;
  std::vector<AxisChunk> chunks_;
  std::vector<double> lines_;
  std::vector<OrientedBox> static_boxes_;
  std::vector<Occluder> occluders_;
  OccluderModel occluder_model_;
  double road_begin_ = 0.0;
  double road_end_ = 0.0;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_SIM_WORLD_HPP
