#ifndef TUNNELLOC_TUNNEL_CENTERLINE_HPP
#define TUNNELLOC_TUNNEL_CENTERLINE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tunnelloc/core/geometry.hpp"

namespace tunnelloc {

/// Constant-curvature piece of the tunnel axis. Positive curvature turns left.
struct CenterlineSection {
  double length = 0.0;
  double curvature = 0.0;
};

/// Arc-length frame coordinates: s along the axis, d lateral (right +).
struct TrackCoord {
  double s = 0.0;
  double d = 0.0;
};

/// Straight piece of the axis used for ray casting. Arcs are split into short chords.
struct AxisChunk {
  double s0 = 0.0;
  double length = 0.0;
  double arc_per_chord = 1.0;
  Vec2 origin = Vec2::Zero();
  double heading = 0.0;
  bool walled = false;

  Vec2 dir() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 right() const { return {std::sin(heading), -std::cos(heading)}; }
};

/// Tunnel axis: straight approach before s = 0, the sections over [0, length], straight run-out after.
class Centerline {
 public:
  Centerline() = default;
  Centerline(const Pose2D& entry, std::vector<CenterlineSection> sections)
      : entry_(entry), sections_(std::move(sections)) {
    Vec2 p = entry_.position();
    double h = entry_.psi();
    double s = 0.0;
    for (const auto& sec : sections_) {
      if (!(sec.length > 0.0)) throw InvalidArgument("Centerline: section length must be > 0");
      starts_.push_back({s, p, h});
      advance(p, h, sec.length, sec.curvature);
      s += sec.length;
    }
    length_ = s;
    end_pos_ = p;
    end_heading_ = h;
  }

  double length() const { return length_; }
  const std::vector<CenterlineSection>& sections() const { return sections_; }

  double curvature_at(double s) const {
    if (s < 0.0 || s > length_) return 0.0;
    return sections_[section_index(s)].curvature;
  }

  /// Axis point and heading at arc length s (s may lie outside [0, length]).
  Pose2D pose_at(double s) const {
    if (s <= 0.0 || sections_.empty()) {
      const Vec2 p = entry_.position() + s * dir(entry_.psi());
      return {p.x(), p.y(), entry_.psi()};
    }
    if (s >= length_) {
      const Vec2 p = end_pos_ + (s - length_) * dir(end_heading_);
      return {p.x(), p.y(), end_heading_};
    }
    const std::size_t i = section_index(s);
    Vec2 p = starts_[i].pos;
    double h = starts_[i].heading;
    advance(p, h, s - starts_[i].s, sections_[i].curvature);
    return {p.x(), p.y(), h};
  }

  Vec2 point_at(const TrackCoord& c) const {
    const Pose2D a = pose_at(c.s);
    return a.position() + c.d * a.right();
  }

  /// Nearest-axis projection of a local-plane point.
  TrackCoord project(const Vec2& q) const {
    double best_s = 0.0;
    double best_dist = std::numeric_limits<double>::infinity();
    auto consider = [&](double s) {
      const double dist = (q - pose_at(s).position()).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best_s = s;
      }
    };
    consider(std::min(0.0, (q - entry_.position()).dot(dir(entry_.psi()))));
    consider(length_ + std::max(0.0, (q - end_pos_).dot(dir(end_heading_))));
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      const auto& st = starts_[i];
      const auto& sec = sections_[i];
      double u = 0.0;
      if (sec.curvature == 0.0) {
        u = (q - st.pos).dot(dir(st.heading));
      } else {
        const Vec2 c = st.pos + (1.0 / sec.curvature) * left(st.heading);
        const double phi0 = std::atan2(st.pos.y() - c.y(), st.pos.x() - c.x());
        const double phiq = std::atan2(q.y() - c.y(), q.x() - c.x());
        u = wrap_angle(phiq - phi0) / sec.curvature;
      }
      consider(st.s + std::clamp(u, 0.0, sec.length));
    }
    const Pose2D a = pose_at(best_s);
    return {best_s, (q - a.position()).dot(a.right())};
  }

  /// Straight chunks covering [-approach, length + runout]; arcs split every `arc_chunk` meters.
  std::vector<AxisChunk> chunks(double approach, double runout, double arc_chunk = 5.0) const {
    std::vector<AxisChunk> out;
    const Pose2D a0 = pose_at(-approach);
    out.push_back({-approach, approach, 1.0, a0.position(), a0.psi(), false});
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      const auto& st = starts_[i];
      const auto& sec = sections_[i];
      if (sec.curvature == 0.0) {
        out.push_back({st.s, sec.length, 1.0, st.pos, st.heading, true});
        continue;
      }
      const int n = std::max(1, static_cast<int>(std::ceil(sec.length / arc_chunk)));
      for (int k = 0; k < n; ++k) {
        const double sa = st.s + sec.length * k / n;
        const double sb = st.s + sec.length * (k + 1) / n;
        const Vec2 pa = pose_at(sa).position();
        const Vec2 pb = pose_at(sb).position();
        const Vec2 chord = pb - pa;
        out.push_back({sa, chord.norm(), (sb - sa) / chord.norm(), pa,
                       std::atan2(chord.y(), chord.x()), true});
      }
    }
    out.push_back({length_, runout, 1.0, end_pos_, end_heading_, false});
    return out;
  }

 private:
  struct SectionStart {
    double s;
    Vec2 pos;
    double heading;
  };

  static Vec2 dir(double h) { return {std::cos(h), std::sin(h)}; }
  static Vec2 left(double h) { return {-std::sin(h), std::cos(h)}; }

  static void advance(Vec2& p, double& h, double u, double k) {
    if (k == 0.0) {
      p += u * dir(h);
      return;
    }
    const double h1 = h + k * u;
    p += Vec2(std::sin(h1) - std::sin(h), -(std::cos(h1) - std::cos(h))) / k;
    h = h1;
  }

  std::size_t section_index(double s) const {
    std::size_t i = 0;
    while (i + 1 < starts_.size() && starts_[i + 1].s <= s) ++i;
    return i;
  }

  Pose2D entry_;
  std::vector<CenterlineSection> sections_;
  std::vector<SectionStart> starts_;
  double length_ = 0.0;
  Vec2 end_pos_ = Vec2::Zero();
  double end_heading_ = 0.0;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_TUNNEL_CENTERLINE_HPP
