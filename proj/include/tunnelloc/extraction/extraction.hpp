#ifndef TUNNELLOC_EXTRACTION_EXTRACTION_HPP
#define TUNNELLOC_EXTRACTION_EXTRACTION_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "tunnelloc/core/expected.hpp"
#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/registration/icp.hpp"
#include "tunnelloc/registration/kdtree.hpp"
#include "tunnelloc/sim/scan_sim.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

struct WallFilter {
  double a = 7.0;
  double b = 6.8;
  double w_m = 0.15;

  WallFilter() = default;
  WallFilter(double a_, double b_, double wm) : a(a_), b(b_), w_m(wm) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("WallFilter: a, b must be > 0");
    if (!(w_m > 0.0 && w_m < std::min(a, b))) throw InvalidArgument("WallFilter: need 0 < w_m < min(a, b)");
  }
  static WallFilter for_spec(const TunnelSpec& spec, double wm = 0.15) { return {spec.a, spec.b, wm}; }

  double value(double x, double z) const { return x * x / (a * a) + z * z / (b * b); }

  /// Ellipse value of the shrunken ellipse point in the direction of (x, z).
  double threshold(double x, double z) const {
    const double at = a - w_m;
    const double bt = b - w_m;
    const double rho = std::hypot(x, z);
    const double c = rho > 0.0 ? x / rho : 1.0;
    const double s = rho > 0.0 ? z / rho : 0.0;
    const double r = at * bt / std::sqrt(bt * bt * c * c + at * at * s * s);
    return value(r * c, r * s);
  }
  bool keeps(double x, double z) const { return value(x, z) < threshold(x, z); }
};

struct FacilityDetection {
  FacilityKind kind = FacilityKind::kFireExtinguisherLamp;
  Point3 center;                     // vehicle frame
  Vec3 center_tunnel = Vec3::Zero(); // aligned tunnel frame
  int point_count = 0;
  Vec3 bbox = Vec3::Zero();  // lateral, along, height extents (m)
  Vec3 bbox_lo = Vec3::Zero();  // tunnel frame
  Vec3 bbox_hi = Vec3::Zero();
  Vec3 face_lo = Vec3::Zero();  // noise-averaged outer faces, tunnel frame
  Vec3 face_hi = Vec3::Zero();
  bool truncated = false;  // cut by the edge of the vertical field of view
  /// Body center estimated from the visible faces and the nominal size (vehicle frame).
  Point3 center_completed;
};

/// Keeps points whose ellipse value lies within `band` meters of the wall surface.
inline Scan sample_near_wall(const Scan& scan, const WallFilter& filter, double band = 0.5,
                             std::size_t min_points = 50) {
  if (!(band > 0.0)) throw InvalidArgument("sample_near_wall: band must be > 0");
  const double m = std::min(filter.a, filter.b);
  const double lo = std::pow(std::max(0.0, 1.0 - band / m), 2);
  const double hi = std::pow(1.0 + band / m, 2);
  Scan out;
  out.t = scan.t;
  for (const auto& p : scan.points) {
    const double w = filter.value(p.x, p.z);
    if (w >= lo && w <= hi) out.points.push_back(p);
  }
  if (out.points.size() < min_points) out.points.clear();
  return out;
}

inline Scan remove_wall(const Scan& scan, const WallFilter& filter) {
  Scan out;
  out.t = scan.t;
  for (const auto& p : scan.points)
    if (filter.keeps(p.x, p.z)) out.points.push_back(p);
  return out;
}

/// Vehicle-to-tunnel transform: p_t = R(yaw) (p + (offset, 0)) + (dx, 0), then unbending.
struct Alignment {
  double coarse_offset = 0.0;
  RigidCorrection icp;
  double curvature = 0.0;
  double rms_before = 0.0;
  double rms_after = 0.0;

  /// Vehicle lateral position right of the tunnel axis.
  double lateral_offset() const {
    // tunnel origin in vehicle frame is where p_t = 0
    const Vec2 o = rotate2(Vec2(-icp.dx, -icp.dy), -icp.dpsi) - Vec2(coarse_offset, 0.0);
    return -o.x();
  }
  /// Vehicle heading minus tunnel heading (CCW +).
  double yaw() const { return icp.dpsi; }

  Vec3 apply(const Point3& p) const {
    Vec3 q = icp.apply(Vec3(p.x + coarse_offset, p.y, p.z));
    q.x() += curvature * q.y() * q.y() / 2.0;
    return q;
  }
  Vec3 invert(Vec3 q) const {
    q.x() -= curvature * q.y() * q.y() / 2.0;
    const Vec2 v = rotate2(q.head<2>() - Vec2(icp.dx, icp.dy), -icp.dpsi);
    return {v.x() - coarse_offset, v.y(), q.z()};
  }
};

struct AlignConfig {
  double band = 0.5;
  double min_z = 0.5;
  double max_abs_y = 25.0;
  std::size_t max_source = 600;
  int resample_rounds = 2;
  IcpConfig icp{2, 30, 1e-4, 1.0, 0.3};
};

/// Virtual elliptical cylinder indexed for ICP; build once per tunnel.
struct CylinderTarget {
  KdTree<3> tree;
  CylinderTarget() = default;
  explicit CylinderTarget(const TunnelSpec& spec, double res_deg = 1.0, double spacing = 0.5,
                          double span = 60.0) {
    std::vector<Vec3> pts;
    for (const auto& p : virtual_cylinder(spec, res_deg, spacing, span)) pts.push_back(p.xyz());
    tree = KdTree<3>(std::move(pts));
  }
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = static_cast<std::size_t>(std::floor(q * (v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

}  // namespace detail

/// Coarse lateral offset (vehicle right of axis) from side-wall returns above vehicle roofs.
inline Expected<double> coarse_wall_offset(const Scan& scan, const TunnelSpec& spec) {
  std::vector<double> est;
  int left = 0;
  int right = 0;
  for (const auto& p : scan.points) {
    if (p.z < 1.6 || p.z > 2.5 || std::abs(p.y) > 8.0) continue;
    const double w = spec.wall_half_width(p.z);
    if (p.x > 0.0) {
      est.push_back(w - p.x);
      ++right;
    } else {
      est.push_back(-w - p.x);
      ++left;
    }
  }
  if (left < 10 || right < 10) return make_error(ErrorCode::kWallNotVisible, "side wall not visible");
  return detail::median(std::move(est));
}

/// Lateral-shift + azimuth alignment of the scan to the virtual cylinder.
inline Expected<Alignment> align_to_tunnel(const Scan& scan, const TunnelSpec& spec,
                                           const CylinderTarget& target, const AlignConfig& cfg = {},
                                           double curvature = 0.0) {
  const auto coarse = coarse_wall_offset(scan, spec);
  if (!coarse) return coarse.error();
  Alignment al;
  al.coarse_offset = *coarse;
  const WallFilter filter = WallFilter::for_spec(spec);
  std::vector<Vec3> source;
  auto resample = [&]() {
    std::vector<Vec3> all;
    for (const auto& p : scan.points) {
      if (p.z < cfg.min_z || std::abs(p.y) > cfg.max_abs_y) continue;
      Vec3 q = al.apply(p);
      const double w = filter.value(q.x(), q.z());
      const double m = std::min(filter.a, filter.b);
      if (w >= std::pow(1.0 - cfg.band / m, 2) && w <= std::pow(1.0 + cfg.band / m, 2))
        all.push_back(Vec3(p.x + al.coarse_offset, p.y, p.z));
    }
    source.clear();
    const std::size_t stride = std::max<std::size_t>(1, (all.size() + cfg.max_source - 1) / cfg.max_source);
    for (std::size_t i = 0; i < all.size(); i += stride) source.push_back(all[i]);
  };
  IcpResult best;
  bool have = false;
  for (int round = 0; round < cfg.resample_rounds; ++round) {
    resample();
    if (source.size() < 50) return make_error(ErrorCode::kWallNotVisible, "too few wall points");
    // unbend the source before matching the straight cylinder
    std::vector<Vec3> src = source;
    if (curvature != 0.0)
      for (auto& p : src) p.x() += curvature * p.y() * p.y() / 2.0;
    IcpConfig ic = cfg.icp;
    auto res = icp(src, target.tree, ic);
    if (!res) return res.error();
    if (!have) {
      al.rms_before = res->rms_before;
      have = true;
    }
    best = *res;
    al.icp = best.correction;
  }
  al.curvature = curvature;
  al.rms_after = best.rms_after;
  if (std::abs(al.lateral_offset()) > 2.0 * spec.lane_count * spec.lane_width / 2.0 + 1.0 ||
      std::abs(al.icp.dpsi) > 15.0 * kDegToRad)
    return make_error(ErrorCode::kIcpDiverged, "alignment outside plausible range");
  return al;
}

struct RoiConfig {
  double lamp_lo = 2.3, lamp_hi = 3.2;
  double exit_light_lo = 1.3, exit_light_hi = 2.2;
  double ceiling_lo = 4.8, ceiling_hi = 5.7;
  double lcs_lane_gate = 0.7;
  double exit_sign_side = -1.0;  // corridor side: -1 left, +1 right
  double max_range = 40.0;
};

using RoiBuckets = std::map<FacilityKind, std::vector<int>>;  // indices into the aligned cloud

/// Height/side partition in the aligned tunnel frame. Each point lands in at most one bucket.
inline RoiBuckets classify_roi(const std::vector<Vec3>& pts, const TunnelSpec& spec, const RoiConfig& cfg = {}) {
  RoiBuckets out;
  const double edge = spec.lane_count * spec.lane_width / 2.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    if (std::abs(p.y()) > cfg.max_range) continue;
    const int idx = static_cast<int>(i);
    if (p.z() >= cfg.lamp_lo && p.z() <= cfg.lamp_hi && p.x() > edge) {
      out[FacilityKind::kFireExtinguisherLamp].push_back(idx);
    } else if (p.z() >= cfg.exit_light_lo && p.z() <= cfg.exit_light_hi && p.x() < -edge) {
      out[FacilityKind::kExitLight].push_back(idx);
    } else if (p.z() >= cfg.ceiling_lo && p.z() <= cfg.ceiling_hi) {
      double near = std::numeric_limits<double>::infinity();
      for (int lane = 1; lane <= spec.lane_count; ++lane)
        near = std::min(near, std::abs(p.x() - spec.lane_center(lane)));
      if (near <= cfg.lcs_lane_gate) out[FacilityKind::kLcs].push_back(idx);
      else if (p.x() * cfg.exit_sign_side > 0.0) out[FacilityKind::kExitSign].push_back(idx);
    }
  }
  return out;
}

struct ClusterConfig {
  int min_cluster_size = 4;
  double silhouette_threshold = 0.7;
  std::size_t silhouette_sample = 256;
  double bbox_scale = 1.5;
  double bbox_slack = 0.1;
  int max_kmeans_iter = 50;
  std::uint64_t seed = 7;
  // clusters reaching the edge of the vertical field of view are flagged as truncated
  double mount_height = 1.8;
  double vfov_min_deg = -25.0;
  double vfov_max_deg = 15.0;
  double fov_margin_deg = 0.5;
  double face_band = 0.04;  // points this close to the extreme are averaged into a face
};

namespace detail {

struct KMeans {
  std::vector<Vec3> centers;
  std::vector<int> label;
};

inline KMeans kmeans(const std::vector<Vec3>& pts, int k, std::mt19937_64& rng, int max_iter) {
  KMeans km;
  const std::size_t n = pts.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  km.centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(km.centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - km.centers.back()).squaredNorm());
      total += d2[i];
    }
    if (!(total > 0.0)) break;
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t j = 0;
    for (; j + 1 < n; ++j) {
      r -= d2[j];
      if (r <= 0.0) break;
    }
    km.centers.push_back(pts[j]);
  }
  km.label.assign(n, 0);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < km.centers.size(); ++c) {
        const double d = (pts[i] - km.centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      if (best != km.label[i]) changed = true;
      km.label[i] = best;
    }
    if (!changed) break;
    std::vector<Vec3> sum(km.centers.size(), Vec3::Zero());
    std::vector<int> cnt(km.centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[km.label[i]] += pts[i];
      ++cnt[km.label[i]];
    }
    for (std::size_t c = 0; c < km.centers.size(); ++c)
      if (cnt[c] > 0) km.centers[c] = sum[c] / cnt[c];
  }
  return km;
}

inline double silhouette(const std::vector<Vec3>& pts, const std::vector<int>& label, int k,
                         std::size_t max_n) {
  const std::size_t n = pts.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_n - 1) / max_n);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  double total = 0.0;
  std::vector<double> sum(k);
  std::vector<int> cnt(k);
  for (std::size_t a : idx) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (std::size_t b : idx) {
      if (a == b) continue;
      sum[label[b]] += (pts[a] - pts[b]).norm();
      ++cnt[label[b]];
    }
    const int own = label[a];
    if (cnt[own] == 0) continue;  // singleton: silhouette 0
    const double ai = sum[own] / cnt[own];
    double bi = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && cnt[c] > 0) bi = std::min(bi, sum[c] / cnt[c]);
    if (!std::isfinite(bi)) continue;
    total += (bi - ai) / std::max(ai, bi);
  }
  return total / idx.size();
}

}  // namespace detail

inline Vec3 nominal_size_m(const TunnelSpec& spec, FacilityKind k) {
  if (const FacilityRule* r = find_rule(spec, k)) {
    Vec3 s(r->size.w, r->size.l, r->size.h);
    s /= 1000.0;
    if (r->protrusion > 0.0) s.x() = std::min(s.x(), r->protrusion);
    return s;
  }
  return Vec3::Zero();
}

inline int expected_in_range(const TunnelSpec& spec, FacilityKind k, double range) {
  const FacilityRule* r = find_rule(spec, k);
  if (!r) return 1;
  const int per_row = k == FacilityKind::kLcs ? spec.lane_count : 1;
  return (static_cast<int>(std::floor(2.0 * range / r->interval)) + 1) * per_row;
}

/// k-means per bucket with a silhouette sweep for k, then size gates.
/// `aligned` and `vehicle` are parallel arrays (tunnel frame / vehicle frame).
inline std::vector<FacilityDetection> cluster_facilities(const RoiBuckets& buckets,
                                                         const std::vector<Vec3>& aligned,
                                                         const std::vector<Point3>& vehicle,
                                                         const TunnelSpec& spec,
                                                         const ClusterConfig& cfg = {},
                                                         double range = 40.0) {
  std::vector<FacilityDetection> out;
  std::mt19937_64 rng(cfg.seed);
  for (const auto& [kind, idx] : buckets) {
    if (static_cast<int>(idx.size()) < cfg.min_cluster_size) continue;
    std::vector<Vec3> pts;
    pts.reserve(idx.size());
    for (int i : idx) pts.push_back(aligned[i]);
    const int k_max = std::min(expected_in_range(spec, kind, range) + 1,
                               static_cast<int>(pts.size()) / cfg.min_cluster_size);
    const Vec3 nominal = nominal_size_m(spec, kind);
    // two facilities of one kind cannot overlap: centers closer than one body are a split
    const double min_sep = cfg.bbox_scale * nominal.maxCoeff() + cfg.bbox_slack;
    detail::KMeans best = detail::kmeans(pts, 1, rng, cfg.max_kmeans_iter);
    double best_sil = cfg.silhouette_threshold;
    for (int k = 2; k <= k_max; ++k) {
      auto km = detail::kmeans(pts, k, rng, cfg.max_kmeans_iter);
      if (static_cast<int>(km.centers.size()) < k) break;
      bool separated = true;
      for (int a = 0; a < k && separated; ++a)
        for (int b = a + 1; b < k; ++b)
          if ((km.centers[a] - km.centers[b]).norm() < min_sep) separated = false;
      if (!separated) continue;
      const double s = detail::silhouette(pts, km.label, k, cfg.silhouette_sample);
      if (s > best_sil) {
        best_sil = s;
        best = std::move(km);
      }
    }
    for (std::size_t c = 0; c < best.centers.size(); ++c) {
      Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
      Vec3 hi = -lo;
      Vec3 sum_t = Vec3::Zero();
      Vec3 sum_v = Vec3::Zero();
      int n = 0;
      double el_min = 90.0;
      double el_max = -90.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (best.label[i] != static_cast<int>(c)) continue;
        const Point3& v = vehicle[idx[i]];
        const double el = std::atan2(v.z - cfg.mount_height, std::hypot(v.x, v.y)) * kRadToDeg;
        el_min = std::min(el_min, el);
        el_max = std::max(el_max, el);
        lo = lo.cwiseMin(pts[i]);
        hi = hi.cwiseMax(pts[i]);
        sum_t += pts[i];
        sum_v += vehicle[idx[i]].xyz();
        ++n;
      }
      if (n < cfg.min_cluster_size) continue;
      const Vec3 ext = hi - lo;
      if ((ext.array() > cfg.bbox_scale * nominal.array() + cfg.bbox_slack).any()) continue;
      FacilityDetection d;
      d.kind = kind;
      const Vec3 cv = sum_v / n;
      d.center = make_point(cv.x(), cv.y(), cv.z(), 0.0);
      d.center_tunnel = sum_t / n;
      d.point_count = n;
      d.bbox = ext;
      d.bbox_lo = lo;
      d.bbox_hi = hi;
      // the extreme of noisy ranges overshoots the true face; average the points near it
      Vec3 flo = Vec3::Zero(), fhi = Vec3::Zero();
      Eigen::Vector3i nlo = Eigen::Vector3i::Zero(), nhi = Eigen::Vector3i::Zero();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (best.label[i] != static_cast<int>(c)) continue;
        for (int a = 0; a < 3; ++a) {
          if (pts[i](a) <= lo(a) + cfg.face_band) {
            flo(a) += pts[i](a);
            ++nlo(a);
          }
          if (pts[i](a) >= hi(a) - cfg.face_band) {
            fhi(a) += pts[i](a);
            ++nhi(a);
          }
        }
      }
      d.face_lo = flo.cwiseQuotient(nlo.cast<double>());
      d.face_hi = fhi.cwiseQuotient(nhi.cast<double>());
      d.center_completed = d.center;
      d.truncated = el_max > cfg.vfov_max_deg - cfg.fov_margin_deg ||
                    el_min < cfg.vfov_min_deg + cfg.fov_margin_deg;
      out.push_back(d);
    }
  }
  return out;
}

/// Ground returns brighter than the threshold, thinned to at most `max_points` by uniform stride.
inline Scan extract_lane_points(const Scan& scan, double intensity_threshold = 100.0,
                                double height_band = 0.3, std::size_t max_points = 500) {
  std::vector<Point3> sel;
  for (const auto& p : scan.points)
    if (std::abs(p.z) <= height_band && p.intensity > intensity_threshold) sel.push_back(p);
  Scan out;
  out.t = scan.t;
  const std::size_t stride = std::max<std::size_t>(1, (sel.size() + max_points - 1) / max_points);
  for (std::size_t i = 0; i < sel.size(); i += stride) out.points.push_back(sel[i]);
  return out;
}

/// Only the faces toward the sensor are seen, so along a hidden axis a thin cloud is pushed back
/// by half a body. Wall kinds hide depth on both horizontal axes; ceiling kinds face traffic and
/// hide it only along the tube, where the lateral centroid is kept.
inline Vec3 complete_center(const FacilityDetection& d, const Vec3& nominal, const Vec3& sensor,
                            double full_fraction = 0.8) {
  Vec3 c = d.center_tunnel;
  const bool ceiling = installed_side(d.kind) == WallSide::kCeiling;
  for (int a = 0; a < 2; ++a) {
    if (d.bbox(a) >= full_fraction * nominal(a)) {
      c(a) = 0.5 * (d.face_lo(a) + d.face_hi(a));
    } else if (ceiling && a == 0) {
      continue;
    } else if (sensor(a) < d.bbox_lo(a)) {
      c(a) = d.face_lo(a) + 0.5 * nominal(a);
    } else if (sensor(a) > d.bbox_hi(a)) {
      c(a) = d.face_hi(a) - 0.5 * nominal(a);
    }
  }
  return c;
}

struct LaneEstimate {
  int lane = 1;
  double offset = 0.0;  // right of the tunnel axis
  double d_left = 0.0;
  double d_right = 0.0;
};

inline int lane_from_offset(double offset, const TunnelSpec& spec) {
  const int lane = static_cast<int>(std::floor((offset + spec.lane_count * spec.lane_width / 2.0) /
                                               spec.lane_width)) + 1;
  return std::clamp(lane, 1, spec.lane_count);
}

/// Lane index from the side-wall distances of a heading-aligned (not shifted) scan.
inline Expected<LaneEstimate> determine_lane(const Scan& heading_aligned, const TunnelSpec& spec) {
  std::vector<double> left;
  std::vector<double> right;
  for (const auto& p : heading_aligned.points) {
    if (p.z < 1.6 || p.z > 2.5 || std::abs(p.y) > 15.0) continue;
    (p.x > 0.0 ? right : left).push_back(std::abs(p.x));
  }
  if (left.size() < 10 || right.size() < 10)
    return make_error(ErrorCode::kWallNotVisible, "wall not visible on both sides");
  LaneEstimate e;
  e.d_left = detail::percentile(std::move(left), 0.2);
  e.d_right = detail::percentile(std::move(right), 0.2);
  e.offset = (e.d_left - e.d_right) / 2.0;
  e.lane = lane_from_offset(e.offset, spec);
  return e;
}

struct ExtractionConfig {
  double w_m = 0.15;
  AlignConfig align;
  RoiConfig roi;
  ClusterConfig cluster;
  double intensity_threshold = 100.0;
  double lane_height_band = 0.3;
  std::size_t max_lane_points = 500;
};

struct ExtractionResult {
  std::optional<Alignment> alignment;
  std::optional<Error> error;
  std::vector<FacilityDetection> detections;
  Scan lane_points;
  std::optional<LaneEstimate> lane;
  double align_ms = 0.0;
  double wall_ms = 0.0;
  double cluster_ms = 0.0;
  double total_ms = 0.0;

  std::size_t count(FacilityKind k) const {
    return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(),
                                                  [k](const auto& d) { return d.kind == k; }));
  }
};

/// Per-tunnel state shared across scans (the cylinder index).
class Extractor {
 public:
  Extractor(TunnelSpec spec, ExtractionConfig cfg = {})
      : spec_(std::move(spec)), cfg_(std::move(cfg)), cylinder_(spec_),
        filter_(WallFilter::for_spec(spec_, cfg_.w_m)) {}

  const TunnelSpec& spec() const { return spec_; }
  const ExtractionConfig& config() const { return cfg_; }
  const CylinderTarget& cylinder() const { return cylinder_; }

  ExtractionResult run(const Scan& scan, double curvature = 0.0) const {
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::time_point a, clock::time_point b) {
      return std::chrono::duration<double, std::milli>(b - a).count();
    };
    ExtractionResult r;
    const auto t0 = clock::now();
    r.lane_points = extract_lane_points(scan, cfg_.intensity_threshold, cfg_.lane_height_band,
                                        cfg_.max_lane_points);
    auto al = align_to_tunnel(scan, spec_, cylinder_, cfg_.align, curvature);
    const auto t1 = clock::now();
    r.align_ms = ms(t0, t1);
    if (!al) {
      r.error = al.error();
      r.total_ms = ms(t0, clock::now());
      return r;
    }
    r.alignment = *al;

    // lane from the yaw-corrected, unshifted cloud
    Scan heading_aligned;
    const double yaw = al->icp.dpsi;
    for (const auto& p : scan.points) {
      if (p.z < 1.6 || p.z > 2.5 || std::abs(p.y) > 16.0) continue;
      const Vec2 q = rotate2(p.xy(), yaw);
      heading_aligned.points.push_back(make_point(q.x(), q.y(), p.z, p.intensity));
    }
    if (auto lane = determine_lane(heading_aligned, spec_)) r.lane = *lane;

    // crop to the ROI bands first; wall removal and the ROI partition commute
    const auto& roi = cfg_.roi;
    std::vector<Vec3> aligned;
    std::vector<Point3> vehicle;
    for (const auto& p : scan.points) {
      const bool band = (p.z >= roi.lamp_lo && p.z <= roi.lamp_hi) ||
                        (p.z >= roi.exit_light_lo && p.z <= roi.exit_light_hi) ||
                        (p.z >= roi.ceiling_lo && p.z <= roi.ceiling_hi);
      if (!band || std::abs(p.y) > roi.max_range + 2.0) continue;
      const Vec3 q = al->apply(p);
      if (!filter_.keeps(q.x(), q.z())) continue;
      aligned.push_back(q);
      vehicle.push_back(p);
    }
    const auto t2 = clock::now();
    r.wall_ms = ms(t1, t2);
    const RoiBuckets buckets = classify_roi(aligned, spec_, roi);
    r.detections = cluster_facilities(buckets, aligned, vehicle, spec_, cfg_.cluster, roi.max_range);
    const Vec3 sensor = al->apply(make_point(0.0, 0.0, 0.0));
    for (auto& d : r.detections) {
      const Vec3 c = al->invert(complete_center(d, nominal_size_m(spec_, d.kind), sensor));
      d.center_completed = make_point(c.x(), c.y(), c.z(), 0.0);
    }
    const auto t3 = clock::now();
    r.cluster_ms = ms(t2, t3);
    r.total_ms = ms(t0, t3);
    return r;
  }

 private:
  TunnelSpec spec_;
  ExtractionConfig cfg_;
  CylinderTarget cylinder_;
  WallFilter filter_;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_EXTRACTION_EXTRACTION_HPP
