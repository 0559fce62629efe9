#ifndef TUNNELLOC_REGISTRATION_ICP_HPP
#define TUNNELLOC_REGISTRATION_ICP_HPP

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tunnelloc/core/expected.hpp"
#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/registration/kdtree.hpp"

namespace tunnelloc {

/// Planar rigid correction: p' = R(dpsi) p + (dx, dy). Height is left untouched.
struct RigidCorrection {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;
  bool converged = false;
  double score = 0.0;
  int iterations = 0;

  Vec3 apply(const Vec3& p) const {
    const Vec2 q = rotate2(p.head<2>(), dpsi) + Vec2(dx, dy);
    return {q.x(), q.y(), p.z()};
  }
};

struct IcpConfig {
  int dof = 3;  // 2: lateral shift (x) + yaw, 3: x, y, yaw
  int max_iter = 30;
  double tol = 1e-4;
  double max_corr_dist = std::numeric_limits<double>::infinity();
  double min_corr_fraction = 0.3;
};

struct IcpResult {
  RigidCorrection correction;
  double rms_before = 0.0;
  double rms_after = 0.0;
  double corr_fraction = 0.0;
  std::vector<double> rms_history;  // accepted iterations
};

namespace detail {

struct IcpResidual {
  double rms = 0.0;
  double fraction = 0.0;
  std::vector<int> match;  // -1 when gated out
};

inline IcpResidual icp_correspond(const std::vector<Vec3>& src, const KdTree<3>& tree,
                                  const RigidCorrection& t, double max_dist) {
  IcpResidual r;
  r.match.assign(src.size(), -1);
  double sum = 0.0;
  int n = 0;
  const double gate = max_dist * max_dist;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto hit = tree.nearest(t.apply(src[i]));
    if (hit.sq_dist <= gate) {
      r.match[i] = hit.index;
      sum += hit.sq_dist;
      ++n;
    }
  }
  r.fraction = src.empty() ? 0.0 : static_cast<double>(n) / src.size();
  r.rms = n > 0 ? std::sqrt(sum / n) : std::numeric_limits<double>::infinity();
  return r;
}

// Least-squares transform for fixed pairs; closed form for 3 DOF, Gauss-Newton for 2 DOF.
inline RigidCorrection icp_solve(const std::vector<Vec3>& src, const KdTree<3>& tree,
                                 const std::vector<int>& match, int dof, RigidCorrection init) {
  if (dof == 3) {
    Vec2 ms = Vec2::Zero();
    Vec2 mt = Vec2::Zero();
    int n = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (match[i] < 0) continue;
      ms += src[i].head<2>();
      mt += tree.point(match[i]).head<2>();
      ++n;
    }
    ms /= n;
    mt /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (match[i] < 0) continue;
      const Vec2 a = src[i].head<2>() - ms;
      const Vec2 b = tree.point(match[i]).head<2>() - mt;
      sxx += a.dot(b);
      sxy += a.x() * b.y() - a.y() * b.x();
    }
    RigidCorrection t = init;
    t.dpsi = std::atan2(sxy, sxx);
    const Vec2 tr = mt - rotate2(ms, t.dpsi);
    t.dx = tr.x();
    t.dy = tr.y();
    return t;
  }
  RigidCorrection t = init;
  for (int it = 0; it < 5; ++it) {
    Mat2 jtj = Mat2::Zero();
    Vec2 jtr = Vec2::Zero();
    const double c = std::cos(t.dpsi);
    const double s = std::sin(t.dpsi);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (match[i] < 0) continue;
      const Vec2 p = src[i].head<2>();
      const Vec2 q = tree.point(match[i]).head<2>();
      const Vec2 res = Vec2(c * p.x() - s * p.y() + t.dx, s * p.x() + c * p.y() + t.dy) - q;
      const Vec2 dth(-s * p.x() - c * p.y(), c * p.x() - s * p.y());
      Eigen::Matrix<double, 2, 2> j;
      j << 1.0, dth.x(), 0.0, dth.y();
      jtj += j.transpose() * j;
      jtr += j.transpose() * res;
    }
    const Vec2 delta = jtj.ldlt().solve(-jtr);
    t.dx += delta(0);
    t.dpsi += delta(1);
    if (delta.norm() < 1e-12) break;
  }
  return t;
}

}  // namespace detail

/// Point-to-point ICP of `source` onto `target` (target indexed once).
inline Expected<IcpResult> icp(const std::vector<Vec3>& source, const KdTree<3>& target,
                               const IcpConfig& cfg = {}) {
  if (source.empty() || target.empty()) throw InvalidArgument("icp: empty point set");
  if (cfg.dof != 2 && cfg.dof != 3) throw InvalidArgument("icp: dof must be 2 or 3");
  IcpResult out;
  RigidCorrection t;
  auto res = detail::icp_correspond(source, target, t, cfg.max_corr_dist);
  out.rms_before = res.rms;
  out.corr_fraction = res.fraction;
  if (res.fraction < cfg.min_corr_fraction)
    return make_error(ErrorCode::kIcpDiverged, "correspondence fraction below threshold");
  out.rms_history.push_back(res.rms);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    RigidCorrection next = detail::icp_solve(source, target, res.match, cfg.dof, t);
    next.iterations = it;
    const double step = std::sqrt((next.dx - t.dx) * (next.dx - t.dx) +
                                  (next.dy - t.dy) * (next.dy - t.dy) +
                                  (next.dpsi - t.dpsi) * (next.dpsi - t.dpsi));
    auto next_res = detail::icp_correspond(source, target, next, cfg.max_corr_dist);
    if (next_res.fraction < cfg.min_corr_fraction)
      return make_error(ErrorCode::kIcpDiverged, "correspondence fraction below threshold");
    t.iterations = it;
    if (next_res.rms > res.rms) break;  // reject: residual would grow
    t = next;
    res = std::move(next_res);
    out.corr_fraction = res.fraction;
    out.rms_history.push_back(res.rms);
    if (step < cfg.tol) {
      t.converged = true;
      break;
    }
  }
  t.dpsi = wrap_angle(t.dpsi);
  t.score = res.rms;
  out.correction = t;
  out.rms_after = res.rms;
  return out;
}

inline Expected<IcpResult> icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                               const IcpConfig& cfg = {}) {
  if (target.empty()) throw InvalidArgument("icp: empty point set");
  return icp(source, KdTree<3>(target), cfg);
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_REGISTRATION_ICP_HPP
