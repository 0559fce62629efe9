#ifndef TUNNELLOC_REGISTRATION_NDT_HPP
#define TUNNELLOC_REGISTRATION_NDT_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tunnelloc/core/expected.hpp"
#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/registration/association.hpp"
#include "tunnelloc/registration/icp.hpp"

namespace tunnelloc {

using Vec3d = Eigen::Vector3d;

/// Score, gradient and Hessian of the single-Gaussian-per-point NDT objective.
struct NdtEval {
  double score = 0.0;
  Vec3d grad = Vec3d::Zero();
  Mat3 hess = Mat3::Zero();
};

/// Fixed point-to-Gaussian pairing. The correction (dx, dy, dpsi) rotates points about `pivot`:
/// T(p) = R(dpsi) (p - pivot) + pivot + (dx, dy).
class NdtProblem {
 public:
  NdtProblem(Vec2 pivot) : pivot_(std::move(pivot)) {}  // NOLINT

  void add(const Vec2& p, const Vec2& mean, const Mat2& info) {
    rel_.push_back(p - pivot_);
    mean_.push_back(mean);
    info_.push_back(info);
  }
  std::size_t size() const { return rel_.size(); }

  NdtEval evaluate(const Vec3d& delta, bool with_hessian = true) const {
    NdtEval out;
    const double c = std::cos(delta(2));
    const double s = std::sin(delta(2));
    for (std::size_t i = 0; i < rel_.size(); ++i) {
      const Vec2& r = rel_[i];
      const Vec2 rr(c * r.x() - s * r.y(), s * r.x() + c * r.y());
      const Vec2 e = rr + pivot_ + delta.head<2>() - mean_[i];
      const Vec2 oe = info_[i] * e;
      const double f = std::exp(-0.5 * e.dot(oe));
      out.score += f;
      // de/dpsi = R'(r), d2e/dpsi2 = -R r
      const Vec2 dpsi(-rr.y(), rr.x());
      Eigen::Matrix<double, 2, 3> j;
      j << 1.0, 0.0, dpsi.x(), 0.0, 1.0, dpsi.y();
      const Vec3d g = j.transpose() * oe;
      out.grad -= f * g;
      if (with_hessian) {
        Mat3 h = g * g.transpose() - j.transpose() * info_[i] * j;
        h(2, 2) += oe.dot(rr);  // -e' * info * (-R r)
        out.hess += f * h;
      }
    }
    return out;
  }

 private:
  Vec2 pivot_;
  std::vector<Vec2> rel_;
  std::vector<Vec2> mean_;
  std::vector<Mat2> info_;
};

struct NdtConfig {
  int max_iter = 30;
  double tol = 1e-4;
  double euclid_gate = 2.0;
  double maha_gate = 3.0;
  std::size_t min_points = 10;
};

struct NdtResult {
  RigidCorrection correction;
  Mat3 hessian = Mat3::Zero();  // score Hessian at the returned correction
  double initial_score = 0.0;
  std::size_t associated = 0;
};

/// Builds the pairing at the initial guess (points already in the local plane).
inline NdtProblem make_ndt_problem(const std::vector<Vec2>& points, const LaneDistMap& map,
                                   const LaneIndex& index, const Vec2& pivot, const NdtConfig& cfg) {
  NdtProblem prob(pivot);
  const Association a = associate_lane(points, index, cfg.euclid_gate, cfg.maha_gate);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto [i, j] = a.pairs[k];
    prob.add(points[i], map.gaussians[j].mean, index.info(j));
  }
  return prob;
}

/// Newton maximization of the NDT score from the identity correction.
inline Expected<NdtResult> ndt_optimize(const NdtProblem& prob, const NdtConfig& cfg = {}) {
  NdtResult out;
  out.associated = prob.size();
  Vec3d delta = Vec3d::Zero();
  NdtEval cur = prob.evaluate(delta);
  out.initial_score = cur.score;
  out.hessian = cur.hess;
  if (prob.size() < cfg.min_points) {
    out.correction.score = cur.score;
    return out;
  }
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iter && !converged; ++it) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(cur.hess);
    Vec3d lam = es.eigenvalues();
    const double scale = lam.cwiseAbs().maxCoeff();
    if (!(scale > 1e-12) || !std::isfinite(scale))
      return make_error(ErrorCode::kNdtIllConditioned, "NDT Hessian numerically singular");
    // force negative definite; small or positive curvature is damped to -1e-3 of the largest
    const double floor = 1e-3 * scale;
    for (int k = 0; k < 3; ++k) lam(k) = std::min(lam(k), -floor);
    const Mat3 h_reg = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Vec3d step = -h_reg.ldlt().solve(cur.grad);
    // backtrack so the score never drops
    bool accepted = false;
    for (int bt = 0; bt < 12; ++bt) {
      const Vec3d trial = delta + step;
      const NdtEval next = prob.evaluate(trial);
      if (next.score >= cur.score) {
        delta = trial;
        cur = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step.norm() < cfg.tol) converged = true;
  }
  out.correction.dx = delta(0);
  out.correction.dy = delta(1);
  out.correction.dpsi = wrap_angle(delta(2));
  out.correction.converged = converged;
  out.correction.score = cur.score;
  out.correction.iterations = it;
  out.hessian = cur.hess;
  return out;
}

/// Lane-point NDT against the lane map from `init`; points are vehicle-frame [lateral, longitudinal].
inline Expected<NdtResult> ndt_match(const std::vector<Vec2>& vehicle_points, const LaneDistMap& map,
                                     const LaneIndex& index, const Pose2D& init,
                                     const NdtConfig& cfg = {}) {
  std::vector<Vec2> global;
  global.reserve(vehicle_points.size());
  for (const auto& p : vehicle_points) global.push_back(init.to_global(p));
  return ndt_optimize(make_ndt_problem(global, map, index, init.position(), cfg), cfg);
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_REGISTRATION_NDT_HPP
