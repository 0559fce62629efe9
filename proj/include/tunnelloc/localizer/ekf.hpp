#ifndef TUNNELLOC_LOCALIZER_EKF_HPP
#define TUNNELLOC_LOCALIZER_EKF_HPP

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tunnelloc/core/expected.hpp"
#include "tunnelloc/core/geometry.hpp"

namespace tunnelloc {

enum class Mode { kGpsDr, kEntryCompensation, kTunnelTracking };

constexpr std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kGpsDr: return "GpsDr";
    case Mode::kEntryCompensation: return "EntryCompensation";
    case Mode::kTunnelTracking: return "TunnelTracking";
  }
  return "?";
}

struct FilterState {
  Pose2D mean;
  Mat3 cov = Mat3::Identity();
  Mode mode = Mode::kGpsDr;
};

inline bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

struct NoiseConfig {
  Mat3 Q = Eigen::Vector3d(0.05 * 0.05, 0.05 * 0.05, std::pow(0.1 * kDegToRad, 2)).asDiagonal();
  Mat3 R_eta = Eigen::Vector3d(0.15 * 0.15, 0.15 * 0.15, std::pow(0.3 * kDegToRad, 2)).asDiagonal();
  Mat2 R_rb = Eigen::Vector2d(0.15 * 0.15, 0.01 * 0.01).asDiagonal();
  Mat2 R_gps = Eigen::Vector2d(2.12 * 2.12, 2.12 * 2.12).asDiagonal();

  void validate() const {
    if (!is_spd(Q) || !is_spd(R_eta) || !is_spd(R_rb) || !is_spd(R_gps))
      throw InvalidArgument("NoiseConfig: all noise matrices must be SPD");
  }
};

struct RangeBearing {
  double r = 0.0;
  double beta = 0.0;
  Vec2 landmark = Vec2::Zero();
};

struct MeasurementBundle {
  std::optional<Pose2D> eta;
  std::optional<Mat3> eta_cov;  // overrides NoiseConfig::R_eta for this step
  std::vector<RangeBearing> pairs;
  std::optional<Vec2> gps;

  bool empty() const { return !eta && pairs.empty() && !gps; }
};

/// Symmetrizes and clamps tiny negative eigenvalues.
inline Mat3 repair_cov(const Mat3& p) {
  Mat3 s = 0.5 * (p + p.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(s);
  if (es.eigenvalues().minCoeff() >= 0.0) return s;
  const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

/// DR propagation. The default F = I treats the DR increment as an input and gives P <- P + Q;
/// `exact_jacobian` adds the heading-to-position coupling dt*v*(-sin psi, cos psi).
inline FilterState time_update(const FilterState& s, double v, double yaw_rate, double dt, const Mat3& Q,
                               bool exact_jacobian = false) {
  if (!std::isfinite(v) || !std::isfinite(yaw_rate) || !std::isfinite(dt))
    throw InvalidArgument("time_update: non-finite input");
  if (!(dt > 0.0)) throw InvalidArgument("time_update: dt must be > 0");
  FilterState out = s;
  const double psi = s.mean.psi();
  out.mean = Pose2D(s.mean.x + dt * v * std::cos(psi), s.mean.y + dt * v * std::sin(psi), psi + dt * yaw_rate);
  Mat3 F = Mat3::Identity();
  if (exact_jacobian) {
    F(0, 2) = -dt * v * std::sin(psi);
    F(1, 2) = dt * v * std::cos(psi);
  }
  out.cov = repair_cov(F * s.cov * F.transpose() + Q);
  return out;
}

inline RangeBearing predict_measurement(const Pose2D& x, const Vec2& landmark) {
  const Vec2 d = landmark - x.position();
  const double r = d.norm();
  if (!(r > 0.0)) throw InvalidArgument("predict_measurement: landmark coincides with vehicle");
  return {r, wrap_angle(std::atan2(d.y(), d.x()) - x.psi()), landmark};
}

/// Rows [A B 0; C D -1] of the observation matrix.
inline Eigen::Matrix<double, 2, 3> landmark_jacobian(const Pose2D& x, const Vec2& landmark) {
  const Vec2 d = landmark - x.position();
  const double r2 = d.squaredNorm();
  const double r = std::sqrt(r2);
  Eigen::Matrix<double, 2, 3> h;
  h << -d.x() / r, -d.y() / r, 0.0, d.y() / r2, -d.x() / r2, -1.0;
  return h;
}

struct UpdateResult {
  FilterState state;
  std::optional<Error> error;
  double nis = 0.0;
  int rows = 0;
};

/// Stacked EKF update: eta (3 rows), GPS (2 rows), then (r, beta) per landmark. Joseph form.
inline UpdateResult measurement_update(const FilterState& s, const MeasurementBundle& z, const NoiseConfig& noise) {
  UpdateResult out{s, std::nullopt, 0.0, 0};
  const int m = (z.eta ? 3 : 0) + (z.gps ? 2 : 0) + 2 * static_cast<int>(z.pairs.size());
  if (m == 0) return out;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, 3);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd nu(m);
  int row = 0;
  if (z.eta) {
    H.block<3, 3>(row, 0) = Mat3::Identity();
    R.block<3, 3>(row, row) = z.eta_cov ? *z.eta_cov : noise.R_eta;
    nu(row) = z.eta->x - s.mean.x;
    nu(row + 1) = z.eta->y - s.mean.y;
    nu(row + 2) = wrap_angle(z.eta->psi() - s.mean.psi());
    row += 3;
  }
  if (z.gps) {
    H.block<2, 3>(row, 0) << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
    R.block<2, 2>(row, row) = noise.R_gps;
    nu.segment<2>(row) = *z.gps - s.mean.position();
    row += 2;
  }
  for (const auto& p : z.pairs) {
    const RangeBearing pred = predict_measurement(s.mean, p.landmark);
    H.block<2, 3>(row, 0) = landmark_jacobian(s.mean, p.landmark);
    R.block<2, 2>(row, row) = noise.R_rb;
    nu(row) = p.r - pred.r;
    nu(row + 1) = wrap_angle(p.beta - pred.beta);
    row += 2;
  }
  const Eigen::MatrixXd P = s.cov;
  const Eigen::MatrixXd S = H * P * H.transpose() + R;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, lmax)) || !std::isfinite(lmax)) {
    out.error = make_error(ErrorCode::kSingularInnovation, "innovation covariance singular");
    return out;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::MatrixXd K = ldlt.solve(H * P).transpose();
  const Eigen::Vector3d dx = K * nu;
  out.state.mean = Pose2D(s.mean.x + dx(0), s.mean.y + dx(1), s.mean.psi() + dx(2));
  const Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(3, 3) - K * H;
  const Mat3 joseph = IKH * P * IKH.transpose() + K * R * K.transpose();
  out.state.cov = repair_cov(joseph);
  out.nis = nu.dot(ldlt.solve(nu));
  out.rows = m;
  return out;
}

/// Covariance with the variance along the vehicle's lateral (axis 0) or longitudinal (axis 1)
/// direction replaced by `var` and its correlations dropped.
inline Mat3 reset_axis_variance(const Mat3& cov, double psi, int axis, double var) {
  Mat3 T = Mat3::Identity();
  T.block<2, 2>(0, 0) = vehicle_to_global_rotation(psi);  // vehicle (lat, lon) -> global
  Mat3 pv = T.transpose() * cov * T;
  for (int k = 0; k < 3; ++k) {
    pv(axis, k) = 0.0;
    pv(k, axis) = 0.0;
  }
  pv(axis, axis) = var;
  return repair_cov(T * pv * T.transpose());
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_LOCALIZER_EKF_HPP
