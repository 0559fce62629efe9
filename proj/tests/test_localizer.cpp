#include <random>

#include <gtest/gtest.h>

#include "kernel_checks.hpp"
#include "tunnelloc/harness/runner.hpp"
#include "tunnelloc/localizer/compensation.hpp"
#include "tunnelloc/localizer/ekf.hpp"
#include "tunnelloc/localizer/localizer.hpp"

using namespace tunnelloc;

namespace {

FilterState state_at(double x, double y, double psi, double var = 1.0) {
  FilterState s;
  s.mean = Pose2D(x, y, psi);
  s.cov = Mat3::Identity() * var;
  return s;
}

bool psd(const Mat3& m) {
  return m.isApprox(m.transpose(), 1e-12) && Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff() >= -1e-9;
}

}  // namespace

TEST(TimeUpdate, Examples) {
  const NoiseConfig n;
  const FilterState s = state_at(1, 2, 0.3, 0.5);
  const FilterState still = time_update(s, 0.0, 0.0, 0.1, n.Q);
  EXPECT_EQ(still.mean, s.mean);
  EXPECT_TRUE(still.cov.isApprox(s.cov + n.Q));

  const FilterState fast = time_update(state_at(0, 0, 0), 27.78, 0.0, 0.1, n.Q);
  EXPECT_NEAR(fast.mean.x, 2.778, 1e-12);
  EXPECT_NEAR(fast.mean.y, 0.0, 1e-12);

  FilterState line = state_at(3, -1, 0.7);
  for (int i = 0; i < 100; ++i) line = time_update(line, 20.0, 0.0, 0.1, n.Q);
  EXPECT_NEAR(line.mean.x, 3 + 200 * std::cos(0.7), 1e-9);
  EXPECT_NEAR(line.mean.y, -1 + 200 * std::sin(0.7), 1e-9);

  EXPECT_THROW(time_update(s, NAN, 0.0, 0.1, n.Q), InvalidArgument);
  EXPECT_THROW(time_update(s, 1.0, INFINITY, 0.1, n.Q), InvalidArgument);
  EXPECT_THROW(time_update(s, 1.0, 0.0, 0.0, n.Q), InvalidArgument);
}

TEST(TimeUpdate, HeadingWrappedAndExactJacobianCouplesHeading) {
  const NoiseConfig n;
  const FilterState s = time_update(state_at(0, 0, kPi - 0.01), 0.0, 1.0, 0.1, n.Q);
  EXPECT_NEAR(s.mean.psi(), -kPi + 0.09, 1e-12);
  const FilterState e = time_update(state_at(0, 0, 0.0, 0.01), 30.0, 0.0, 0.1, n.Q, true);
  EXPECT_NEAR(e.cov(1, 2), 3.0 * 0.01, 1e-12);
  EXPECT_NEAR(e.cov(0, 2), 0.0, 1e-12);
}

TEST(PredictMeasurement, Examples) {
  const RangeBearing a = predict_measurement(Pose2D(0, 0, 0), Vec2(10, 0));
  EXPECT_DOUBLE_EQ(a.r, 10.0);
  EXPECT_DOUBLE_EQ(a.beta, 0.0);
  const RangeBearing b = predict_measurement(Pose2D(0, 0, 0), Vec2(0, 5));
  EXPECT_DOUBLE_EQ(b.r, 5.0);
  EXPECT_NEAR(b.beta, kPi / 2, 1e-15);
  EXPECT_THROW(predict_measurement(Pose2D(1, 1, 0), Vec2(1, 1)), InvalidArgument);
  const auto c = checks::landmark_jacobian_fd();
  EXPECT_TRUE(c.pass) << c.detail;
}

TEST(MeasurementUpdate, JacobianLayout) {
  const auto h = landmark_jacobian(Pose2D(0, 0, 0.4), Vec2(12, 5));
  EXPECT_EQ(h(0, 2), 0.0);
  EXPECT_EQ(h(1, 2), -1.0);
  // dead ahead: x-error maps one to one into range
  const auto ahead = landmark_jacobian(Pose2D(0, 0, 0), Vec2(20, 0));
  EXPECT_DOUBLE_EQ(ahead(0, 0), -1.0);
  const NoiseConfig n;
  const FilterState s = state_at(0.3, 0, 0, 0.1);
  MeasurementBundle z;
  z.pairs.push_back({20.0, 0.0, Vec2(20, 0)});
  const UpdateResult u = measurement_update(s, z, n);
  EXPECT_LT(u.state.mean.x, 0.3);
  EXPECT_GT(u.state.mean.x, 0.0);
  EXPECT_NEAR(predict_measurement(s.mean, Vec2(20, 0)).r, 19.7, 1e-12);
}

TEST(MeasurementUpdate, EtaAtMeanShrinksCovarianceOnly) {
  const NoiseConfig n;
  const FilterState s = state_at(5, 6, 1.0, 0.2);
  MeasurementBundle z;
  z.eta = s.mean;
  const UpdateResult u = measurement_update(s, z, n);
  EXPECT_FALSE(u.error);
  EXPECT_NEAR((u.state.mean.position() - s.mean.position()).norm(), 0.0, 1e-15);
  EXPECT_NEAR(u.state.mean.psi(), s.mean.psi(), 1e-15);
  EXPECT_LT(u.state.cov.trace(), s.cov.trace());
  EXPECT_EQ(u.rows, 3);
}

TEST(MeasurementUpdate, EmptyBundleIsIdentity) {
  const FilterState s = state_at(5, 6, 1.0, 0.2);
  const UpdateResult u = measurement_update(s, MeasurementBundle{}, NoiseConfig{});
  EXPECT_EQ(u.state.mean, s.mean);
  EXPECT_EQ(u.state.cov, s.cov);
  EXPECT_EQ(u.rows, 0);
}

TEST(MeasurementUpdate, SingularInnovationLeavesStateUnchanged) {
  NoiseConfig n;
  FilterState s = state_at(0, 0, 0, 0.0);
  s.cov.setZero();
  MeasurementBundle z;
  z.eta = Pose2D(1, 0, 0);
  n.R_eta = Mat3::Zero();
  const UpdateResult u = measurement_update(s, z, n);
  ASSERT_TRUE(u.error);
  EXPECT_EQ(u.error->code, ErrorCode::kSingularInnovation);
  EXPECT_EQ(u.state.mean, s.mean);
}

TEST(MeasurementUpdate, CovarianceStaysPsdAndBearingWraps) {
  const NoiseConfig n;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  FilterState s = state_at(0, 0, 0, 0.5);
  for (int i = 0; i < 2000; ++i) {
    s = time_update(s, 25.0, 0.01 * u(rng), 0.1, n.Q);
    MeasurementBundle z;
    if (i % 3 == 0) z.eta = Pose2D(s.mean.x + 0.1 * u(rng), s.mean.y + 0.1 * u(rng), s.mean.psi() + 0.01 * u(rng));
    const Vec2 lm = s.mean.position() + Vec2(20 * u(rng), 20 * u(rng));
    RangeBearing rb = predict_measurement(s.mean, lm);
    rb.beta = wrap_angle(rb.beta + 0.01 * u(rng));
    z.pairs.push_back(rb);
    s = measurement_update(s, z, n).state;
    ASSERT_TRUE(psd(s.cov));
    ASSERT_GT(s.mean.psi(), -kPi);
    ASSERT_LE(s.mean.psi(), kPi);
  }
  // landmark straight behind: predicted and measured bearings straddle +-pi
  FilterState b = state_at(0, 0, 0, 0.01);
  MeasurementBundle z;
  z.pairs.push_back({10.0, -kPi + 0.001, Vec2(-10, 0.01)});
  const UpdateResult r = measurement_update(b, z, n);
  EXPECT_LT(std::abs(r.state.mean.psi()), 0.01);
}

TEST(Ekf, NeesWithinChiSquareBand) {
  const auto slow = checks::ekf_consistency(20, 500, 31, 5.0, false);
  EXPECT_GE(slow.nees_in_band, 0.90) << "F = I at 5 m/s";
  EXPECT_EQ(slow.non_psd_steps, 0);
  const auto exact = checks::ekf_consistency(20, 500, 31, 27.78, true);
  EXPECT_GE(exact.nees_in_band, 0.90) << "exact Jacobian at 27.78 m/s";
  EXPECT_EQ(exact.non_psd_steps, 0);
}

TEST(EtaNoise, InflatesAlongTheWeakDirection) {
  Mat3 h = Mat3::Zero();
  h(0, 0) = -1e4;  // constrained across (x)
  h(1, 1) = -1.0;  // weak along (y)
  h(2, 2) = -10.0;
  const Mat3 base = NoiseConfig{}.R_eta;
  const Mat3 r = eta_noise_from_hessian(h, base, 100.0);
  EXPECT_NEAR(r(0, 0), base(0, 0), 1e-12);
  EXPECT_NEAR(r(1, 1), 100.0 * base(1, 1), 1e-12);
  EXPECT_EQ(r(2, 2), base(2, 2));
}

TEST(Compensation, LateralIsPerpendicularAndRemovesInjectedError) {
  const TunnelSpec spec = default_tunnel_spec();
  const Centerline axis = spec.centerline();
  const Vec2 lamp = axis.point_at({310.0, 6.2});
  for (int lane = 1; lane <= 3; ++lane) {
    const Pose2D truth(axis.point_at({300.0, spec.lane_center(lane)}).x(),
                       axis.point_at({300.0, spec.lane_center(lane)}).y(), axis.pose_at(300.0).psi());
    for (double err : {0.0, 0.26, 3.57, -2.02}) {
      const Vec2 p = truth.to_global(Vec2(err, 0.4));
      FilterState s;
      s.mean = Pose2D(p.x(), p.y(), truth.psi());
      const Vec2 d = lateral_correction(s.mean, lane, lamp, axis, spec);
      EXPECT_NEAR(d.dot(s.mean.forward()), 0.0, 1e-9);
      const auto out = compensate_lateral(s, lane, lamp, axis, spec);
      ASSERT_TRUE(out);
      EXPECT_NEAR(truth.to_vehicle(out->mean.position()).x(), 0.0, 1e-9);
      EXPECT_NEAR(truth.to_vehicle(out->mean.position()).y(), 0.4, 1e-9);
      if (err == 0.0) {
        EXPECT_LE(d.norm(), 0.1);
      }
      const Mat3 tv = [&] {
        Mat3 t = Mat3::Identity();
        t.block<2, 2>(0, 0) = vehicle_to_global_rotation(s.mean.psi());
        return Mat3(t.transpose() * out->cov * t);
      }();
      EXPECT_NEAR(tv(0, 0), 0.09, 1e-12);
    }
  }
  EXPECT_FALSE(compensate_lateral(FilterState{}, 2, std::nullopt, axis, spec));
}

TEST(Compensation, LongitudinalIsParallelAndAveragesLcs) {
  const Pose2D pose(0, 0, 0.35);
  const std::vector<Vec2> mapped = {pose.to_global(Vec2(-3.6, 30)), pose.to_global(Vec2(0, 30)),
                                    pose.to_global(Vec2(3.6, 30))};
  std::vector<Vec2> detected;
  for (const auto& m : mapped) detected.push_back(m - 0.25 * pose.forward() + 0.1 * pose.right());
  const Vec2 d = longitudinal_correction(pose, detected, mapped);
  EXPECT_NEAR(d.x() * pose.forward().y() - d.y() * pose.forward().x(), 0.0, 1e-9);
  EXPECT_NEAR(d.dot(pose.forward()), 0.25, 1e-12);
  FilterState s;
  s.mean = pose;
  const auto out = compensate_longitudinal(s, detected, mapped);
  ASSERT_TRUE(out);
  EXPECT_NEAR(pose.to_vehicle(out->mean.position()).y(), 0.25, 1e-12);
  EXPECT_FALSE(compensate_longitudinal(s, {}, {}));

  // three noisy LCS give a third of the single-detection variance
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.2);
  double v1 = 0.0, v3 = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    std::vector<Vec2> det;
    for (const auto& m : mapped) det.push_back(m + n(rng) * pose.forward());
    v1 += std::pow(longitudinal_correction(pose, {det[0]}, {mapped[0]}).dot(pose.forward()), 2);
    v3 += std::pow(longitudinal_correction(pose, det, mapped).dot(pose.forward()), 2);
  }
  EXPECT_NEAR(v1 / v3, 3.0, 0.15);
}

TEST(DetermineLane, FormulaAndWanderSweep) {
  const TunnelSpec spec = default_tunnel_spec();
  EXPECT_EQ(lane_from_offset(0.0, spec), 2);
  EXPECT_EQ(lane_from_offset(-spec.lane_width, spec), 1);
  EXPECT_EQ(lane_from_offset(spec.lane_width, spec), 3);
  for (int lane = 1; lane <= 3; ++lane)
    for (double w = -0.5; w <= 0.5; w += 0.01) EXPECT_EQ(lane_from_offset(spec.lane_center(lane) + w, spec), lane);
}

TEST(Localizer, EntryCompensationOnShortTunnel) {
  Scenario sc = default_scenario(2, 3);
  sc.tunnel.length = 600.0;
  RunOptions opt;
  opt.entry_error = Vec2(3.57, 0.25);
  opt.stop_after = [](const StepRecord& s) { return s.longitudinal_compensated; };
  const RunReport r = run_scenario(sc, opt);
  ASSERT_TRUE(r.summary.entry_residual);
  EXPECT_LE(std::abs(r.summary.entry_residual->first), 0.3);
  EXPECT_LE(std::abs(r.summary.entry_residual->second), 0.15);
  bool tracking = false;
  bool reached_tunnel = false;
  for (const auto& s : r.steps) {
    tracking = tracking || s.mode == Mode::kTunnelTracking;
    reached_tunnel = reached_tunnel || s.in_tunnel;
    if (!reached_tunnel) {
      EXPECT_EQ(s.mode, Mode::kGpsDr);
    }
  }
  EXPECT_TRUE(tracking);
  EXPECT_THROW(Localizer(sc.tunnel, scenario_maps(sc), [] {
                 LocalizerConfig c;
                 c.enabled = {FacilityKind::kExitLight};
                 return c;
               }()),
               InvalidArgument);
}
