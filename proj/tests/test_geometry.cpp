#include <random>

#include <gtest/gtest.h>

#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/tunnel/centerline.hpp"

using namespace tunnelloc;

TEST(Rotate2, IdentityAndQuarterTurn) {
  EXPECT_TRUE(rotate2(Vec2(1, 0), 0.0).isApprox(Vec2(1, 0)));
  const Vec2 q = rotate2(Vec2(1, 0), kPi / 2);
  EXPECT_NEAR(q.x(), 0.0, 1e-15);
  EXPECT_NEAR(q.y(), 1.0, 1e-15);
}

TEST(Rotate2, InverseCompositionAndNorm) {
  const Vec2 v(3, 4);
  EXPECT_LT((rotate2(rotate2(v, 0.7), -0.7) - v).norm(), 1e-12);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 w(u(rng), u(rng));
    EXPECT_NEAR(rotate2(w, u(rng)).norm(), w.norm(), 1e-12);
  }
}

TEST(WrapAngle, Examples) {
  EXPECT_EQ(wrap_angle(0.0), 0.0);
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
  EXPECT_EQ(wrap_angle(kPi), kPi);
}

TEST(WrapAngle, RangeMultipleAndIdempotent) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    const double k = (a - w) / (2 * kPi);
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_EQ(wrap_angle(w), w);
  }
}

TEST(Pose2D, HeadingWrappedOnEveryMutation) {
  Pose2D p(1, 2, 7.0);
  EXPECT_NEAR(p.psi(), 7.0 - 2 * kPi, 1e-12);
  p.set_psi(-4.0);
  EXPECT_NEAR(p.psi(), -4.0 + 2 * kPi, 1e-12);
}

TEST(Pose2D, VehicleFrameRoundTrip) {
  const Pose2D p(10, -3, 0.4);
  const Vec2 v(1.5, -2.0);
  EXPECT_LT((p.to_vehicle(p.to_global(v)) - v).norm(), 1e-12);
  // heading east: right is south
  const Pose2D e(0, 0, 0);
  EXPECT_LT((e.to_global(Vec2(1, 0)) - Vec2(0, -1)).norm(), 1e-15);
  EXPECT_LT((vehicle_to_global_rotation(0.4) * v - (p.to_global(v) - p.position())).norm(), 1e-12);
}

TEST(GeoToLocal, OriginAndNorthStep) {
  const GeoOrigin o(37.27, 127.18);
  EXPECT_LT(geo_to_local(37.27, 127.18, o).norm(), 1e-12);
  const Vec2 n = geo_to_local(37.27 + 1e-5, 127.18, o);
  EXPECT_NEAR(n.x(), 0.0, 1e-9);
  EXPECT_NEAR(n.y(), 1e-5 * kPi / 180.0 * 6378137.0, 1e-9);
  EXPECT_NEAR(n.y(), 1.113, 1e-3);
}

TEST(GeoToLocal, RoundTripWithinFiveKm) {
  const GeoOrigin o(37.27, 127.18);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5000, 5000);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p(u(rng), u(rng));
    const LatLon g = local_to_geo(p, o);
    worst = std::max(worst, (geo_to_local(g.lat, g.lon, o) - p).norm());
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(GeoToLocal, RejectsPoles) {
  EXPECT_THROW(GeoOrigin(90.0, 0.0), InvalidArgument);
  EXPECT_THROW(geo_to_local(-90.0, 0.0, GeoOrigin(0, 0)), InvalidArgument);
}

TEST(Centerline, ProjectInvertsPointAtOnArcs) {
  const Centerline c(Pose2D(5, 5, 0.3), {{200, 0.0}, {300, 1.0 / 800}, {200, -1.0 / 1200}});
  EXPECT_NEAR(c.length(), 700.0, 1e-12);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> us(0, 700), ud(-7, 7);
  for (int i = 0; i < 500; ++i) {
    const TrackCoord tc{us(rng), ud(rng)};
    const TrackCoord back = c.project(c.point_at(tc));
    EXPECT_NEAR(back.s, tc.s, 1e-6);
    EXPECT_NEAR(back.d, tc.d, 1e-6);
  }
  EXPECT_NEAR(c.curvature_at(350), 1.0 / 800, 1e-15);
}
