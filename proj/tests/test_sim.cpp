#include <gtest/gtest.h>

#include "tunnelloc/sim/scan_sim.hpp"

using namespace tunnelloc;

namespace {

LidarModel sparse_lidar() {
  LidarModel m;
  m.channels = 4;
  m.h_res_deg = 5.0;
  return m;
}

SimConfig fast_config(std::uint64_t seed) {
  SimConfig c;
  c.lidar = sparse_lidar();
  c.seed = seed;
  return c;
}

TunnelSpec short_tunnel() {
  TunnelSpec s = default_tunnel_spec();
  s.length = 300.0;
  return s;
}

}  // namespace

TEST(Raycast, WallHitsLieOnTheEllipse) {
  const TunnelSpec s = default_tunnel_spec();
  const World w(s, Placement{});
  const Pose2D truth = s.centerline().pose_at(300.0);
  LidarModel m;
  m.range_noise_sigma = 0.0;
  m.h_res_deg = 1.0;
  std::mt19937_64 rng(1);
  const Scan scan = raycast_scan(truth, m, w, 0.0, rng);
  int walls = 0;
  for (const auto& p : scan.points) {
    if (p.z < 0.05) continue;
    ++walls;
    const double r = std::hypot(p.x / s.a, p.z / s.b);
    EXPECT_NEAR(r, 1.0, 1e-5);
  }
  EXPECT_GT(walls, 1000);
}

TEST(Raycast, NoisyWallHitsWithinThreeSigma) {
  const TunnelSpec s = default_tunnel_spec();
  const World w(s, Placement{});
  const Pose2D truth = s.centerline().pose_at(300.0);
  LidarModel m;
  m.h_res_deg = 1.0;
  std::mt19937_64 rng(2);
  const Scan scan = raycast_scan(truth, m, w, 0.0, rng);
  int walls = 0, inside = 0;
  for (const auto& p : scan.points) {
    if (p.z < 0.3) continue;
    ++walls;
    // first-order distance to the ellipse
    const double f = p.x * p.x / (s.a * s.a) + p.z * p.z / (s.b * s.b) - 1.0;
    const double g = std::hypot(2 * p.x / (s.a * s.a), 2 * p.z / (s.b * s.b));
    inside += std::abs(f / g) <= 3.0 * m.range_noise_sigma;
  }
  EXPECT_GT(static_cast<double>(inside) / walls, 0.99);
}

TEST(Raycast, VerticalRayHitsApex) {
  const TunnelSpec s = default_tunnel_spec();
  const World w(s, Placement{});
  LidarModel m;
  m.channels = 1;
  m.vfov_min_deg = m.vfov_max_deg = 90.0;
  m.range_noise_sigma = 0.0;
  m.h_res_deg = 10.0;
  std::mt19937_64 rng(1);
  const Scan scan = raycast_scan(s.centerline().pose_at(100.0), m, w, 0.0, rng);
  ASSERT_FALSE(scan.points.empty());
  for (const auto& p : scan.points) {
    EXPECT_NEAR(p.z, s.b, 1e-4);
    EXPECT_NEAR(std::hypot(p.x, p.y), 0.0, 1e-4);
  }
}

TEST(Raycast, GroundIntensityIsBimodalOverLaneLines) {
  const TunnelSpec s = default_tunnel_spec();
  const World w(s, Placement{});
  LidarModel m;
  m.h_res_deg = 0.5;
  std::mt19937_64 rng(3);
  const Pose2D truth = s.centerline().pose_at(400.0);
  const Scan scan = raycast_scan(Pose2D(truth.x, truth.y, truth.psi()), m, w, 0.0, rng);
  int low = 0, mid = 0, high = 0;
  for (const auto& p : scan.points) {
    if (p.z > 0.05) continue;
    if (p.intensity < 70) ++low;
    else if (p.intensity < 150) ++mid;
    else ++high;
  }
  EXPECT_GT(low, 100);
  EXPECT_GT(high, 20);
  EXPECT_LT(mid, (low + high) / 100 + 1);
}

TEST(Raycast, RangeLimitAndOccluderShadow) {
  const TunnelSpec s = default_tunnel_spec();
  const World w(s, Placement{});
  LidarModel m;
  m.range_max = 20.0;
  m.h_res_deg = 1.0;
  const Pose2D truth = s.centerline().pose_at(300.0);
  OrientedBox box;
  const Vec2 c = truth.to_global(Vec2(0.0, 8.0));
  box.center = Vec3(c.x(), c.y(), 0.75);
  box.heading = truth.psi();
  box.half = Vec3(0.9, 2.25, 0.75);
  box.surface = SurfaceKind::kOccluder;
  std::mt19937_64 rng(4);
  const Scan scan = raycast_scan(truth, m, w, 0.0, rng, {box});
  for (const auto& p : scan.points) {
    EXPECT_LE(std::sqrt(p.x * p.x + p.y * p.y + (p.z - m.mount_height) * (p.z - m.mount_height)),
              m.range_max + 1e-3);
    // nothing is seen through the box
    if (std::abs(p.x) < 0.5 && p.z < 1.0) {
      EXPECT_LT(p.y, 5.75 + 0.05);
    }
  }
}

TEST(DriveSimulator, NoiselessDeadReckoningReproducesTruth) {
  SimConfig c = fast_config(1);
  c.dr = DrModel::noiseless();
  c.lidar.channels = 1;
  c.lidar.h_res_deg = 10.0;
  const TunnelSpec s = default_tunnel_spec();
  DriveSimulator sim(s, place_facilities(s, 1), c);
  auto f = sim.next();
  ASSERT_TRUE(f);
  Pose2D dr = f->truth;
  double worst = 0.0;
  int frames = 1;
  while ((f = sim.next())) {
    dr = Pose2D(dr.x + sim.dt() * f->dr_speed * std::cos(dr.psi()), dr.y + sim.dt() * f->dr_speed * std::sin(dr.psi()),
                dr.psi() + sim.dt() * f->dr_yaw_rate);
    worst = std::max(worst, (dr.position() - f->truth.position()).norm());
    ++frames;
  }
  EXPECT_GT(frames, 500);
  EXPECT_LT(worst, 1e-6);
}

TEST(DriveSimulator, DefaultDriftExceedsOneMeter) {
  SimConfig c = fast_config(11);
  c.lidar.channels = 1;
  c.lidar.h_res_deg = 10.0;
  const TunnelSpec s = default_tunnel_spec();
  DriveSimulator sim(s, place_facilities(s, 11), c);
  Pose2D dr;
  bool started = false;
  double terminal = 0.0;
  while (auto f = sim.next()) {
    if (!started) {
      if (!sim.in_tunnel(f->truth)) continue;
      dr = f->truth;
      started = true;
      continue;
    }
    dr = Pose2D(dr.x + sim.dt() * f->dr_speed * std::cos(dr.psi()), dr.y + sim.dt() * f->dr_speed * std::sin(dr.psi()),
                dr.psi() + sim.dt() * f->dr_yaw_rate);
    if (sim.in_tunnel(f->truth)) terminal = (dr.position() - f->truth.position()).norm();
  }
  EXPECT_GE(terminal, 1.0);
}

TEST(DriveSimulator, GpsAbsentExactlyInsideTunnel) {
  const TunnelSpec s = short_tunnel();
  DriveSimulator sim(s, place_facilities(s, 2), fast_config(2));
  const Centerline axis = s.centerline();
  int inside = 0, outside = 0;
  while (auto f = sim.next()) {
    const double st = axis.project(f->truth.position()).s;
    const bool in = st >= 0.0 && st <= s.length;
    EXPECT_EQ(f->gps.has_value(), !in);
    in ? ++inside : ++outside;
    EXPECT_LE(std::abs(f->scan.t - f->t), 1.0 / sim.config().lidar.rate);
  }
  EXPECT_GT(inside, 0);
  EXPECT_GT(outside, 0);
}

TEST(DriveSimulator, DeterministicFrameStream) {
  const TunnelSpec s = short_tunnel();
  DriveSimulator a(s, place_facilities(s, 5), fast_config(5));
  DriveSimulator b(s, place_facilities(s, 5), fast_config(5));
  int n = 0;
  while (true) {
    auto fa = a.next();
    auto fb = b.next();
    ASSERT_EQ(fa.has_value(), fb.has_value());
    if (!fa) break;
    ++n;
    EXPECT_EQ(fa->truth, fb->truth);
    EXPECT_EQ(fa->dr_speed, fb->dr_speed);
    EXPECT_EQ(fa->dr_yaw_rate, fb->dr_yaw_rate);
    EXPECT_EQ(fa->gps, fb->gps);
    ASSERT_EQ(fa->scan.points.size(), fb->scan.points.size());
    EXPECT_TRUE(fa->scan.points == fb->scan.points);
  }
  EXPECT_GT(n, 100);
}

TEST(DriveSimulator, RejectsBadRoutes) {
  const TunnelSpec s = short_tunnel();
  SimConfig c = fast_config(1);
  c.route.speed_kmh = 0.0;
  EXPECT_THROW(DriveSimulator(s, place_facilities(s, 1), c), InvalidArgument);
  c = fast_config(1);
  c.route.lane = 4;
  EXPECT_THROW(DriveSimulator(s, place_facilities(s, 1), c), InvalidArgument);
}
