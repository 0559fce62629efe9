#ifndef TUNNELLOC_SIM_SCAN_SIM_HPP
#define TUNNELLOC_SIM_SCAN_SIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "tunnelloc/core/geometry.hpp"
#include "tunnelloc/sim/world.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

/// One LIDAR revolution in the vehicle frame.
struct Scan {
  double t = 0.0;
  std::vector<Point3> points;
};

struct LidarModel {
  int channels = 32;
  double vfov_min_deg = -25.0;
  double vfov_max_deg = 15.0;
  double h_res_deg = 0.1;
  double range_max = 200.0;
  double range_noise_sigma = 0.01;
  double rate = 10.0;
  double mount_height = 1.8;

  void validate() const {
    if (channels < 1) throw InvalidArgument("LidarModel: channels must be >= 1");
    if (!(range_noise_sigma >= 0.0)) throw InvalidArgument("LidarModel: range noise must be >= 0");
    if (!(h_res_deg > 0.0 && h_res_deg <= 10.0)) throw InvalidArgument("LidarModel: bad h_res");
    if (!(vfov_max_deg >= vfov_min_deg)) throw InvalidArgument("LidarModel: bad vertical fov");
    if (!(range_max > 0.0) || !(rate > 0.0) || !(mount_height > 0.0))
      throw InvalidArgument("LidarModel: range, rate and mount height must be > 0");
  }
  int azimuth_steps() const { return static_cast<int>(std::lround(360.0 / h_res_deg)); }
  double elevation_deg(int c) const {
    return channels == 1 ? vfov_min_deg
                         : vfov_min_deg + c * (vfov_max_deg - vfov_min_deg) / (channels - 1);
  }
};

struct DrModel {
  double gyro_bias = 10.0 * kDegToRad / 3600.0;        // rad/s
  double gyro_noise = 0.01 * kDegToRad;                 // rad/s/sqrt(Hz)
  double accel_bias = 15e-6 * 9.80665;                  // m/s^2
  double accel_noise = 60e-6 * 9.80665;                 // m/s^2/sqrt(Hz)
  double speed_noise = 0.02;                            // m/s, white per sample
  double rate = 40.0;                                   // Hz

  void validate() const {
    if (!(gyro_bias >= 0.0 && gyro_noise >= 0.0 && accel_bias >= 0.0 && accel_noise >= 0.0 &&
          speed_noise >= 0.0))
      throw InvalidArgument("DrModel: all noise terms must be >= 0");
    if (!(rate > 0.0)) throw InvalidArgument("DrModel: rate must be > 0");
  }
  static DrModel noiseless() { return {0.0, 0.0, 0.0, 0.0, 0.0, 40.0}; }
};

/// Position fixes with first-order Gauss-Markov errors; unavailable between the portals.
struct GpsModel {
  double cep = 2.5;
  double correlation_time = 60.0;  // s
};

struct RouteSpec {
  int lane = 2;
  double speed_kmh = 100.0;
  /// Optional piecewise-constant profile: (from arc length, km/h). Overrides speed_kmh past each s.
  std::vector<std::pair<double, double>> speed_profile;
  double start_s = -150.0;   // where the drive begins
  double end_margin = 30.0;  // drive ends this far past the exit portal
  double wander_amplitude = 0.1;
  double wander_wavelength = 200.0;

  double speed_at(double s) const {
    double kmh = speed_kmh;
    for (const auto& [from, v] : speed_profile)
      if (s >= from) kmh = v;
    return kmh / 3.6;
  }
};

struct SimConfig {
  LidarModel lidar;
  DrModel dr;
  GpsModel gps;
  OccluderModel occluders;
  RouteSpec route;
  bool synthetic_distortion = false;
  std::uint64_t seed = 1;
};

struct SimFrame {
  int index = 0;
  double t = 0.0;
  Pose2D truth;
  Scan scan;
  double dr_speed = 0.0;      // mean over the interval ending at t
  double dr_yaw_rate = 0.0;
  std::optional<Vec2> gps;    // absent between the portals
};

namespace detail {

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

struct RayTable {
  std::vector<double> cos_el, sin_el, sin_az, cos_az;
  explicit RayTable(const LidarModel& m) {
    for (int c = 0; c < m.channels; ++c) {
      const double e = m.elevation_deg(c) * kDegToRad;
      cos_el.push_back(std::cos(e));
      sin_el.push_back(std::sin(e));
    }
    const int n = m.azimuth_steps();
    for (int k = 0; k < n; ++k) {
      const double a = k * m.h_res_deg * kDegToRad;
      sin_az.push_back(std::sin(a));
      cos_az.push_back(std::cos(a));
    }
  }
};

inline double intensity_for(SurfaceKind k, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  double mu = 0.0;
  double sd = 0.0;
  switch (k) {
    case SurfaceKind::kPaint: mu = 200.0; sd = 10.0; break;
    case SurfaceKind::kAsphalt: mu = 20.0; sd = 10.0; break;
    case SurfaceKind::kWall: mu = 40.0; sd = 10.0; break;
    case SurfaceKind::kFacility: mu = 120.0; sd = 20.0; break;
    case SurfaceKind::kOccluder: mu = 60.0; sd = 15.0; break;
    case SurfaceKind::kNone: break;
  }
  return std::clamp(mu + sd * n01(rng), 0.0, 255.0);
}

}  // namespace detail

/// Casts every (channel, azimuth) ray from the sensor at `truth` and returns the nearest hits.
/// Azimuth 0 points forward and grows toward the right.
inline Scan raycast_scan(const Pose2D& truth, const LidarModel& model, const World& world, double t,
                         std::mt19937_64& rng, const std::vector<OrientedBox>& dynamic_boxes = {},
                         double distortion_speed = 0.0) {
  model.validate();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const detail::RayTable table(model);
  const int n_ch = model.channels;
  const int n_az = model.azimuth_steps();
  const Vec3 origin(truth.x, truth.y, model.mount_height);
  const Vec2 fwd = truth.forward();
  const Vec2 right = truth.right();
  const std::size_t start_chunk = world.chunk_index(world.axis().project(truth.position()).s);

  auto ray_dir = [&](int c, int k) {
    const Vec2 h = table.cos_el[c] * (table.sin_az[k] * right + table.cos_az[k] * fwd);
    return Vec3(h.x(), h.y(), table.sin_el[c]);
  };

  std::vector<double> depth(static_cast<std::size_t>(n_ch) * n_az, kInf);
  std::vector<SurfaceKind> surf(depth.size(), SurfaceKind::kNone);

  for (int k = 0; k < n_az; ++k) {
    for (int c = 0; c < n_ch; ++c) {
      const Vec3 d = ray_dir(c, k);
      const std::size_t idx = static_cast<std::size_t>(k) * n_ch + c;
      double best = world.wall_hit(origin, d, start_chunk, model.range_max);
      SurfaceKind kind = SurfaceKind::kWall;
      if (d.z() < -1e-12) {
        const double tg = origin.z() / -d.z();
        if (tg < best) {
          best = tg;
          kind = SurfaceKind::kAsphalt;
        }
      }
      if (best <= model.range_max) {
        depth[idx] = best;
        surf[idx] = kind;
      }
    }
  }

  auto draw_box = [&](const OrientedBox& box) {
    const Vec2 rel_c = box.center.head<2>() - origin.head<2>();
    if (rel_c.norm() > model.range_max + box.half.head<2>().norm()) return;
    const auto fp = box.footprint();
    // sensor inside the footprint (driving under a ceiling object)?
    const double bc = std::cos(box.heading);
    const double bs = std::sin(box.heading);
    const Vec2 o_rel = origin.head<2>() - box.center.head<2>();
    const double o_l = o_rel.x() * bs - o_rel.y() * bc;
    const double o_a = o_rel.x() * bc + o_rel.y() * bs;
    const double dx = std::max(0.0, std::abs(o_l) - box.half.x());
    const double dy = std::max(0.0, std::abs(o_a) - box.half.y());
    const double d_min = std::hypot(dx, dy);
    double d_max = 0.0;
    double az_lo = kInf;
    double az_hi = -kInf;
    std::array<double, 4> az{};
    for (int i = 0; i < 4; ++i) {
      const Vec2 v = fp[i] - origin.head<2>();
      d_max = std::max(d_max, v.norm());
      az[i] = std::atan2(v.dot(right), v.dot(fwd));
    }
    const bool inside = d_min == 0.0;
    if (!inside) {
      az_lo = *std::min_element(az.begin(), az.end());
      az_hi = *std::max_element(az.begin(), az.end());
      if (az_hi - az_lo > kPi) {
        for (auto& a : az)
          if (a < 0.0) a += 2.0 * kPi;
        az_lo = *std::min_element(az.begin(), az.end());
        az_hi = *std::max_element(az.begin(), az.end());
      }
    }
    const double zt = box.center.z() + box.half.z() - origin.z();
    const double zb = box.center.z() - box.half.z() - origin.z();
    const double el_hi = zt > 0.0 ? std::atan2(zt, d_min) : std::atan2(zt, d_max);
    const double el_lo = zb < 0.0 ? std::atan2(zb, d_min) : std::atan2(zb, d_max);
    int c_lo = n_ch;
    int c_hi = -1;
    for (int c = 0; c < n_ch; ++c) {
      const double e = model.elevation_deg(c) * kDegToRad;
      if (e >= el_lo - 1e-9 && e <= el_hi + 1e-9) {
        c_lo = std::min(c_lo, c);
        c_hi = std::max(c_hi, c);
      }
    }
    if (c_hi < 0) return;
    const double step = model.h_res_deg * kDegToRad;
    long k_lo = 0;
    long k_hi = n_az - 1;
    if (!inside) {
      k_lo = static_cast<long>(std::floor(az_lo / step));
      k_hi = static_cast<long>(std::ceil(az_hi / step));
    }
    for (long kk = k_lo; kk <= k_hi; ++kk) {
      const int k = static_cast<int>(((kk % n_az) + n_az) % n_az);
      for (int c = c_lo; c <= c_hi; ++c) {
        const std::size_t idx = static_cast<std::size_t>(k) * n_ch + c;
        const double tb = box.intersect(origin, ray_dir(c, k));
        if (tb < depth[idx] && tb <= model.range_max) {
          depth[idx] = tb;
          surf[idx] = box.surface;
        }
      }
    }
  };
  for (const auto& b : world.static_boxes()) draw_box(b);
  for (const auto& b : dynamic_boxes) draw_box(b);

  std::normal_distribution<double> range_noise(0.0, 1.0);
  Scan scan;
  scan.t = t;
  scan.points.reserve(depth.size());
  const double sweep_shift = distortion_speed / model.rate;
  for (int k = 0; k < n_az; ++k) {
    for (int c = 0; c < n_ch; ++c) {
      const std::size_t idx = static_cast<std::size_t>(k) * n_ch + c;
      if (surf[idx] == SurfaceKind::kNone) continue;
      SurfaceKind kind = surf[idx];
      if (kind == SurfaceKind::kAsphalt) {
        const Vec3 hit = origin + depth[idx] * ray_dir(c, k);
        if (world.on_paint(world.locate(hit.head<2>(), start_chunk))) kind = SurfaceKind::kPaint;
      }
      const double r = depth[idx] + model.range_noise_sigma * range_noise(rng);
      const double inten = detail::intensity_for(kind, rng);
      if (!(r > 0.0) || r > model.range_max) continue;
      const double h = table.cos_el[c] * r;
      Point3 p;
      p.x = detail::to_f32(h * table.sin_az[k]);
      p.y = detail::to_f32(h * table.cos_az[k] - sweep_shift * k / n_az);
      p.z = detail::to_f32(model.mount_height + table.sin_el[c] * r);
      p.intensity = detail::to_f32(inten);
      scan.points.push_back(p);
    }
  }
  return scan;
}

/// Sequential frame generator: truth from a lane-keeping controller, DR inputs, GPS fixes, scans.
class DriveSimulator {
 public:
  DriveSimulator(const TunnelSpec& spec, const Placement& placement, SimConfig cfg)
      : cfg_(std::move(cfg)), world_(spec, placement, std::max(600.0, -cfg_.route.start_s + 300.0)),
        rng_(cfg_.seed), scan_rng_(cfg_.seed ^ 0x5ca9ULL) {
    validate(spec);
    cfg_.lidar.validate();
    cfg_.dr.validate();
    const auto& route = cfg_.route;
    if (route.lane < 1 || route.lane > spec.lane_count)
      throw InvalidArgument("DriveSimulator: route lane outside the tunnel's lanes");
    if (!(route.speed_kmh > 0.0)) throw InvalidArgument("DriveSimulator: speed must be > 0");
    for (const auto& [s, v] : route.speed_profile)
      if (!(v > 0.0)) throw InvalidArgument("DriveSimulator: speed must be > 0");
    if (!(std::abs(route.wander_amplitude) + 0.9 < spec.lane_width / 2.0))
      throw InvalidArgument("DriveSimulator: wander leaves the lane");
    if (!(cfg_.gps.cep >= 0.0) || !(cfg_.gps.correlation_time > 0.0))
      throw InvalidArgument("DriveSimulator: bad GPS model");
    if (!(cfg_.occluders.density >= 0.0)) throw InvalidArgument("DriveSimulator: bad occluder density");

    dt_ = 1.0 / cfg_.lidar.rate;
    end_s_ = spec.length + route.end_margin;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    wander_phase_ = 2.0 * kPi * u01(rng_);
    const Centerline& axis = world_.axis();
    const Pose2D start = axis.pose_at(route.start_s);
    const Vec2 p0 = axis.point_at({route.start_s, desired_offset(route.start_s)});
    truth_ = Pose2D(p0.x(), p0.y(), start.psi());

    // other-lane traffic
    std::vector<Occluder> occ;
    const double lo = route.start_s - 300.0;
    const double hi = end_s_ + 300.0;
    for (int lane = 1; lane <= spec.lane_count; ++lane) {
      if (lane == route.lane) continue;
      const int n = static_cast<int>(std::lround(cfg_.occluders.density * (hi - lo) / 100.0));
      for (int i = 0; i < n; ++i) {
        const double rel = (2.0 * u01(rng_) - 1.0) * cfg_.occluders.relative_speed_kmh / 3.6;
        occ.push_back({lane, lo + (hi - lo) * u01(rng_), route.speed_at(route.start_s) + rel});
      }
    }
    world_.set_occluders(std::move(occ), cfg_.occluders);

    const double sigma = cfg_.gps.cep / 1.1774;
    std::normal_distribution<double> n01(0.0, 1.0);
    gps_err_ = Vec2(sigma * n01(rng_), sigma * n01(rng_));
    yaw_rate_ = 0.0;
    speed_ = route.speed_at(route.start_s);
  }

  const World& world() const { return world_; }
  const SimConfig& config() const { return cfg_; }
  double dt() const { return dt_; }

  bool in_tunnel(const Pose2D& p) const {
    const double s = world_.axis().project(p.position()).s;
    return s >= 0.0 && s <= world_.spec().length;
  }

  std::optional<SimFrame> next() {
    const Centerline& axis = world_.axis();
    if (index_ > 0) {
      if (axis.project(truth_.position()).s > end_s_) return std::nullopt;
      advance();
    }
    SimFrame f;
    f.index = index_;
    f.t = index_ * dt_;
    f.truth = truth_;
    f.dr_speed = meas_speed_;
    f.dr_yaw_rate = meas_yaw_rate_;
    if (index_ == 0) {
      f.dr_speed = speed_;
      f.dr_yaw_rate = 0.0;
    }
    if (!in_tunnel(truth_)) f.gps = truth_.position() + gps_err_;
    f.scan = raycast_scan(truth_, cfg_.lidar, world_, f.t, scan_rng_, world_.occluder_boxes(f.t),
                          cfg_.synthetic_distortion ? speed_ : 0.0);
    ++index_;
    return f;
  }

 private:
  double desired_offset(double s) const {
    const auto& r = cfg_.route;
    const double w = r.wander_wavelength > 0.0
                         ? r.wander_amplitude * std::sin(2.0 * kPi * s / r.wander_wavelength + wander_phase_)
                         : 0.0;
    return world_.spec().lane_center(r.lane) + w;
  }

  // Moves the truth one LIDAR period and records the DR measurement of that interval.
  void advance() {
    const Centerline& axis = world_.axis();
    const double s = axis.project(truth_.position()).s;
    const double v = cfg_.route.speed_at(s);
    const double look = std::max(10.0, 0.6 * v);
    const Vec2 target = axis.point_at({s + look, desired_offset(s + look)});
    const Vec2 to = target - truth_.position();
    const double alpha = wrap_angle(std::atan2(to.y(), to.x()) - truth_.psi());
    const double omega = 2.0 * v * std::sin(alpha) / look;

    // DR samples at the IMU rate, averaged over the interval
    const auto& dr = cfg_.dr;
    const int n_sub = std::max(1, static_cast<int>(std::lround(dr.rate / cfg_.lidar.rate)));
    const double h = dt_ / n_sub;
    std::normal_distribution<double> n01(0.0, 1.0);
    const bool gps_ok = !in_tunnel(truth_);
    double sum_v_err = 0.0;
    double sum_w_err = 0.0;
    for (int i = 0; i < n_sub; ++i) {
      if (gps_ok) speed_err_ = 0.0;
      else speed_err_ += h * (dr.accel_bias + dr.accel_noise * std::sqrt(dr.rate) * n01(rng_));
      sum_v_err += speed_err_ + dr.speed_noise * n01(rng_);
      sum_w_err += dr.gyro_bias + dr.gyro_noise * std::sqrt(dr.rate) * n01(rng_);
    }
    meas_speed_ = v + sum_v_err / n_sub;
    meas_yaw_rate_ = omega + sum_w_err / n_sub;

    truth_ = Pose2D(truth_.x + dt_ * v * std::cos(truth_.psi()),
                    truth_.y + dt_ * v * std::sin(truth_.psi()), truth_.psi() + dt_ * omega);
    speed_ = v;
    yaw_rate_ = omega;

    const double sigma = cfg_.gps.cep / 1.1774;
    const double phi = std::exp(-dt_ / cfg_.gps.correlation_time);
    const double q = sigma * std::sqrt(1.0 - phi * phi);
    gps_err_ = phi * gps_err_ + Vec2(q * n01(rng_), q * n01(rng_));
  }

  SimConfig cfg_;
  World world_;
  std::mt19937_64 rng_;
  std::mt19937_64 scan_rng_;
  double dt_ = 0.1;
  double end_s_ = 0.0;
  double wander_phase_ = 0.0;
  Pose2D truth_;
  double speed_ = 0.0;
  double yaw_rate_ = 0.0;
  double speed_err_ = 0.0;
  double meas_speed_ = 0.0;
  double meas_yaw_rate_ = 0.0;
  Vec2 gps_err_ = Vec2::Zero();
  int index_ = 0;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_SIM_SCAN_SIM_HPP
