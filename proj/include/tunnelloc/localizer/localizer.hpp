#ifndef TUNNELLOC_LOCALIZER_LOCALIZER_HPP
#define TUNNELLOC_LOCALIZER_LOCALIZER_HPP

#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "tunnelloc/extraction/extraction.hpp"
#include "tunnelloc/localizer/compensation.hpp"
#include "tunnelloc/localizer/ekf.hpp"
#include "tunnelloc/registration/association.hpp"
#include "tunnelloc/registration/ndt.hpp"
#include "tunnelloc/sim/scan_sim.hpp"
#include "tunnelloc/tunnel/tunnel_model.hpp"

namespace tunnelloc {

/// Column order used by reports: lamp, exit light, LCS, exit sign.
inline constexpr std::array<FacilityKind, 4> kReportKinds = {
    FacilityKind::kFireExtinguisherLamp, FacilityKind::kExitLight, FacilityKind::kLcs,
    FacilityKind::kExitSign};

inline int report_index(FacilityKind k) {
  for (int i = 0; i < 4; ++i)
    if (kReportKinds[i] == k) return i;
  return -1;
}

inline std::set<FacilityKind> all_landmark_kinds() {
  return {kLandmarkKinds.begin(), kLandmarkKinds.end()};
}

struct LocalizerConfig {
  NoiseConfig noise;
  std::set<FacilityKind> enabled = all_landmark_kinds();
  bool use_lane = true;
  bool corrections = true;  // false: GPS/DR outside, pure DR inside
  double landmark_gate = 3.0;
  double compensation_gate = 10.0;
  double min_landmark_range = 1.0;
  double eta_inflation_max = 100.0;
  bool complete_faces = true;  // use the face-completed detection center
  bool skip_truncated = true;  // ignore detections cut by the field of view while tracking
  bool exact_motion_jacobian = false;  // true: heading error couples into position in the time update
  NdtConfig ndt;
};

struct StepDiagnostics {
  Mode mode = Mode::kGpsDr;
  std::vector<Error> errors;
  std::array<int, 4> detected{};  // by report column
  std::array<int, 4> used{};
  int lane = 0;
  std::size_t ndt_points = 0;
  bool ndt_used = false;
  bool entered = false;
  bool lateral_compensated = false;
  bool longitudinal_compensated = false;
  double localize_ms = 0.0;
  double ndt_ms = 0.0;
  double nis = 0.0;
};

/// Pose-measurement noise from the NDT Hessian: base noise, inflated along weakly observed
/// position directions (up to eta_inflation_max in variance).
inline Mat3 eta_noise_from_hessian(const Mat3& hess, const Mat3& base, double max_infl) {
  Mat3 r = base;
  const Mat2 info = -0.5 * (hess.block<2, 2>(0, 0) + hess.block<2, 2>(0, 0).transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> es(info);
  const double lmax = es.eigenvalues().maxCoeff();
  Eigen::Vector2d f = Eigen::Vector2d::Constant(max_infl);
  if (lmax > 0.0)
    for (int i = 0; i < 2; ++i)
      f(i) = std::clamp(lmax / std::max(es.eigenvalues()(i), lmax / max_infl), 1.0, max_infl);
  const double sigma2 = 0.5 * (base(0, 0) + base(1, 1));
  r.block<2, 2>(0, 0) = sigma2 * es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose();
  r(0, 2) = r(2, 0) = r(1, 2) = r(2, 1) = 0.0;
  return r;
}

/// The navigation filter: GPS/DR outside, entry compensation at the portal, map matching inside.
class Localizer {
 public:
  Localizer(TunnelSpec spec, Maps maps, LocalizerConfig cfg = {})
      : spec_(std::move(spec)), axis_(spec_.centerline()), maps_(std::move(maps)), cfg_(std::move(cfg)),
        lane_index_(maps_.lanes) {
    cfg_.noise.validate();
    if (!cfg_.enabled.count(FacilityKind::kFireExtinguisherLamp))
      throw InvalidArgument("LocalizerConfig: the lamp must stay enabled");
  }

  void initialize(const FilterState& s) {
    state_ = s;
    last_t_.reset();
  }
  const FilterState& state() const { return state_; }
  FilterState& mutable_state() { return state_; }
  const LocalizerConfig& config() const { return cfg_; }
  const Maps& maps() const { return maps_; }
  const Centerline& axis() const { return axis_; }
  /// Called with the state when the entry trigger fires, before compensation (error injection).
  void set_entry_hook(std::function<void(FilterState&, const SimFrame&)> hook) { entry_hook_ = std::move(hook); }

  StepDiagnostics step(const SimFrame& frame, const ExtractionResult& ex) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    StepDiagnostics diag;
    for (const auto& d : ex.detections)
      if (const int i = report_index(d.kind); i >= 0) ++diag.detected[i];
    if (ex.error) diag.errors.push_back(*ex.error);
    if (ex.lane) {
      diag.lane = ex.lane->lane;
      lane_ = ex.lane->lane;
    }

    if (last_t_) {
      const double dt = frame.t - *last_t_;
      if (dt > 0.0) state_ = time_update(state_, frame.dr_speed, frame.dr_yaw_rate, dt, cfg_.noise.Q,
                                         cfg_.exact_motion_jacobian);
    }
    last_t_ = frame.t;

    if (state_.mode == Mode::kGpsDr && cfg_.corrections && !frame.gps && ex.lane) {
      state_.mode = Mode::kEntryCompensation;
      lateral_done_ = false;
      diag.entered = true;
      if (entry_hook_) entry_hook_(state_, frame);
    }
    if (state_.mode != Mode::kGpsDr && frame.gps) state_.mode = Mode::kGpsDr;

    switch (state_.mode) {
      case Mode::kGpsDr: {
        MeasurementBundle z;
        z.gps = frame.gps;
        apply(z, diag);
        break;
      }
      case Mode::kEntryCompensation:
        entry_compensation(ex, diag);
        break;
      case Mode::kTunnelTracking:
        track(ex, diag);
        break;
    }
    diag.mode = state_.mode;
    diag.localize_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return diag;
  }

  /// Detection center in the local plane as placed by `pose`.
  Vec2 to_local(const Pose2D& pose, const FacilityDetection& d) const {
    return pose.to_global(observed(d));
  }
  Vec2 observed(const FacilityDetection& d) const {
    const Point3& c = cfg_.complete_faces ? d.center_completed : d.center;
    return {c.x, c.y};
  }

 private:
  void apply(const MeasurementBundle& z, StepDiagnostics& diag) {
    if (z.empty()) return;
    auto r = measurement_update(state_, z, cfg_.noise);
    if (r.error) diag.errors.push_back(*r.error);
    const Mode m = state_.mode;
    state_ = r.state;
    state_.mode = m;
    diag.nis = r.nis;
  }

  std::optional<Vec2> nearest_map(FacilityKind kind, const Vec2& p, double gate) const {
    std::optional<Vec2> best;
    double bd = gate;
    for (const auto& lm : maps_.landmarks.landmarks) {
      if (lm.kind != kind) continue;
      const double d = (lm.position - p).norm();
      if (d <= bd) {
        bd = d;
        best = lm.position;
      }
    }
    return best;
  }

  void entry_compensation(const ExtractionResult& ex, StepDiagnostics& diag) {
    if (lane_ < 1) {
      diag.errors.push_back(make_error(ErrorCode::kWallNotVisible, "lane unknown"));
      return;
    }
    // lateral: the nearest detected lamp with a map match
    std::optional<Vec2> lamp;
    double best_range = std::numeric_limits<double>::infinity();
    for (const auto& d : ex.detections) {
      if (d.kind != FacilityKind::kFireExtinguisherLamp) continue;
      const double range = observed(d).norm();
      if (range >= best_range) continue;
      if (auto m = nearest_map(d.kind, to_local(state_.mean, d), cfg_.compensation_gate)) {
        lamp = m;
        best_range = range;
      }
    }
    auto lat = compensate_lateral(state_, lane_, lamp, axis_, spec_);
    if (lat) {
      state_ = *lat;
      lateral_done_ = true;
      diag.lateral_compensated = true;
    } else if (!lateral_done_) {
      diag.errors.push_back(lat.error());
    }
    if (!lateral_done_) return;

    std::vector<LandmarkObservation> obs;
    for (const auto& d : ex.detections)
      if (d.kind == FacilityKind::kLcs) obs.push_back({d.kind, to_local(state_.mean, d)});
    const Association a = associate_landmarks(obs, maps_.landmarks, cfg_.compensation_gate);
    std::vector<Vec2> det;
    std::vector<Vec2> map;
    for (const auto& [i, j] : a.pairs) {
      det.push_back(obs[i].position);
      map.push_back(maps_.landmarks.landmarks[j].position);
    }
    auto lon = compensate_longitudinal(state_, det, map);
    if (!lon) {
      diag.errors.push_back(lon.error());
      return;
    }
    state_ = *lon;
    state_.mode = Mode::kTunnelTracking;
    diag.longitudinal_compensated = true;
  }

  void track(const ExtractionResult& ex, StepDiagnostics& diag) {
    MeasurementBundle z;
    if (cfg_.use_lane && ex.lane_points.points.size() >= cfg_.ndt.min_points) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Vec2> pts;
      pts.reserve(ex.lane_points.points.size());
      for (const auto& p : ex.lane_points.points) pts.push_back(p.xy());
      auto res = ndt_match(pts, maps_.lanes, lane_index_, state_.mean, cfg_.ndt);
      diag.ndt_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (!res) {
        diag.errors.push_back(res.error());
      } else {
        diag.ndt_points = res->associated;
        if (res->associated >= cfg_.ndt.min_points) {
          const auto& c = res->correction;
          z.eta = Pose2D(state_.mean.x + c.dx, state_.mean.y + c.dy, state_.mean.psi() + c.dpsi);
          z.eta_cov = eta_noise_from_hessian(res->hessian, cfg_.noise.R_eta, cfg_.eta_inflation_max);
          diag.ndt_used = true;
        }
      }
    }
    std::vector<LandmarkObservation> obs;
    std::vector<const FacilityDetection*> src;
    for (const auto& d : ex.detections) {
      if (!cfg_.enabled.count(d.kind)) continue;
      if (cfg_.skip_truncated && d.truncated) continue;
      if (observed(d).norm() < cfg_.min_landmark_range) continue;
      obs.push_back({d.kind, to_local(state_.mean, d)});
      src.push_back(&d);
    }
    const Association a = associate_landmarks(obs, maps_.landmarks, cfg_.landmark_gate);
    for (const auto& [i, j] : a.pairs) {
      const auto* d = src[i];
      RangeBearing rb;
      const Vec2 o = observed(*d);
      rb.r = o.norm();
      rb.beta = std::atan2(-o.x(), o.y());
      rb.landmark = maps_.landmarks.landmarks[j].position;
      z.pairs.push_back(rb);
      ++diag.used[report_index(d->kind)];
    }
    apply(z, diag);
  }

  TunnelSpec spec_;
  Centerline axis_;
  Maps maps_;
  LocalizerConfig cfg_;
  LaneIndex lane_index_;
  FilterState state_;
  std::optional<double> last_t_;
  int lane_ = 0;
  bool lateral_done_ = false;
  std::function<void(FilterState&, const SimFrame&)> entry_hook_;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_LOCALIZER_LOCALIZER_HPP
