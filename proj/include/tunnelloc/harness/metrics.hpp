#ifndef TUNNELLOC_HARNESS_METRICS_HPP
#define TUNNELLOC_HARNESS_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tunnelloc/harness/scenario.hpp"
#include "tunnelloc/localizer/localizer.hpp"

namespace tunnelloc {

struct StepRecord {
  int index = 0;
  double t = 0.0;
  Pose2D truth;
  Pose2D estimate;
  Mode mode = Mode::kGpsDr;
  bool in_tunnel = false;
  double err_lat = 0.0;  // truth-heading frame, right +
  double err_lon = 0.0;  // truth-heading frame, forward +
  std::array<int, 4> detected{};  // report column order
  std::array<int, 4> used{};
  int lane = 0;
  bool entered = false;
  bool lateral_compensated = false;
  bool longitudinal_compensated = false;
  int error_count = 0;
  double extract_ms = 0.0;
  double localize_ms = 0.0;
  double ndt_ms = 0.0;
  double step_ms = 0.0;
};

/// Splits estimate - truth into the truth vehicle's lateral and longitudinal axes.
inline std::pair<double, double> error_components(const Pose2D& truth, const Pose2D& estimate) {
  const Vec2 e = estimate.position() - truth.position();
  return {e.dot(truth.right()), e.dot(truth.forward())};
}

struct DetectionTable {
  std::size_t scans = 0;
  std::array<double, 3> at_least{};  // fraction of scans with >= 1, 2, 3 facility points
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> share{};  // per kind, sums to 1 when anything was detected
};

inline DetectionTable detection_table(const std::vector<StepRecord>& steps) {
  DetectionTable t;
  std::array<std::size_t, 3> ge{};
  for (const auto& s : steps) {
    if (!s.in_tunnel) continue;
    ++t.scans;
    int n = 0;
    for (int k = 0; k < 4; ++k) {
      n += s.detected[k];
      t.counts[k] += static_cast<std::size_t>(s.detected[k]);
    }
    for (int k = 0; k < 3; ++k)
      if (n >= k + 1) ++ge[k];
  }
  std::size_t total = 0;
  for (auto c : t.counts) total += c;
  for (int k = 0; k < 3; ++k) t.at_least[k] = t.scans ? static_cast<double>(ge[k]) / t.scans : 0.0;
  for (int k = 0; k < 4; ++k) t.share[k] = total ? static_cast<double>(t.counts[k]) / total : 0.0;
  return t;
}

struct Summary {
  std::size_t rms_samples = 0;
  double lateral_rms = 0.0;
  double longitudinal_rms = 0.0;
  double mean_step_ms = 0.0;
  double max_step_ms = 0.0;
  double terminal_error = 0.0;  // planar error at the last in-tunnel frame
  std::optional<std::pair<double, double>> entry_residual;  // (lat, lon) when tracking begins
  std::optional<double> entry_time;
  std::optional<double> tracking_time;
  DetectionTable detection;
};

struct RunReport {
  std::string name;
  std::string variant = "all";
  std::uint64_t seed = 1;
  int lane = 2;
  std::string enabled;
  bool use_lane = true;
  bool corrections = true;
  std::vector<StepRecord> steps;
  Summary summary;
};

/// RMS covers in-tunnel frames in map-matching mode (all in-tunnel frames when corrections are off).
inline Summary summarize(const std::vector<StepRecord>& steps, bool corrections) {
  Summary s;
  double sl = 0.0;
  double so = 0.0;
  double st = 0.0;
  for (const auto& r : steps) {
    st += r.step_ms;
    s.max_step_ms = std::max(s.max_step_ms, r.step_ms);
    if (r.entered && !s.entry_time) s.entry_time = r.t;
    if (r.longitudinal_compensated && !s.entry_residual) {
      s.entry_residual = std::pair{r.err_lat, r.err_lon};
      s.tracking_time = r.t;
    }
    if (!r.in_tunnel) continue;
    s.terminal_error = std::hypot(r.err_lat, r.err_lon);
    if (corrections && r.mode != Mode::kTunnelTracking) continue;
    sl += r.err_lat * r.err_lat;
    so += r.err_lon * r.err_lon;
    ++s.rms_samples;
  }
  if (s.rms_samples) {
    s.lateral_rms = std::sqrt(sl / s.rms_samples);
    s.longitudinal_rms = std::sqrt(so / s.rms_samples);
  }
  if (!steps.empty()) s.mean_step_ms = st / steps.size();
  s.detection = detection_table(steps);
  return s;
}

inline std::vector<std::string> check_thresholds(const RunReport& r, const Thresholds& th) {
  std::vector<std::string> v;
  const auto& s = r.summary;
  auto over = [&](const char* what, double val, double lim) {
    if (!(val <= lim)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s %.4f exceeds %.4f", what, val, lim);
      v.emplace_back(buf);
    }
  };
  if (s.rms_samples == 0) v.emplace_back("no frames were tracked inside the tunnel");
  over("lateral RMS (m)", s.lateral_rms, th.lateral_rms);
  over("longitudinal RMS (m)", s.longitudinal_rms, th.longitudinal_rms);
  over("mean step (ms)", s.mean_step_ms, th.mean_step_ms);
  over("max step (ms)", s.max_step_ms, th.max_step_ms);
  if (!(s.detection.at_least[0] >= th.detection_rate)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "detection rate %.4f below %.4f", s.detection.at_least[0], th.detection_rate);
    v.emplace_back(buf);
  }
  return v;
}

/// Wall-clock timings are the only non-deterministic fields; `include_timing = false` drops them.
inline std::string format_summary(const RunReport& r, bool include_timing = true) {
  const auto& s = r.summary;
  std::string out;
  char buf[256];
  auto line = [&](const char* f, auto... a) {
    std::snprintf(buf, sizeof buf, f, a...);
    out += buf;
    out += '\n';
  };
  line("scenario: %s", r.name.c_str());
  line("variant: %s", r.variant.c_str());
  line("seed: %llu", static_cast<unsigned long long>(r.seed));
  line("lane: %d", r.lane);
  line("enabled: %s%s", r.enabled.c_str(), r.use_lane ? ",LaneMarking" : "");
  line("corrections: %s", r.corrections ? "on" : "off");
  line("frames: %zu", r.steps.size());
  line("rms_frames: %zu", s.rms_samples);
  line("lateral_rms_m: %.4f", s.lateral_rms);
  line("longitudinal_rms_m: %.4f", s.longitudinal_rms);
  line("terminal_error_m: %.4f", s.terminal_error);
  if (s.entry_residual)
    line("entry_residual_m: lat %.4f lon %.4f", s.entry_residual->first, s.entry_residual->second);
  if (include_timing) line("step_ms: mean %.2f max %.2f", s.mean_step_ms, s.max_step_ms);
  const auto& d = s.detection;
  line("detection_scans: %zu", d.scans);
  line("detection_rate: N>=1 %.1f%% N>=2 %.1f%% N>=3 %.1f%%", 100.0 * d.at_least[0], 100.0 * d.at_least[1],
       100.0 * d.at_least[2]);
  for (int k = 0; k < 4; ++k)
    line("share_%s: %.1f%% (%zu)", std::string(to_string(kReportKinds[k])).c_str(), 100.0 * d.share[k],
         d.counts[k]);
  return out;
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_METRICS_HPP
