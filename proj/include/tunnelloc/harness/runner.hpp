#ifndef TUNNELLOC_HARNESS_RUNNER_HPP
#define TUNNELLOC_HARNESS_RUNNER_HPP

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tunnelloc/extraction/extraction.hpp"
#include "tunnelloc/harness/metrics.hpp"
#include "tunnelloc/harness/record.hpp"
#include "tunnelloc/harness/scenario.hpp"
#include "tunnelloc/localizer/localizer.hpp"
#include "tunnelloc/sim/scan_sim.hpp"

namespace tunnelloc {

/// One localizer configuration driven in lockstep with others over the same frames.
struct Variant {
  std::string name;
  LocalizerConfig config;
};

struct RunOptions {
  /// (lateral, longitudinal) estimate error imposed at the entry trigger, truth-heading frame.
  std::optional<Vec2> entry_error;
  RecordWriter* record = nullptr;
  /// Ends the run after the first frame whose primary-variant record satisfies this.
  std::function<bool(const StepRecord&)> stop_after;
};

inline Variant primary_variant(const Scenario& s) { return {"all", s.localizer_config()}; }

/// The four Table-style ablations plus DR-only, all derived from the scenario's noise settings.
inline std::vector<Variant> ablation_variants(const Scenario& s) {
  using K = FacilityKind;
  std::vector<Variant> v;
  LocalizerConfig all = s.localizer_config();
  all.enabled = all_landmark_kinds();
  all.use_lane = true;
  v.push_back({"all", all});
  auto no_lcs = all;
  no_lcs.enabled.erase(K::kLcs);
  no_lcs.enabled.erase(K::kExitSign);
  v.push_back({"no_lcs_exit_sign", no_lcs});
  auto no_el = all;
  no_el.enabled.erase(K::kExitLight);
  v.push_back({"no_exit_light", no_el});
  auto no_lane = all;
  no_lane.use_lane = false;
  v.push_back({"no_lane_marking", no_lane});
  auto lamp = all;
  lamp.enabled = {K::kFireExtinguisherLamp};
  lamp.use_lane = false;
  v.push_back({"lamp_only", lamp});
  auto dr = all;
  dr.corrections = false;
  v.push_back({"dr_only", dr});
  return v;
}

inline std::string record_meta(const Scenario& s) {
  return "name=" + s.name + "\nseed=" + std::to_string(s.seed) + "\nlane=" + std::to_string(s.sim.route.lane) + "\n";
}

/// Drives every variant over frames from `next()` (a simulator or a recording).
template <typename NextFrame>
std::vector<RunReport> run_frames(const Scenario& sc, const Maps& maps, const std::vector<Variant>& variants,
                                  NextFrame&& next, const RunOptions& opt = {}) {
  if (variants.empty()) throw ValidationError("run_frames: no variants");
  const Centerline axis = sc.tunnel.centerline();
  const Extractor extractor(sc.tunnel);
  std::vector<Localizer> locs;
  std::vector<RunReport> reports;
  for (const auto& v : variants) {
    locs.emplace_back(sc.tunnel, maps, v.config);
    if (opt.entry_error) {
      const Vec2 e = *opt.entry_error;
      locs.back().set_entry_hook([e](FilterState& s, const SimFrame& f) {
        const Vec2 p = f.truth.to_global(e);
        s.mean = Pose2D(p.x(), p.y(), s.mean.psi());
      });
    }
    RunReport r;
    r.name = sc.name;
    r.variant = v.name;
    r.seed = sc.seed;
    r.lane = sc.sim.route.lane;
    r.enabled = kinds_to_string(v.config.enabled);
    r.use_lane = v.config.use_lane;
    r.corrections = v.config.corrections;
    reports.push_back(std::move(r));
  }

  std::mt19937_64 init_rng(sc.seed ^ 0x1d0c0ffeeULL);
  std::normal_distribution<double> n01(0.0, 1.0);
  bool first = true;
  while (std::optional<SimFrame> frame = next()) {
    if (opt.record) opt.record->write(*frame);
    if (first) {
      if (!frame->gps) throw ValidationError("the first frame must carry a GPS fix");
      FilterState s0;
      s0.mean = Pose2D(frame->gps->x(), frame->gps->y(),
                       frame->truth.psi() + sc.initial_heading_sigma_deg * kDegToRad * n01(init_rng));
      const double vp = sc.noise.R_gps(0, 0);
      const double vh = std::pow(0.5 * kDegToRad, 2);
      s0.cov = Eigen::Vector3d(vp, vp, vh).asDiagonal();
      for (auto& l : locs) l.initialize(s0);
      first = false;
    }
    // the unbending curvature comes from the primary estimate
    double curvature = 0.0;
    const double s_est = axis.project(locs.front().state().mean.position()).s;
    if (s_est >= 0.0 && s_est <= axis.length()) curvature = axis.curvature_at(s_est);
    const ExtractionResult ex = extractor.run(frame->scan, curvature);
    const double s_truth = axis.project(frame->truth.position()).s;
    const bool in_tunnel = s_truth >= 0.0 && s_truth <= axis.length();

    for (std::size_t i = 0; i < locs.size(); ++i) {
      const StepDiagnostics d = locs[i].step(*frame, ex);
      StepRecord r;
      r.index = frame->index;
      r.t = frame->t;
      r.truth = frame->truth;
      r.estimate = locs[i].state().mean;
      r.mode = d.mode;
      r.in_tunnel = in_tunnel;
      std::tie(r.err_lat, r.err_lon) = error_components(r.truth, r.estimate);
      r.detected = d.detected;
      r.used = d.used;
      r.lane = d.lane;
      r.entered = d.entered;
      r.lateral_compensated = d.lateral_compensated;
      r.longitudinal_compensated = d.longitudinal_compensated;
      r.error_count = static_cast<int>(d.errors.size());
      r.extract_ms = ex.total_ms;
      r.localize_ms = d.localize_ms;
      r.ndt_ms = d.ndt_ms;
      r.step_ms = ex.total_ms + d.localize_ms;
      reports[i].steps.push_back(r);
    }
    if (opt.stop_after && opt.stop_after(reports.front().steps.back())) break;
  }
  for (auto& r : reports) r.summary = summarize(r.steps, r.corrections);
  return reports;
}

inline Maps scenario_maps(const Scenario& sc) { return build_maps(sc.tunnel, place_facilities(sc.tunnel, sc.seed)); }

inline std::vector<RunReport> run_lockstep(const Scenario& sc, const std::vector<Variant>& variants,
                                           const RunOptions& opt = {}) {
  sc.validate();
  const Placement placement = place_facilities(sc.tunnel, sc.seed);
  const Maps maps = build_maps(sc.tunnel, placement);
  SimConfig cfg = sc.sim;
  cfg.seed = sc.seed;
  DriveSimulator sim(sc.tunnel, placement, cfg);
  return run_frames(sc, maps, variants, [&] { return sim.next(); }, opt);
}

inline RunReport run_scenario(const Scenario& sc, const RunOptions& opt = {}) {
  return run_lockstep(sc, {primary_variant(sc)}, opt).front();
}

/// Re-runs the localizer over a recording made from the same scenario.
inline std::vector<RunReport> replay(const Scenario& sc, RecordReader& reader, const std::vector<Variant>& variants) {
  sc.validate();
  return run_frames(sc, scenario_maps(sc), variants, [&] { return reader.next(); });
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_RUNNER_HPP
