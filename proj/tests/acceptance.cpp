// Acceptance run: one PASS/FAIL line per criterion on stdout, per-run details on stderr.
// Exit status is 0 once every criterion has been evaluated; with --strict it is the number of
// failed criteria.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "kernel_checks.hpp"
#include "tunnelloc/harness/map_io.hpp"
#include "tunnelloc/harness/runner.hpp"

using namespace tunnelloc;

namespace {

struct Criterion {
  int id;
  const char* title;
  bool pass = false;
  std::string detail;
};

struct LaneRun {
  int lane;
  int seed;
  double wall_s;
  std::map<std::string, RunReport> by_variant;
};

const RunReport& get(const LaneRun& r, const char* name) { return r.by_variant.at(name); }

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

std::vector<Variant> variants_for(const Scenario& sc, bool full) {
  std::vector<Variant> out;
  for (auto& v : ablation_variants(sc))
    if (full || v.name == "all" || v.name == "dr_only") out.push_back(v);
  if (!full) return out;
  // lamp-only plus one facility group at a time
  using K = FacilityKind;
  LocalizerConfig lamp = out[0].config;
  lamp.enabled = {K::kFireExtinguisherLamp};
  lamp.use_lane = false;
  auto with_lcs = lamp;
  with_lcs.enabled.insert({K::kLcs, K::kExitSign});
  auto with_el = lamp;
  with_el.enabled.insert(K::kExitLight);
  auto with_lane = lamp;
  with_lane.use_lane = true;
  out.push_back({"lamp_lcs_exit_sign", with_lcs});
  out.push_back({"lamp_exit_light", with_el});
  out.push_back({"lamp_lane_marking", with_lane});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;
  using clock = std::chrono::steady_clock;

  std::vector<LaneRun> runs;
  for (int lane = 1; lane <= 3; ++lane) {
    for (int seed = 1; seed <= 5; ++seed) {
      const Scenario sc = default_scenario(lane, static_cast<std::uint64_t>(seed));
      const auto t0 = clock::now();
      auto reports = run_lockstep(sc, variants_for(sc, lane == 2));
      LaneRun r{lane, seed, std::chrono::duration<double>(clock::now() - t0).count(), {}};
      for (auto& rep : reports) r.by_variant.emplace(rep.variant, std::move(rep));
      const auto& s = get(r, "all").summary;
      std::fprintf(stderr,
                   "lane %d seed %d: lat %.4f lon %.4f terminal %.4f dr_terminal %.3f step mean %.1f max %.1f ms "
                   "N>=1 %.1f%% (%.1f s for %zu variants)\n",
                   lane, seed, s.lateral_rms, s.longitudinal_rms, s.terminal_error,
                   get(r, "dr_only").summary.terminal_error, s.mean_step_ms, s.max_step_ms,
                   100.0 * s.detection.at_least[0], r.wall_s, r.by_variant.size());
      runs.push_back(std::move(r));
    }
  }

  const char* titles[] = {"end-to-end accuracy", "drift correction",        "entry compensation",
                          "timing",              "detection",               "map size",
                          "kernel property suites", "ablation direction"};
  std::vector<Criterion> crit;
  for (int i = 0; i < 8; ++i) crit.push_back(Criterion{i + 1, titles[i], false, {}});

  {  // 1
    double lat = 0.0, lon = 0.0, wall = 0.0;
    bool ok = true;
    for (const auto& r : runs) {
      const auto& s = get(r, "all").summary;
      lat = std::max(lat, s.lateral_rms);
      lon = std::max(lon, s.longitudinal_rms);
      ok = ok && s.rms_samples > 0;
    }
    // runtime of a single localizer run; the lockstep runs above drive several variants at once
    for (int lane = 1; lane <= 3; ++lane) {
      const auto t0 = clock::now();
      run_scenario(default_scenario(lane, 1));
      const double w = std::chrono::duration<double>(clock::now() - t0).count();
      std::fprintf(stderr, "runtime lane %d seed 1: %.1f s\n", lane, w);
      wall = std::max(wall, w);
    }
    crit[0].pass = ok && lat <= 0.15 && lon <= 0.30 && wall <= 60.0;
    crit[0].detail = fmt("worst lateral RMS %.4f m (<= 0.15), worst longitudinal RMS %.4f m (<= 0.30), "
                         "slowest single run %.1f s (<= 60) over 3 lanes x 5 seeds",
                         lat, lon, wall);
  }
  {  // 2
    double worst = 1e300;
    for (const auto& r : runs) {
      const double corr = get(r, "all").summary.terminal_error;
      const double dr = get(r, "dr_only").summary.terminal_error;
      worst = std::min(worst, dr / std::max(corr, 1e-12));
    }
    crit[1].pass = worst >= 5.0;
    crit[1].detail = fmt("smallest DR-only / corrected terminal error ratio %.1f (>= 5) over 15 runs", worst);
  }
  {  // 3: Table V errors on their lanes, seeds 1-10
    const double injected[3][2] = {{0.26, 0.21}, {3.57, 0.25}, {2.02, -0.12}};
    double worst_lat = 0.0, worst_lon = 0.0;
    int ok = 0, total = 0;
    for (int lane = 1; lane <= 3; ++lane) {
      for (int seed = 1; seed <= 10; ++seed) {
        const Scenario sc = default_scenario(lane, static_cast<std::uint64_t>(seed));
        RunOptions opt;
        opt.entry_error = Vec2(injected[lane - 1][0], injected[lane - 1][1]);
        opt.stop_after = [](const StepRecord& s) { return s.longitudinal_compensated; };
        const RunReport rep = run_scenario(sc, opt);
        ++total;
        const auto& res = rep.summary.entry_residual;
        if (!res || !rep.summary.entry_time) {
          std::fprintf(stderr, "entry lane %d seed %d: tracking never began\n", lane, seed);
          continue;
        }
        worst_lat = std::max(worst_lat, std::abs(res->first));
        worst_lon = std::max(worst_lon, std::abs(res->second));
        if (std::abs(res->first) <= 0.3 && std::abs(res->second) <= 0.5) ++ok;
        std::fprintf(stderr, "entry lane %d seed %d: injected (%.2f, %.2f) residual (%.4f, %.4f)\n", lane, seed,
                     injected[lane - 1][0], injected[lane - 1][1], res->first, res->second);
      }
    }
    crit[2].pass = ok == total;
    crit[2].detail = fmt("%d/%d runs within limits; worst residual %.4f m lateral (<= 0.3), %.4f m longitudinal "
                         "(<= 0.5); errors (0.26,0.21)/(3.57,0.25)/(2.02,-0.12) on lanes 1/2/3, seeds 1-10",
                         ok, total, worst_lat, worst_lon);
  }
  {  // 4
    double mean = 0.0, mx = 0.0;
    for (const auto& r : runs) {
      mean = std::max(mean, get(r, "all").summary.mean_step_ms);
      mx = std::max(mx, get(r, "all").summary.max_step_ms);
    }
    crit[3].pass = mean <= 100.0 && mx <= 200.0;
    crit[3].detail = fmt("highest per-run mean step %.1f ms (<= 100), max step %.1f ms (<= 200), 32-channel scans",
                         mean, mx);
  }
  {  // 5
    double worst = 1.0;
    int ordered = 0;
    for (const auto& r : runs) {
      const auto& d = get(r, "all").summary.detection;
      worst = std::min(worst, d.at_least[0]);
      if (d.share[0] > d.share[1] && d.share[1] > d.share[2] && d.share[2] > d.share[3]) ++ordered;
    }
    crit[4].pass = worst >= 0.85 && ordered == static_cast<int>(runs.size());
    crit[4].detail = fmt("lowest N>=1 rate %.1f%% (>= 85%%); share order lamp > exit light > LCS > exit sign "
                         "in %d/%zu runs",
                         100.0 * worst, ordered, runs.size());
  }
  {  // 6
    std::size_t worst = 0;
    for (int seed = 1; seed <= 5; ++seed) {
      const Scenario sc = default_scenario(2, static_cast<std::uint64_t>(seed));
      const Maps maps = scenario_maps(sc);
      worst = std::max(worst, landmark_csv(maps.landmarks, sc.origin).size() + lane_csv(maps.lanes, sc.origin).size());
    }
    crit[5].pass = worst <= 120000;
    crit[5].detail = fmt("largest landmark + lane map %.1f kB (<= 120 kB) for the 1.5 km tunnel", worst / 1000.0);
  }
  {  // 7
    const checks::Check cs[] = {checks::ndt_gradient(),          checks::icp_recovery(),
                                checks::landmark_jacobian_fd(),  checks::remove_wall_oracle(),
                                checks::associate_lane_oracle(), checks::associate_landmarks_oracle(),
                                checks::ekf_consistency_check()};
    const char* names[] = {"ndt-gradient", "icp", "jacobian", "remove-wall", "assoc-lane", "assoc-landmarks",
                           "ekf"};
    int passed = 0;
    std::string failed;
    for (int i = 0; i < 7; ++i) {
      std::fprintf(stderr, "kernel %s: %s %s\n", names[i], cs[i].pass ? "ok" : "FAILED", cs[i].detail.c_str());
      if (cs[i].pass) ++passed;
      else failed += std::string(" ") + names[i];
    }
    crit[6].pass = passed == 7;
    crit[6].detail = fmt("%d/7 suites pass", passed) + (failed.empty() ? "" : " (failed:" + failed + ")") + "; " +
                     cs[6].detail;
  }
  {  // 8
    int full = 0, literal = 0;
    std::string per_seed;
    const char* removed[] = {"no_lcs_exit_sign", "no_exit_light", "no_lane_marking"};
    const char* added[] = {"lamp_lcs_exit_sign", "lamp_exit_light", "lamp_lane_marking"};
    int clause_ok[3] = {0, 0, 0};
    int literal_ok[3] = {0, 0, 0};
    for (const auto& r : runs) {
      if (r.lane != 2) continue;
      const double all = get(r, "all").summary.longitudinal_rms;
      const double lamp = get(r, "lamp_only").summary.longitudinal_rms;
      bool f = true, l = true;
      for (int k = 0; k < 3; ++k) {
        const bool a = all < get(r, removed[k]).summary.longitudinal_rms;
        const bool b = get(r, added[k]).summary.longitudinal_rms < lamp;
        clause_ok[k] += a;
        literal_ok[k] += b;
        f = f && a;
        l = l && b;
      }
      full += f;
      literal += l;
      std::fprintf(stderr,
                   "ablation seed %d lon RMS: all %.5f | minus LCS&sign %.5f, minus exit light %.5f, minus lane "
                   "%.5f | lamp %.5f, +LCS&sign %.5f, +exit light %.5f, +lane %.5f\n",
                   r.seed, all, get(r, removed[0]).summary.longitudinal_rms,
                   get(r, removed[1]).summary.longitudinal_rms, get(r, removed[2]).summary.longitudinal_rms, lamp,
                   get(r, added[0]).summary.longitudinal_rms, get(r, added[1]).summary.longitudinal_rms,
                   get(r, added[2]).summary.longitudinal_rms);
    }
    crit[7].pass = full == 5;
    crit[7].detail =
        fmt("lane 2, seeds 1-5, all-facilities strictly below each removal: LCS&exit sign %d/5, exit light %d/5, "
            "lane marking %d/5",
            clause_ok[0], clause_ok[1], clause_ok[2]) +
        fmt("; added to lamp-only: LCS&exit sign %d/5, exit light %d/5, lane marking %d/5", literal_ok[0],
            literal_ok[1], literal_ok[2]);
  }

  int failed = 0;
  for (const auto& c : crit) {
    std::printf("C%d %s %s: %s\n", c.id, c.pass ? "PASS" : "FAIL", c.title, c.detail.c_str());
    if (!c.pass) ++failed;
  }
  std::printf("%d/8 criteria passed\n", 8 - failed);
  std::fflush(stdout);
  return strict ? failed : 0;
}
