// tunnelloc: map generation, simulation, localization runs and ablation reports.
//
// Exit status: 0 ok, 1 usage, 2 invalid input or failed I/O, 3 threshold violation.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "tunnelloc/harness/map_io.hpp"
#include "tunnelloc/harness/output.hpp"
#include "tunnelloc/harness/record.hpp"
#include "tunnelloc/harness/runner.hpp"

using namespace tunnelloc;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitThreshold = 3;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> lane;
  std::string ablate;
  std::string out;
  std::string record;
  bool assert_thresholds = false;
};

std::string out_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("TUNNELLOC_OUT_DIR"); env && *env) return env;
  return "out";
}

Scenario make_scenario(const Options& o) {
  Scenario s = o.scenario.empty() ? default_scenario() : load_scenario(o.scenario);
  if (o.seed) {
    s.seed = *o.seed;
    s.sim.seed = *o.seed;
  }
  if (o.lane) s.sim.route.lane = *o.lane;
  if (!o.ablate.empty()) apply_ablation(s, o.ablate);
  if (o.assert_thresholds) s.assert_thresholds = true;
  s.validate();
  return s;
}

fs::path prepare(const Options& o, const std::string& name) {
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  const fs::path p = confined_path(dir, name);
  fs::create_directories(p.parent_path());
  return p;
}

std::vector<Variant> with_dr_only(const Scenario& s) {
  Variant dr = primary_variant(s);
  dr.name = "dr_only";
  dr.config.corrections = false;
  return {primary_variant(s), dr};
}

int finish_run(const Scenario& s, const Options& o, const std::vector<RunReport>& reports) {
  const RunReport& run = reports[0];
  std::cout << format_summary(run);
  const std::string dir = out_dir(o);
  const auto errs = emit_outputs(run, &reports[1], s.tunnel, dir);
  for (const auto& e : errs) std::cerr << "error: " << e << "\n";
  if (!errs.empty()) return kExitInvalid;
  std::cerr << "outputs written to " << dir << "\n";
  if (s.assert_thresholds) {
    const auto v = check_thresholds(run, s.thresholds);
    for (const auto& m : v) std::cerr << "threshold: " << m << "\n";
    if (!v.empty()) return kExitThreshold;
  }
  return 0;
}

int cmd_gen_map(const Options& o) {
  const Scenario s = make_scenario(o);
  const Maps maps = scenario_maps(s);
  const fs::path lm = prepare(o, "landmarks.csv");
  const fs::path ln = prepare(o, "lanes.csv");
  const std::size_t bytes = write_maps(maps, s.origin, lm.string(), ln.string());
  std::printf("%zu landmarks, %zu lane gaussians, %zu bytes\n", maps.landmarks.landmarks.size(),
              maps.lanes.gaussians.size(), bytes);
  return 0;
}

int cmd_simulate(const Options& o) {
  const Scenario s = make_scenario(o);
  const fs::path path = prepare(o, o.record.empty() ? "frames.tlrc" : o.record);
  const Placement placement = place_facilities(s.tunnel, s.seed);
  SimConfig cfg = s.sim;
  cfg.seed = s.seed;
  DriveSimulator sim(s.tunnel, placement, cfg);
  RecordWriter w(path.string(), record_meta(s));
  std::size_t n = 0;
  std::size_t points = 0;
  while (auto f = sim.next()) {
    w.write(*f);
    ++n;
    points += f->scan.points.size();
  }
  w.close();
  std::printf("%zu frames, %zu points, recorded to %s\n", n, points, path.string().c_str());
  return 0;
}

int cmd_run(const Options& o) {
  const Scenario s = make_scenario(o);
  std::optional<RecordWriter> writer;
  RunOptions opt;
  if (!o.record.empty()) {
    writer.emplace(prepare(o, o.record).string(), record_meta(s));
    opt.record = &*writer;
  }
  prepare(o, "summary.txt");
  const auto reports = run_lockstep(s, with_dr_only(s), opt);
  return finish_run(s, o, reports);
}

int cmd_replay(const Options& o) {
  if (o.record.empty()) throw CLI::RequiredError("--record");
  const Scenario s = make_scenario(o);
  RecordReader reader(o.record);
  if (reader.meta() != record_meta(s))
    throw ValidationError("recording was made from a different scenario:\n" + reader.meta() +
                          "expected:\n" + record_meta(s));
  prepare(o, "summary.txt");
  const auto reports = replay(s, reader, with_dr_only(s));
  return finish_run(s, o, reports);
}

// Ablation matrix over the requested lane (or all lanes) with the scenario's seed.
int cmd_report(const Options& o) {
  const Scenario base = make_scenario(o);
  std::vector<int> lanes;
  if (o.lane) lanes = {*o.lane};
  else
    for (int l = 1; l <= base.tunnel.lane_count; ++l) lanes.push_back(l);

  std::string csv = "lane,variant,lateral_rms_m,longitudinal_rms_m,terminal_error_m,n_ge1,n_ge2,n_ge3\n";
  std::string text;
  char buf[256];
  bool violated = false;
  for (int lane : lanes) {
    Scenario s = base;
    s.sim.route.lane = lane;
    s.validate();
    const auto reports = run_lockstep(s, ablation_variants(s));
    std::snprintf(buf, sizeof buf, "lane %d, seed %llu\n  %-18s %10s %10s %10s\n", lane,
                  static_cast<unsigned long long>(s.seed), "variant", "lat RMS", "lon RMS", "terminal");
    text += buf;
    for (const auto& r : reports) {
      const auto& m = r.summary;
      std::snprintf(buf, sizeof buf, "  %-18s %10.4f %10.4f %10.4f\n", r.variant.c_str(), m.lateral_rms,
                    m.longitudinal_rms, m.terminal_error);
      text += buf;
      std::snprintf(buf, sizeof buf, "%d,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", lane, r.variant.c_str(),
                    m.lateral_rms, m.longitudinal_rms, m.terminal_error, m.detection.at_least[0],
                    m.detection.at_least[1], m.detection.at_least[2]);
      csv += buf;
    }
    const auto& d = reports[0].summary.detection;
    std::snprintf(buf, sizeof buf, "  detection N>=1 %.1f%% N>=2 %.1f%% N>=3 %.1f%%\n", 100.0 * d.at_least[0],
                  100.0 * d.at_least[1], 100.0 * d.at_least[2]);
    text += buf;
    for (int k = 0; k < 4; ++k) {
      std::snprintf(buf, sizeof buf, "  share %-22s %5.1f%%\n", std::string(to_string(kReportKinds[k])).c_str(),
                    100.0 * d.share[k]);
      text += buf;
    }
    if (s.assert_thresholds)
      for (const auto& m : check_thresholds(reports[0], s.thresholds)) {
        std::cerr << "threshold (lane " << lane << "): " << m << "\n";
        violated = true;
      }
  }
  std::cout << text;
  for (const auto& [name, body] : {std::pair{"report.txt", text}, std::pair{"report.csv", csv}}) {
    std::ofstream f(prepare(o, name), std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error(std::string("failed to write ") + name);
  }
  return violated ? kExitThreshold : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tunnel vehicle localization workbench"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "INI scenario file (defaults built in)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--lane", o.lane, "driving lane, 1 = leftmost");
    sub->add_option("--ablate", o.ablate, "comma-separated kinds to disable (LCS, ExitSign, ExitLight, lane)");
    sub->add_option("--out", o.out, "output directory (else $TUNNELLOC_OUT_DIR, else ./out)");
    sub->add_flag("--assert-thresholds", o.assert_thresholds, "exit 3 when an accuracy or timing threshold fails");
  };

  std::map<CLI::App*, int (*)(const Options&)> handlers;
  auto* gen = app.add_subcommand("gen-map", "write the landmark and lane maps as CSV");
  common(gen);
  handlers[gen] = cmd_gen_map;
  auto* sim = app.add_subcommand("simulate", "simulate a drive and record its frames");
  common(sim);
  sim->add_option("--record", o.record, "recording name inside the output directory (frames.tlrc)");
  handlers[sim] = cmd_simulate;
  auto* run = app.add_subcommand("run", "simulate and localize, writing trajectory, summary and plots");
  common(run);
  run->add_option("--record", o.record, "also record frames under this name in the output directory");
  handlers[run] = cmd_run;
  auto* rep = app.add_subcommand("replay", "localize over a recording made with the same scenario");
  common(rep);
  rep->add_option("--record", o.record, "recording to read")->required()->check(CLI::ExistingFile);
  handlers[rep] = cmd_replay;
  auto* report = app.add_subcommand("report", "ablation and detection tables per lane");
  common(report);
  handlers[report] = cmd_report;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    for (auto& [sub, fn] : handlers)
      if (sub->parsed()) return fn(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const RecordError& e) {
    std::cerr << "invalid recording: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}
