#ifndef TUNNELLOC_HARNESS_OUTPUT_HPP
#define TUNNELLOC_HARNESS_OUTPUT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tunnelloc/harness/metrics.hpp"
#include "tunnelloc/harness/scenario.hpp"

namespace tunnelloc {

inline constexpr const char* kTrajectoryHeader =
    "t_s,truth_x_m,truth_y_m,truth_psi_rad,est_x_m,est_y_m,est_psi_rad,err_lat_m,err_lon_m,"
    "n_lamp,n_exitlight,n_lcs,n_exitsign,step_ms";

inline std::string trajectory_csv(const RunReport& r) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  char buf[320];
  for (const auto& s : r.steps) {
    std::snprintf(buf, sizeof buf, "%.2f,%.4f,%.4f,%.6f,%.4f,%.4f,%.6f,%.4f,%.4f,%d,%d,%d,%d,%.3f\n", s.t, s.truth.x,
                  s.truth.y, s.truth.psi(), s.estimate.x, s.estimate.y, s.estimate.psi(), s.err_lat, s.err_lon,
                  s.detected[0], s.detected[1], s.detected[2], s.detected[3], s.step_ms);
    out += buf;
  }
  return out;
}

/// `name` resolved under `dir`; throws if the result would leave `dir`.
inline std::filesystem::path confined_path(const std::filesystem::path& dir, const std::filesystem::path& name) {
  namespace fs = std::filesystem;
  if (name.is_absolute()) throw ValidationError("output path must be relative to the output directory: " + name.string());
  const fs::path base = fs::weakly_canonical(fs::absolute(dir));
  const fs::path full = fs::weakly_canonical(base / name);
  auto b = base.begin();
  auto f = full.begin();
  for (; b != base.end(); ++b, ++f)
    if (f == full.end() || *b != *f) throw ValidationError("path escapes the output directory: " + name.string());
  if (full == base) throw ValidationError("output path names the directory itself");
  return full;
}

// Minimal line/bar chart writer.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void line(std::string name, std::string color, std::vector<double> xs, std::vector<double> ys) {
    series_.push_back({std::move(name), std::move(color), std::move(xs), std::move(ys), false});
  }
  void bars(std::string name, std::string color, std::vector<double> edges, std::vector<double> counts) {
    series_.push_back({std::move(name), std::move(color), std::move(edges), std::move(counts), true});
  }

  std::string render() const {
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : series_) {
      for (double x : s.xs) x0 = std::min(x0, x), x1 = std::max(x1, x);
      for (double y : s.ys) y0 = std::min(y0, y), y1 = std::max(y1, y);
      if (s.is_bars) y0 = std::min(y0, 0.0);
    }
    if (!(x1 > x0)) x0 -= 1.0, x1 += 1.0;
    if (!(y1 > y0)) y0 -= 1.0, y1 += 1.0;
    const double pad = 0.05 * (y1 - y0);
    y1 += pad;
    if (y0 < 0.0 || !has_bars()) y0 -= pad;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
    auto py = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };

    std::string o;
    o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += text(kW / 2, 20, title_, "middle", 14);
    o += text(kW / 2, kH - 8, xlabel_, "middle", 12);
    o += "<text x=\"14\" y=\"" + num(kH / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " + num(kH / 2) +
         ")\">" + escape(ylabel_) + "</text>\n";
    o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kW - kLeft - kRight) +
         "\" height=\"" + num(kH - kTop - kBottom) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x0 + (x1 - x0) * i / 5.0;
      const double yv = y0 + (y1 - y0) * i / 5.0;
      o += text(px(xv), kH - kBottom + 16, tick(xv), "middle", 11);
      o += text(kLeft - 6, py(yv) + 4, tick(yv), "end", 11);
      o += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(kW - kRight) + "\" y2=\"" +
           num(py(yv)) + "\" stroke=\"#ddd\"/>\n";
    }
    int legend = 0;
    for (const auto& s : series_) {
      if (s.is_bars) {
        for (std::size_t i = 0; i + 1 < s.xs.size() && i < s.ys.size(); ++i) {
          const double left = px(s.xs[i]);
          const double w = std::max(0.5, px(s.xs[i + 1]) - left - 1.0);
          o += "<rect x=\"" + num(left) + "\" y=\"" + num(py(s.ys[i])) + "\" width=\"" + num(w) + "\" height=\"" +
               num(py(y0) - py(s.ys[i])) + "\" fill=\"" + s.color + "\"/>\n";
        }
      } else {
        o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
          if (i) o += ' ';
          o += num(px(s.xs[i])) + "," + num(py(s.ys[i]));
        }
        o += "\"/>\n";
      }
      const double ly = kTop + 14 + 16 * legend++;
      o += "<rect x=\"" + num(kW - kRight - 150) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           s.color + "\"/>\n";
      o += text(kW - kRight - 135, ly, s.name, "start", 11);
    }
    o += "</svg>\n";
    return o;
  }

 private:
  struct Series {
    std::string name, color;
    std::vector<double> xs, ys;
    bool is_bars;
  };
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kW = 900, kH = 420, kLeft = 70, kRight = 20, kTop = 34, kBottom = 44;

  bool has_bars() const {
    return std::any_of(series_.begin(), series_.end(), [](const Series& s) { return s.is_bars; });
  }
  static std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.1f", v);
    return b;
  }
  static std::string tick(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return b;
  }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
      }
    }
    return o;
  }
  static std::string text(double x, double y, const std::string& s, const char* anchor, int size) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
           std::to_string(size) + "\">" + escape(s) + "</text>\n";
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

/// Lateral offset from the tunnel axis against arc length; the tube is too long and thin to show
/// differences in the plane.
inline std::string trajectory_svg(const RunReport& run, const RunReport* dr_only, const TunnelSpec& spec) {
  const Centerline axis = spec.centerline();
  SvgPlot p("Trajectory (lateral offset from the tunnel axis)", "arc length s (m)", "offset d (m, right +)");
  auto track = [&](const RunReport& r, bool truth) {
    std::vector<double> xs, ys;
    for (const auto& s : r.steps) {
      const TrackCoord c = axis.project((truth ? s.truth : s.estimate).position());
      xs.push_back(c.s);
      ys.push_back(c.d);
    }
    return std::pair{xs, ys};
  };
  auto [tx, ty] = track(run, true);
  p.line("truth", "#000000", tx, ty);
  if (dr_only) {
    auto [dx, dy] = track(*dr_only, false);
    p.line("DR only", "#d62728", dx, dy);
  }
  auto [ex, ey] = track(run, false);
  p.line("corrected", "#1f77b4", ex, ey);
  return p.render();
}

inline std::string error_svg(const RunReport& run, const TunnelSpec& spec) {
  const Centerline axis = spec.centerline();
  SvgPlot p("Position error in the tunnel", "arc length s (m)", "error (m)");
  std::vector<double> xs, lat, lon;
  for (const auto& s : run.steps) {
    if (!s.in_tunnel) continue;
    xs.push_back(axis.project(s.truth.position()).s);
    lat.push_back(s.err_lat);
    lon.push_back(s.err_lon);
  }
  p.line("lateral", "#1f77b4", xs, lat);
  p.line("longitudinal", "#ff7f0e", xs, std::move(lon));
  return p.render();
}

inline std::string timing_svg(const RunReport& run) {
  SvgPlot p("Per-frame processing time", "step time (ms)", "frames");
  double hi = 0.0;
  for (const auto& s : run.steps) hi = std::max(hi, s.step_ms);
  const int bins = 40;
  const double w = hi > 0.0 ? hi / bins : 1.0;
  std::vector<double> edges(bins + 1), counts(bins, 0.0);
  for (int i = 0; i <= bins; ++i) edges[i] = i * w;
  for (const auto& s : run.steps) counts[std::min(bins - 1, static_cast<int>(s.step_ms / w))] += 1.0;
  p.bars("frames", "#2ca02c", edges, counts);
  return p.render();
}

/// Writes trajectory.csv, summary.txt and three SVG plots. Returns one message per failed file.
inline std::vector<std::string> emit_outputs(const RunReport& run, const RunReport* dr_only, const TunnelSpec& spec,
                                             const std::string& dir) {
  std::vector<std::string> errors;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return {"cannot create " + dir + ": " + ec.message()};
  const std::pair<const char*, std::string> files[] = {
      {"trajectory.csv", trajectory_csv(run)},
      {"summary.txt", format_summary(run)},
      {"trajectory.svg", trajectory_svg(run, dr_only, spec)},
      {"error.svg", error_svg(run, spec)},
      {"timing.svg", timing_svg(run)},
  };
  for (const auto& [name, text] : files) {
    const auto path = confined_path(dir, name);
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) errors.push_back("failed to write " + path.string());
  }
  return errors;
}

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_OUTPUT_HPP
