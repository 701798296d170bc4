#pragma once

// Minimal self-contained SVG line charts for the four figure kinds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qotto/cycle_engine.hpp"
#include "qotto/error.hpp"
#include "qotto/level_study.hpp"
#include "qotto/temp_fit.hpp"
#include "qotto/thermo.hpp"

namespace qotto::io {

enum class PlotKind { entropy_vs_time, power_vs_entropy, n_level_comparison, temperature_trace };

constexpr std::string_view to_string(PlotKind k) noexcept {
  switch (k) {
    case PlotKind::entropy_vs_time: return "entropy_vs_time";
    case PlotKind::power_vs_entropy: return "power_vs_entropy";
    case PlotKind::n_level_comparison: return "n_level_comparison";
    case PlotKind::temperature_trace: return "temperature_trace";
  }
  return "unknown";
}

using Point = std::pair<double, double>;

struct Series {
  std::string label;
  std::vector<Point> points;
};

/// Shaded polygon under one stretch of a curve (down to y = 0), or a
/// vertical band when `vertical` is set.
struct Shade {
  Regime regime = Regime::transition;
  std::vector<Point> outline;
  bool vertical = false;
  double x0 = 0.0, x1 = 0.0;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Shade> shades;
  std::optional<Point> marker;
  std::string marker_label;
};

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(x) < 1e-12 ? 0.0 : x);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* shade_color(Regime r) {
  switch (r) {
    case Regime::positive: return "#d62728";
    case Regime::negative: return "#1f77b4";
    case Regime::transition: return "#999999";
  }
  return "#999999";
}

inline double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace detail

inline std::string render_svg(const PlotSpec& spec) {
  std::size_t total = 0;
  for (const auto& s : spec.series) total += s.points.size();
  if (total == 0) qotto::detail::fail(ErrorKind::domain, "cannot plot an empty curve");

  double xmin = INFINITY, xmax = -INFINITY, ymin = 0.0, ymax = -INFINITY;
  for (const auto& s : spec.series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax - xmin <= 0.0) {
    xmin -= 0.5 * std::max(1.0, std::abs(xmin));
    xmax += 0.5 * std::max(1.0, std::abs(xmax));
  }
  if (ymax - ymin <= 0.0) ymax = ymin + std::max(1.0, std::abs(ymin));
  ymax += 0.05 * (ymax - ymin);

  constexpr double W = 640, H = 440, L = 70, R = 20, T = 40, B = 60;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" viewBox=\"0 0 640 440\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
  o += "<text x=\"" + detail::num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::escape(spec.title) + "</text>\n";

  for (const auto& sh : spec.shades) {
    const char* color = detail::shade_color(sh.regime);
    if (sh.vertical) {
      const double a = sx(std::max(sh.x0, xmin)), b = sx(std::min(sh.x1, xmax));
      o += "<rect class=\"regime-" + std::string(to_string(sh.regime)) + "\" x=\"" + detail::num(a) + "\" y=\"" +
           detail::num(T) + "\" width=\"" + detail::num(std::max(0.0, b - a)) + "\" height=\"" +
           detail::num(H - T - B) + "\" fill=\"" + color + "\" fill-opacity=\"0.15\"/>\n";
    } else if (!sh.outline.empty()) {
      std::string pts;
      for (const auto& [x, y] : sh.outline) pts += detail::num(sx(x)) + "," + detail::num(sy(y)) + " ";
      pts += detail::num(sx(sh.outline.back().first)) + "," + detail::num(sy(0.0)) + " ";
      pts += detail::num(sx(sh.outline.front().first)) + "," + detail::num(sy(0.0));
      o += "<polygon class=\"regime-" + std::string(to_string(sh.regime)) + "\" points=\"" + pts + "\" fill=\"" +
           color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
  }

  // Axes and ticks.
  o += "<g stroke=\"black\" fill=\"none\">\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(H - B) + "\" x2=\"" + detail::num(W - R) +
       "\" y2=\"" + detail::num(H - B) + "\"/>\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(T) + "\" x2=\"" + detail::num(L) + "\" y2=\"" +
       detail::num(H - B) + "\"/>\n</g>\n";
  const double xs = detail::nice_step(xmax - xmin), ys = detail::nice_step(ymax - ymin);
  for (double x = std::ceil(xmin / xs) * xs; x <= xmax + 1e-9 * xs; x += xs) {
    o += "<text x=\"" + detail::num(sx(x)) + "\" y=\"" + detail::num(H - B + 16) + "\" text-anchor=\"middle\">" +
         detail::tick(x) + "</text>\n";
  }
  for (double y = std::ceil(ymin / ys) * ys; y <= ymax + 1e-9 * ys; y += ys) {
    o += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(sy(y) + 4) + "\" text-anchor=\"end\">" +
         detail::tick(y) + "</text>\n";
  }
  o += "<text x=\"" + detail::num((L + W - R) / 2) + "\" y=\"" + detail::num(H - 18) +
       "\" text-anchor=\"middle\">" + detail::escape(spec.x_label) + "</text>\n";
  o += "<text transform=\"translate(18," + detail::num((T + H - B) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape(spec.y_label) + "</text>\n";

  static constexpr const char* palette[] = {"#000000", "#ff7f0e", "#2ca02c", "#9467bd",
                                            "#8c564b", "#e377c2", "#17becf", "#bcbd22"};
  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* color = palette[k % std::size(palette)];
    if (s.points.size() == 1) {
      o += "<circle class=\"series\" cx=\"" + detail::num(sx(s.points[0].first)) + "\" cy=\"" +
           detail::num(sy(s.points[0].second)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    } else if (!s.points.empty()) {
      std::string pts;
      for (const auto& [x, y] : s.points) pts += detail::num(sx(x)) + "," + detail::num(sy(y)) + " ";
      pts.pop_back();
      o += "<polyline class=\"series\" points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    }
    if (!s.label.empty()) {
      const double ly = T + 16.0 * static_cast<double>(k + 1);
      o += "<line x1=\"" + detail::num(W - R - 110) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" +
           detail::num(W - R - 90) + "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
      o += "<text class=\"legend\" x=\"" + detail::num(W - R - 84) + "\" y=\"" + detail::num(ly) + "\">" +
           detail::escape(s.label) + "</text>\n";
    }
  }
  if (spec.marker) {
    o += "<circle class=\"marker\" cx=\"" + detail::num(sx(spec.marker->first)) + "\" cy=\"" +
         detail::num(sy(spec.marker->second)) + "\" r=\"5\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    if (!spec.marker_label.empty()) {
      o += "<text x=\"" + detail::num(sx(spec.marker->first) + 8) + "\" y=\"" +
           detail::num(sy(spec.marker->second) - 8) + "\">" + detail::escape(spec.marker_label) + "</text>\n";
    }
  }
  o += "</svg>\n";
  return o;
}

// ---------------------------------------------------------------------------
// Figure builders.

inline PlotSpec entropy_vs_time_plot(const Trajectory& traj, std::string title = "Heating-stroke entropy") {
  Series s{"", {}};
  const auto entropy = entropy_trace(traj);
  for (std::size_t i = 0; i < traj.size(); ++i) s.points.emplace_back(traj.times[i], entropy[i]);
  return {std::move(title), "t (ms)", "S (k_B)", {std::move(s)}, {}, std::nullopt, ""};
}

/// `regimes[i]` is the temperature regime of the heating-stroke end state of
/// sweep point i; consecutive points of equal regime are shaded together.
inline PlotSpec power_vs_entropy_plot(const SweepResult& sweep, const std::vector<Regime>& regimes) {
  qotto::detail::require(regimes.empty() || regimes.size() == sweep.curve.size(), ErrorKind::dimension,
                         "one regime per sweep point expected");
  PlotSpec spec{"Power output versus heating entropy", "S_B (k_B)", "P (nK/ms)", {{"", sweep.curve}}, {}, {}, ""};
  for (std::size_t i = 0; i + 1 < sweep.curve.size() && !regimes.empty(); ++i) {
    // Each segment belongs to the regime of its left end.
    if (spec.shades.empty() || spec.shades.back().regime != regimes[i]) {
      spec.shades.push_back({regimes[i], {sweep.curve[i]}});
    }
    spec.shades.back().outline.push_back(sweep.curve[i + 1]);
  }
  if (!sweep.curve.empty()) {
    spec.marker = sweep.curve[sweep.argmax_power()];
    spec.marker_label = "P max";
  }
  return spec;
}

inline PlotSpec n_level_comparison_plot(const std::vector<LevelCurve>& curves) {
  PlotSpec spec{"Power output of truncated engines", "S_B (k_B)", "P (nK/ms)", {}, {}, {}, ""};
  for (const auto& c : curves) {
    Series s{"N = " + std::to_string(c.levels), {}};
    for (const auto& p : c.points) s.points.emplace_back(p.heating_entropy, p.power);
    spec.series.push_back(std::move(s));
  }
  return spec;
}

/// Mixture weight a of the positive-temperature component over time, with
/// the classified regime shaded as vertical bands.
inline PlotSpec temperature_trace_plot(const std::vector<double>& times, const std::vector<TemperatureFit>& fits) {
  qotto::detail::require(times.size() == fits.size(), ErrorKind::dimension, "one fit per time sample expected");
  PlotSpec spec{"Positive-temperature weight of the fitted mixture", "t (ms)", "a", {{"", {}}}, {}, {}, ""};
  for (std::size_t i = 0; i < times.size(); ++i) {
    spec.series[0].points.emplace_back(times[i], fits[i].a);
    const double lo = i == 0 ? times[i] : 0.5 * (times[i - 1] + times[i]);
    const double hi = i + 1 == times.size() ? times[i] : 0.5 * (times[i] + times[i + 1]);
    if (!spec.shades.empty() && spec.shades.back().regime == fits[i].regime) {
      spec.shades.back().x1 = hi;
    } else {
      spec.shades.push_back({fits[i].regime, {}, true, lo, hi});
    }
  }
  return spec;
}

}  // namespace qotto::io
