#pragma once

// Tabular output. Every table renders to CSV or to a JSON array of row
// objects with the same field names; numbers carry 9 significant digits so
// output is byte-stable for fixed input.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qotto/cycle_engine.hpp"
#include "qotto/error.hpp"
#include "qotto/level_study.hpp"
#include "qotto/spin_distribution.hpp"
#include "qotto/temp_fit.hpp"
#include "qotto/thermo.hpp"

namespace qotto::io {

enum class Format { csv, json };

constexpr std::string_view extension(Format f) noexcept { return f == Format::csv ? ".csv" : ".json"; }

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    qotto::detail::require(row.size() == columns.size(), ErrorKind::dimension, "row width differs from header");
    rows.push_back(std::move(row));
  }
};

namespace detail {

inline std::string format_number(double x, bool json) {
  if (std::isnan(x)) return json ? "null" : "nan";
  if (std::isinf(x)) return json ? "null" : (x > 0 ? "inf" : "-inf");
  if (x == 0.0) return "0";  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::string format_cell(const Cell& c, bool json) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d, json);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  return json ? nlohmann::json(s).dump() : s;
}

}  // namespace detail

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t j = 0; j < t.columns.size(); ++j) out += (j ? "," : "") + t.columns[j];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + detail::format_cell(row[j], false);
    out += '\n';
  }
  return out;
}

inline std::string to_json(const Table& t) {
  std::string out = "[";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out += i ? ",\n  {" : "\n  {";
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      out += (j ? ", " : "") + nlohmann::json(t.columns[j]).dump() + ": " +
             detail::format_cell(t.rows[i][j], true);
    }
    out += "}";
  }
  out += t.rows.empty() ? "]\n" : "\n]\n";
  return out;
}

inline std::string render(const Table& t, Format f) { return f == Format::csv ? to_csv(t) : to_json(t); }

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) qotto::detail::fail(ErrorKind::io, "cannot write '" + path + "'");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) qotto::detail::fail(ErrorKind::io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

/// t_ms, p0..p{N-1}, S_kB, Q_cum_nK (heat relative to the first sample).
inline Table trajectory_table(const Trajectory& traj, const EnergyLadder& ladder) {
  Table t;
  t.columns.push_back("t_ms");
  const int n = traj.front().levels();
  for (int k = 0; k < n; ++k) t.columns.push_back("p" + std::to_string(k));
  t.columns.push_back("S_kB");
  t.columns.push_back("Q_cum_nK");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& p = traj.states[i];
    std::vector<Cell> row{traj.times[i]};
    for (double v : p.values()) row.emplace_back(v);
    row.emplace_back(shannon_entropy(p));
    row.emplace_back(heat_exchanged(traj.front(), p, ladder));
    t.add_row(std::move(row));
  }
  return t;
}

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"tau_H_ms", "tau_C_ms",    "tau_cycle_ms",     "S_B_kB",
                                             "Q_H_nK",   "Q_C_nK",      "W_nK",             "P_nK_per_ms",
                                             "collisions_total", "efficiency"};
  return cols;
}

inline std::vector<Cell> sweep_row(const CycleRecord& r) {
  return {r.tau_heating, r.tau_cooling, r.tau_cycle, r.heating_entropy, r.heat_hot,
          r.heat_cold,   r.work,        r.power,     r.collisions_total, r.efficiency()};
}

inline Table sweep_table(const std::vector<CycleRecord>& records) {
  Table t{sweep_columns(), {}};
  for (const auto& r : records) t.add_row(sweep_row(r));
  return t;
}

inline Table fit_trace_table(const std::vector<double>& times, const std::vector<TemperatureFit>& fits) {
  qotto::detail::require(times.size() == fits.size(), ErrorKind::dimension, "one fit per time sample expected");
  Table t{{"t_ms", "a", "delta_a", "beta_plus_per_nK", "beta_minus_per_nK", "T_plus_nK", "T_minus_nK",
           "residual", "regime"},
          {}};
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    t.add_row({times[i], f.a, f.delta_a, f.beta_plus, f.beta_minus, f.temperature_plus(), f.temperature_minus(),
               f.residual, std::string(to_string(f.regime))});
  }
  return t;
}

inline Table levels_table(const std::vector<LevelCurve>& curves) {
  Table t{{"N", "tau_H_ms", "mapped_tau_H_ms", "tau_C_ms", "tau_cycle_ms", "S_B_kB", "Q_H_nK", "Q_C_nK",
           "W_nK", "P_nK_per_ms"},
          {}};
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      t.add_row({static_cast<long long>(c.levels), p.tau_heating, p.mapped_tau_heating, p.tau_cooling,
                 p.tau_cycle, p.heating_entropy, p.heat_hot, p.heat_cold, p.work, p.power});
    }
  }
  return t;
}

inline Table calibration_table(double target, double rate, const EntropyPeak& peak) {
  Table t{{"target_ms", "rate_per_ms", "peak_time_ms", "peak_entropy_kB"}, {}};
  t.add_row({target, rate, peak.time, peak.entropy});
  return t;
}

// ---------------------------------------------------------------------------
// Population input for the fit command.

struct PopulationSeries {
  std::vector<double> times;
  std::vector<SpinDistribution> states;
};

/// CSV with header t_ms,p0,...,p{N-1}. Rows are renormalized to unit sum.
inline PopulationSeries parse_population_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail_at = [&](const std::string& why) {
    qotto::detail::fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": " + why);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
  };

  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = split(line);
  }
  if (header.empty()) fail_at("missing header");
  if (header.size() < 3 || header[0] != "t_ms") fail_at("header must be t_ms,p0,p1,...");
  for (std::size_t k = 1; k < header.size(); ++k) {
    if (header[k] != "p" + std::to_string(k - 1)) fail_at("unexpected column '" + header[k] + "'");
  }

  PopulationSeries out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail_at("expected " + std::to_string(header.size()) + " fields");
    std::vector<double> v;
    for (const auto& c : cells) {
      // strtod rather than stod: subnormal populations are valid input.
      char* end = nullptr;
      const double x = c.empty() ? NAN : std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(x)) {
        fail_at("not a finite number: '" + c + "'");
      }
      v.push_back(x);
    }
    std::vector<double> p(v.begin() + 1, v.end());
    for (double x : p) {
      if (x < 0.0) fail_at("negative population");
    }
    double sum = 0.0;
    for (double x : p) sum += x;
    if (!(sum > 0.0)) fail_at("populations sum to zero");
    out.times.push_back(v[0]);
    out.states.push_back(SpinDistribution::normalized(std::move(p)));
  }
  if (out.times.empty()) fail_at("no data rows");
  return out;
}

}  // namespace qotto::io
