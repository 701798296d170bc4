#pragma once

// Run configuration as a flat JSON object. Every key is optional; missing
// keys take the calibrated defaults.
//
//   {
//     "B1_mG": 346.5, "B2_mG": 31.6, "ramp_time_ms": 20, "levels": 7,
//     "epsilon": 0.01, "heating_rates_per_ms": 0.0566, "rate_preset": "uniform",
//     "tau_H_ms": 58, "levels_compared": [2, 3, 4, 5, 6, 7]
//   }

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qotto/cycle_engine.hpp"
#include "qotto/error.hpp"
#include "qotto/level_study.hpp"

namespace qotto::io {

enum class RatePreset { uniform, reduced_final };

/// Which field's ladder an external population file is fitted against.
enum class FitField { hot, cold };

struct RunManifest {
  CycleConfig config = default_cycle_config();
  double tau_heating = kCalibrationTarget;
  double calibration_target = kCalibrationTarget;
  RatePreset rate_preset = RatePreset::uniform;
  double reduced_final_fraction = 0.4;
  std::optional<double> sweep_max;
  double sweep_step = 1.0;
  TimeMapping level_time_mapping = TimeMapping::both_strokes;
  std::vector<int> levels_compared{2, 3, 4, 5, 6, 7};
  FitField fit_field = FitField::hot;

  std::vector<double> sweep_grid() const {
    const double end = sweep_max.value_or(default_sweep_grid(config, sweep_step).back());
    std::vector<double> grid;
    for (std::size_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * sweep_step;
      if (t > end + 1e-9) break;
      grid.push_back(t);
    }
    return grid;
  }
};

namespace detail {

using qotto::detail::fail;

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "B1_mG",          "B2_mG",           "ramp_time_ms",       "levels",
      "epsilon",        "step_ms",         "heating_rates_per_ms", "cooling_rates_per_ms",
      "rate_preset",    "reduced_final_fraction", "calibration_target_ms", "cycle_start",
      "horizon_factor", "tau_H_ms",        "sweep_max_ms",       "sweep_step_ms",
      "level_time_mapping", "levels_compared", "fit_field"};
  return keys;
}

/// 1-based line of the first occurrence of "key" in the source text.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  Reader(const nlohmann::json& doc, const std::string& text, std::string source)
      : doc_(doc), text_(text), source_(std::move(source)) {}

  bool has(const std::string& key) const { return doc_.contains(key); }

  [[noreturn]] void invalid(const std::string& key, const std::string& why) const {
    std::ostringstream msg;
    msg << source_;
    if (const int line = line_of_key(text_, key); line > 0) msg << ":" << line;
    msg << ": key '" << key << "': " << why;
    fail(ErrorKind::validation, msg.str());
  }

  double number(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (!v.is_number()) invalid(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(key, "expected a finite number");
    return x;
  }

  double positive(const std::string& key) const {
    const double x = number(key);
    if (!(x > 0.0)) invalid(key, "must be positive");
    return x;
  }

  int integer(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (!v.is_number_integer()) invalid(key, "expected an integer");
    return v.get<int>();
  }

  std::string text(const std::string& key, std::initializer_list<const char*> allowed) const {
    const auto& v = doc_.at(key);
    if (!v.is_string()) invalid(key, "expected a string");
    const auto s = v.get<std::string>();
    for (const char* a : allowed) {
      if (s == a) return s;
    }
    std::string options;
    for (const char* a : allowed) options += std::string(options.empty() ? "" : ", ") + a;
    invalid(key, "'" + s + "' is not one of: " + options);
  }

  /// A scalar rate (uniform over levels - 1 transitions) or an explicit list.
  std::vector<double> rates(const std::string& key, int levels) const {
    const auto& v = doc_.at(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.assign(static_cast<std::size_t>(levels - 1), v.get<double>());
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) invalid(key, "rate entries must be numbers");
        out.push_back(e.get<double>());
      }
      if (static_cast<int>(out.size()) != levels - 1) {
        invalid(key, "expected " + std::to_string(levels - 1) + " rates for " + std::to_string(levels) +
                         " levels, got " + std::to_string(out.size()));
      }
    } else {
      invalid(key, "expected a number or an array of numbers");
    }
    for (double r : out) {
      if (!(std::isfinite(r) && r > 0.0)) invalid(key, "rates must be positive and finite");
    }
    return out;
  }

 private:
  const nlohmann::json& doc_;
  const std::string& text_;
  std::string source_;
};

}  // namespace detail

/// Parses a configuration document. `source` names it in error messages.
inline RunManifest parse_manifest(const std::string& text, const std::string& source = "<config>") {
  RunManifest m;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return m;

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    qotto::detail::fail(ErrorKind::parse, source + ":" + std::to_string(line) + ": malformed JSON (" +
                                              e.what() + ")");
  }
  if (!doc.is_object()) qotto::detail::fail(ErrorKind::parse, source + ": top level must be a JSON object");

  const detail::Reader in(doc, text, source);
  for (const auto& [key, _] : doc.items()) {
    if (!detail::known_keys().contains(key)) in.invalid(key, "unknown key");
  }

  int levels = 7;
  if (in.has("levels")) {
    levels = in.integer("levels");
    if (levels < 2 || levels > kMaxLevels) in.invalid("levels", "must lie in [2, 7]");
  } else {
    for (const char* key : {"heating_rates_per_ms", "cooling_rates_per_ms"}) {
      if (in.has(key) && doc.at(key).is_array()) {
        levels = static_cast<int>(doc.at(key).size()) + 1;
        if (levels < 2 || levels > kMaxLevels) in.invalid(key, "expected between 1 and 6 rates");
        break;
      }
    }
  }

  if (in.has("calibration_target_ms")) m.calibration_target = in.positive("calibration_target_ms");
  if (in.has("rate_preset")) {
    m.rate_preset = in.text("rate_preset", {"uniform", "reduced_final"}) == "uniform" ? RatePreset::uniform
                                                                                     : RatePreset::reduced_final;
  }
  if (in.has("reduced_final_fraction")) {
    m.reduced_final_fraction = in.positive("reduced_final_fraction");
    if (m.reduced_final_fraction > 1.0) in.invalid("reduced_final_fraction", "must lie in (0, 1]");
  }

  std::optional<double> calibrated;
  auto calibrated_rate = [&] {
    if (!calibrated) {
      calibrated = levels == 7 && m.calibration_target == kCalibrationTarget
                       ? default_cycle_config().heating.max_rate()
                       : calibrate_uniform_rate(CycleConfig::uniform(3.0 / m.calibration_target, levels),
                                                m.calibration_target);
    }
    return *calibrated;
  };
  auto heating = in.has("heating_rates_per_ms")
                     ? in.rates("heating_rates_per_ms", levels)
                     : std::vector<double>(static_cast<std::size_t>(levels - 1), calibrated_rate());
  const auto cooling = in.has("cooling_rates_per_ms")
                           ? in.rates("cooling_rates_per_ms", levels)
                           : std::vector<double>(static_cast<std::size_t>(levels - 1), calibrated_rate());
  if (m.rate_preset == RatePreset::reduced_final) heating.back() *= m.reduced_final_fraction;

  CycleConfig cfg(RateProfile(Direction::heating, heating), RateProfile(Direction::cooling, cooling));
  if (in.has("B1_mG")) cfg.b1 = MagneticField(in.positive("B1_mG"));
  if (in.has("B2_mG")) cfg.b2 = MagneticField(in.positive("B2_mG"));
  if (!(cfg.b1 > cfg.b2)) in.invalid(in.has("B2_mG") ? "B2_mG" : "B1_mG", "B1 must exceed B2");
  if (in.has("ramp_time_ms")) {
    cfg.ramp_time = in.number("ramp_time_ms");
    if (cfg.ramp_time < 0.0) in.invalid("ramp_time_ms", "must be >= 0");
  }
  if (in.has("epsilon")) {
    cfg.epsilon = in.number("epsilon");
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.1)) in.invalid("epsilon", "must lie in (0, 0.1)");
  }
  if (in.has("step_ms")) cfg.step = in.positive("step_ms");
  if (in.has("cycle_start")) {
    cfg.start = in.text("cycle_start", {"periodic", "ground_state"}) == "periodic" ? CycleStart::periodic
                                                                                  : CycleStart::ground_state;
  }
  if (in.has("horizon_factor")) cfg.horizon_factor = in.positive("horizon_factor");
  cfg.validate();
  m.config = std::move(cfg);

  if (in.has("tau_H_ms")) {
    m.tau_heating = in.number("tau_H_ms");
    if (m.tau_heating < 0.0) in.invalid("tau_H_ms", "must be >= 0");
  }
  if (in.has("sweep_max_ms")) m.sweep_max = in.positive("sweep_max_ms");
  if (in.has("sweep_step_ms")) m.sweep_step = in.positive("sweep_step_ms");
  if (in.has("level_time_mapping")) {
    m.level_time_mapping = in.text("level_time_mapping", {"both_strokes", "heating_only"}) == "both_strokes"
                               ? TimeMapping::both_strokes
                               : TimeMapping::heating_only;
  }
  if (in.has("levels_compared")) {
    const auto& v = doc.at("levels_compared");
    if (!v.is_array() || v.empty()) in.invalid("levels_compared", "expected a non-empty array of integers");
    m.levels_compared.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) in.invalid("levels_compared", "expected integers");
      const int n = e.get<int>();
      if (n < 2 || n > levels) in.invalid("levels_compared", "entries must lie in [2, levels]");
      m.levels_compared.push_back(n);
    }
  }
  if (in.has("fit_field")) m.fit_field = in.text("fit_field", {"B1", "B2"}) == "B1" ? FitField::hot : FitField::cold;
  return m;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) qotto::detail::fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline RunManifest load_manifest(const std::string& path) { return parse_manifest(read_text_file(path), path); }

inline CycleConfig parse_config(const std::string& path) { return load_manifest(path).config; }

/// JSON text that parses back to an identical CycleConfig (doubles are
/// printed in shortest round-trip form).
inline std::string serialize_config(const CycleConfig& config) {
  nlohmann::ordered_json doc;
  doc["B1_mG"] = config.b1.milligauss();
  doc["B2_mG"] = config.b2.milligauss();
  doc["ramp_time_ms"] = config.ramp_time;
  doc["levels"] = config.levels;
  doc["epsilon"] = config.epsilon;
  if (config.step) doc["step_ms"] = *config.step;
  doc["heating_rates_per_ms"] = config.heating.rates();
  doc["cooling_rates_per_ms"] = config.cooling.rates();
  doc["cycle_start"] = config.start == CycleStart::periodic ? "periodic" : "ground_state";
  doc["horizon_factor"] = config.horizon_factor;
  return doc.dump(2) + "\n";
}

}  // namespace qotto::io
