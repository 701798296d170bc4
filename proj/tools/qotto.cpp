// Command-line front end: one subcommand per kind of result.
//
//   qotto simulate  --config run.json --tau-h 123 --out results/
//   qotto sweep     --config run.json --format json
//   qotto calibrate --config run.json
//   qotto fit       --input populations.csv
//   qotto levels    --n 2 --n 4 --n 7
//   qotto plot      --kind power_vs_entropy

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qotto/cycle_engine.hpp"
#include "qotto/error.hpp"
#include "qotto/io/config.hpp"
#include "qotto/io/svg.hpp"
#include "qotto/io/tables.hpp"
#include "qotto/level_study.hpp"
#include "qotto/temp_fit.hpp"

namespace {

using namespace qotto;

struct Options {
  std::string config_path;
  std::optional<double> tau_h;
  std::string out_dir = ".";
  std::string format = "csv";
  std::vector<int> n;
  std::optional<double> epsilon;
  std::string input;
  std::string kind;
};

io::RunManifest load(const Options& opt, bool single_level_override) {
  io::RunManifest m = opt.config_path.empty() ? io::RunManifest{} : io::load_manifest(opt.config_path);
  if (opt.epsilon) {
    m.config.epsilon = *opt.epsilon;
    m.config.validate();
  }
  if (opt.tau_h) {
    qotto::detail::require(*opt.tau_h >= 0.0, ErrorKind::validation, "--tau-h must be >= 0");
    m.tau_heating = *opt.tau_h;
  }
  if (single_level_override && !opt.n.empty()) {
    qotto::detail::require(opt.n.size() == 1, ErrorKind::validation, "--n takes a single level count here");
    m.config = truncate(m.config, opt.n.front()).config;
  }
  if (!single_level_override && !opt.n.empty()) m.levels_compared = opt.n;
  return m;
}

std::string output_path(const Options& opt, const std::string& stem, std::string_view ext) {
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) qotto::detail::fail(ErrorKind::io, "cannot create '" + opt.out_dir + "': " + ec.message());
  return (std::filesystem::path(opt.out_dir) / (stem + std::string(ext))).string();
}

void emit(const Options& opt, const std::string& stem, const io::Table& table) {
  const auto format = opt.format == "json" ? io::Format::json : io::Format::csv;
  const auto path = output_path(opt, stem, io::extension(format));
  io::write_file(path, io::render(table, format));
  std::cout << path << '\n';
}

std::vector<Regime> heating_end_regimes(const SweepResult& sweep, const EnergyLadder& ladder) {
  std::vector<Regime> out;
  out.reserve(sweep.records.size());
  for (const auto& r : sweep.records) out.push_back(dominant_regime(fit_dual_boltzmann(r.heating().end(), ladder)));
  return out;
}

io::PopulationSeries read_populations(const std::string& path) {
  return io::parse_population_csv(io::read_text_file(path), path);
}

EnergyLadder fit_ladder(const io::RunManifest& m, int levels) {
  return zeeman_ladder(m.fit_field == io::FitField::hot ? m.config.b1 : m.config.b2, levels);
}

int run_simulate(const Options& opt) {
  const auto m = load(opt, true);
  const auto rec = run_cycle(m.config, m.tau_heating);
  emit(opt, "cycle", io::Table{io::sweep_columns(), {io::sweep_row(rec)}});
  emit(opt, "heating_trajectory", io::trajectory_table(rec.heating().trajectory, m.config.hot_ladder()));
  emit(opt, "cooling_trajectory", io::trajectory_table(rec.cooling().trajectory, m.config.cold_ladder()));
  return 0;
}

int run_sweep(const Options& opt) {
  const auto m = load(opt, true);
  const auto sweep = sweep_heating_time(m.config, m.sweep_grid());
  emit(opt, "sweep", io::sweep_table(sweep.records));
  return 0;
}

int run_calibrate(const Options& opt) {
  const auto m = load(opt, true);
  const double rate = calibrate_uniform_rate(m.config, m.calibration_target);
  auto cfg = m.config;
  cfg.heating = RateProfile::uniform(Direction::heating, cfg.levels, rate);
  cfg.cooling = RateProfile::uniform(Direction::cooling, cfg.levels, rate);
  emit(opt, "calibration", io::calibration_table(m.calibration_target, rate, heating_entropy_peak(cfg)));
  return 0;
}

int run_fit(const Options& opt) {
  qotto::detail::require(!opt.input.empty(), ErrorKind::validation, "fit needs --input <populations.csv>");
  const auto m = load(opt, true);
  const auto data = read_populations(opt.input);
  const auto ladder = fit_ladder(m, data.states.front().levels());
  std::vector<TemperatureFit> fits;
  for (const auto& p : data.states) fits.push_back(fit_dual_boltzmann(p, ladder));
  emit(opt, "temperature_trace", io::fit_trace_table(data.times, fits));
  return 0;
}

int run_levels(const Options& opt) {
  const auto m = load(opt, false);
  LevelStudyOptions lo;
  lo.mapping = m.level_time_mapping;
  if (m.sweep_max) lo.grid = m.sweep_grid();
  emit(opt, "levels", io::levels_table(compare_n_levels(m.config, m.levels_compared, lo)));
  return 0;
}

io::PlotKind plot_kind(const std::string& name) {
  for (auto k : {io::PlotKind::entropy_vs_time, io::PlotKind::power_vs_entropy, io::PlotKind::n_level_comparison,
                 io::PlotKind::temperature_trace}) {
    if (io::to_string(k) == name) return k;
  }
  qotto::detail::fail(ErrorKind::validation, "unknown plot kind '" + name + "'");
}

int run_plot(const Options& opt) {
  const auto kind = plot_kind(opt.kind);
  const bool levels_kind = kind == io::PlotKind::n_level_comparison;
  const auto m = load(opt, !levels_kind);
  io::PlotSpec spec;
  switch (kind) {
    case io::PlotKind::entropy_vs_time:
      spec = io::entropy_vs_time_plot(run_heating(m.config, m.tau_heating).trajectory);
      break;
    case io::PlotKind::power_vs_entropy: {
      const auto sweep = sweep_heating_time(m.config, m.sweep_grid());
      spec = io::power_vs_entropy_plot(sweep, heating_end_regimes(sweep, m.config.hot_ladder()));
      break;
    }
    case io::PlotKind::n_level_comparison: {
      LevelStudyOptions lo;
      lo.mapping = m.level_time_mapping;
      if (m.sweep_max) lo.grid = m.sweep_grid();
      spec = io::n_level_comparison_plot(compare_n_levels(m.config, m.levels_compared, lo));
      break;
    }
    case io::PlotKind::temperature_trace: {
      io::PopulationSeries data;
      if (opt.input.empty()) {
        const auto traj = run_heating(m.config, m.tau_heating).trajectory;
        data = {traj.times, traj.states};
      } else {
        data = read_populations(opt.input);
      }
      const auto ladder = fit_ladder(m, data.states.front().levels());
      std::vector<TemperatureFit> fits;
      for (const auto& p : data.states) fits.push_back(fit_dual_boltzmann(p, ladder));
      spec = io::temperature_trace_plot(data.times, fits);
      break;
    }
  }
  const auto path = output_path(opt, opt.kind, ".svg");
  io::write_file(path, io::render_svg(spec));
  std::cout << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-spin quantum Otto engine simulator"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON configuration file");
    sub->add_option("--tau-h", opt.tau_h, "heating time in ms");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--n", opt.n, "level count (levels: repeat for each N)");
    sub->add_option("--epsilon", opt.epsilon, "cooling closure tolerance");
    return sub;
  };

  auto* simulate = common(app.add_subcommand("simulate", "one cycle at the given heating time"));
  auto* sweep = common(app.add_subcommand("sweep", "cycles over a grid of heating times"));
  auto* calibrate = common(app.add_subcommand("calibrate", "uniform rate matching the entropy peak time"));
  auto* fit = common(app.add_subcommand("fit", "effective temperatures of a population file"));
  fit->add_option("--input", opt.input, "CSV with columns t_ms,p0,...");
  auto* levels = common(app.add_subcommand("levels", "power of truncated N-level engines"));
  auto* plot = common(app.add_subcommand("plot", "SVG figure"));
  plot->add_option("--kind", opt.kind, "figure kind")
      ->required()
      ->check(CLI::IsMember({"entropy_vs_time", "power_vs_entropy", "n_level_comparison", "temperature_trace"}));
  plot->add_option("--input", opt.input, "population CSV for temperature_trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return run_simulate(opt);
    if (*sweep) return run_sweep(opt);
    if (*calibrate) return run_calibrate(opt);
    if (*fit) return run_fit(opt);
    if (*levels) return run_levels(opt);
    if (*plot) return run_plot(opt);
  } catch (const Error& e) {
    std::cerr << "error: category=" << to_string(e.kind()) << " message=" << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: category=internal message=" << e.what() << '\n';
    return 1;
  }
  return 1;
}
