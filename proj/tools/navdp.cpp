// navdp: chart generation, value iteration, policy rollouts and parameter sweeps.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "navdp/belief_policy.hpp"
#include "navdp/chart.hpp"
#include "navdp/currents.hpp"
#include "navdp/harness.hpp"
#include "navdp/value_iteration.hpp"

namespace fs = std::filesystem;
using namespace navdp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path &path, std::ios::openmode mode = std::ios::trunc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

Chart load_chart(const fs::path &path) {
  try {
    return Chart::parse(read_file(path));
  } catch (const ChartFormatError &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

struct TargetFlags {
  std::optional<double> x, y;
  double radius = kDefaultTargetRadius;
  std::uint64_t seed = 0;

  void add(CLI::App &app) {
    app.add_option("--target-x", x, "Target centre x (sampled from --target-seed when omitted)");
    app.add_option("--target-y", y, "Target centre y");
    app.add_option("--target-radius", radius, "Target radius in chart units");
    app.add_option("--target-seed", seed, "Seed for sampling a free target centre");
  }

  TargetRegion resolve(const Chart &chart) const {
    if (x.has_value() != y.has_value()) throw CLI::ValidationError("--target-x and --target-y go together");
    if (x) {
      if (chart.is_land({*x, *y})) throw std::runtime_error("target centre lies on land");
      return {{*x, *y}, radius};
    }
    std::mt19937_64 rng(seed);
    return {sample_free_position(chart, rng), radius};
  }
};

void print_target(std::ostream &out, const TargetRegion &t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "target %.17g %.17g %.17g\n", t.center.x, t.center.y, t.radius);
  out << buf;
}

void write_land_outputs(const Chart &chart, int resolution, const fs::path &dir) {
  std::vector<double> heights(static_cast<std::size_t>(resolution) * resolution);
  std::ofstream csv = open_out(dir / "land.csv");
  csv << "x,y,height\n";
  char buf[128];
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Vec2 p{ix * chart.domain().width / resolution, iy * chart.domain().height / resolution};
      const double h = chart.land_height(p);
      heights[static_cast<std::size_t>(iy) * resolution + ix] = h;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.y, h);
      csv << buf;
    }
  }
  std::ofstream pgm = open_out(dir / "land.pgm", std::ios::binary | std::ios::trunc);
  write_pgm(pgm, resolution, resolution, heights, 0.0, kLandThreshold);
}

void write_quiver(const Chart &chart, const CurrentSpec &spec, int resolution, const fs::path &path) {
  std::ofstream out = open_out(path);
  out << "x,y,W_x,W_y\n";
  char buf[160];
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Vec2 p{ix * chart.domain().width / resolution, iy * chart.domain().height / resolution};
      const Vec2 w = water_current(chart, spec, p);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x, p.y, w.x, w.y);
      out << buf;
    }
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Navigation under incomplete information: charts, value iteration, policy rollouts, sweeps"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  fs::path out_dir = ".";
  app.add_option("--out", out_dir, "Output root directory");

  // gen-chart
  CLI::App *gen = app.add_subcommand("gen-chart", "Sample a random island chart");
  std::uint64_t gen_seed = 1;
  std::string gen_band = "low";
  std::optional<int> gen_islands;
  double gen_quad_max = 4.0;
  double gen_width = 10.0, gen_height = 10.0;
  std::string gen_name = "chart.txt";
  gen->add_option("--seed", gen_seed, "Chart seed");
  gen->add_option("--band", gen_band, "Island density band")->check(CLI::IsMember({"low", "medium", "high"}));
  gen->add_option("--islands", gen_islands, "Force the island count (0..20) instead of drawing it from the band")
      ->check(CLI::Range(0, 20));
  gen->add_option("--quad_max", gen_quad_max, "Upper end of the a, c coefficient range")->check(CLI::Range(1.0, 1e6));
  gen->add_option("--width", gen_width, "Domain width")->check(CLI::PositiveNumber);
  gen->add_option("--height", gen_height, "Domain height")->check(CLI::PositiveNumber);
  gen->add_option("--name", gen_name, "File name inside --out");

  // solve
  CLI::App *solve = app.add_subcommand("solve", "Run value iteration for a chart and target");
  fs::path solve_chart;
  TargetFlags solve_target;
  SolveOptions solve_opts;
  std::string solve_variant = "no_current";
  double solve_wmax = 0.0;
  solve->add_option("--chart", solve_chart, "Chart file")->required();
  solve_target.add(*solve);
  solve->add_option("--gamma", solve_opts.gamma, "Discount factor")->check(CLI::Range(0.0, 0.999999));
  solve->add_option("--tolerance", solve_opts.tolerance, "Sup-norm residual stopping threshold");
  solve->add_option("--max_iterations", solve_opts.max_iterations, "Sweep limit");
  solve->add_option("--grid_resolution", solve_opts.resolution, "Lattice points per axis")->check(CLI::Range(2, 4096));
  solve->add_option("--variant", solve_variant, "no_current or known_current")
      ->check(CLI::IsMember({"no_current", "known_current"}));
  solve->add_option("--w_max", solve_wmax, "Current bound for known_current")->check(CLI::Range(0.0, 1.0));
  solve->add_option("--threads", solve_opts.threads, "Worker threads")->check(CLI::PositiveNumber);

  // rollout
  CLI::App *rollout = app.add_subcommand("rollout", "Run one policy trajectory and write its log");
  fs::path ro_chart, ro_grid, ro_config;
  TargetFlags ro_target;
  double ro_wmax = 0.0;
  PolicyParams ro_params;
  std::optional<double> ro_start_x, ro_start_y;
  std::uint64_t ro_start_seed = 0;
  bool ro_clamp = false;
  std::string ro_band = "low";
  int ro_chart_index = 0, ro_start_index = 0;
  rollout->add_option("--chart", ro_chart, "Chart file (standalone mode)");
  rollout->add_option("--grid", ro_grid, "Value cache for the chart; solved on the fly when omitted");
  ro_target.add(*rollout);
  rollout->add_option("--w_max", ro_wmax, "Maximum water current")->check(CLI::Range(0.0, 1.0));
  rollout->add_option("--growth_rate", ro_params.growth_rate, "Uncertainty growth rate g")->check(CLI::Range(0.0, 1.0));
  rollout->add_option("--gamma", ro_params.gamma, "Discount factor");
  rollout->add_option("--quadrature_resolution", ro_params.quadrature_resolution, "Lattice points per disc axis")
      ->check(CLI::PositiveNumber);
  rollout->add_option("--step_cap", ro_params.step_cap, "Maximum movement actions")->check(CLI::PositiveNumber);
  rollout->add_option("--gps_current_shrink", ro_params.gps_current_shrink, "sigma_w factor applied by GPS");
  rollout->add_option("--clamp_current", ro_clamp, "Cap |W| at w_max");
  rollout->add_option("--start-x", ro_start_x, "Start x (sampled from --start-seed when omitted)");
  rollout->add_option("--start-y", ro_start_y, "Start y");
  rollout->add_option("--start-seed", ro_start_seed, "Seed for sampling a free start");
  rollout->add_option("--config", ro_config, "Sweep config: replay one harness episode instead of --chart");
  rollout->add_option("--band", ro_band, "Replay: density band")->check(CLI::IsMember({"low", "medium", "high"}));
  rollout->add_option("--chart-index", ro_chart_index, "Replay: chart index within the band");
  rollout->add_option("--start-index", ro_start_index, "Replay: start index within the chart");

  // sweep
  CLI::App *sweep = app.add_subcommand("sweep", "Run the (g, w_max) sweep over chart ensembles");
  fs::path sweep_config_path;
  sweep->add_option("--config", sweep_config_path, "Key-value config file (desk-scale defaults otherwise)");
  bool sweep_full = false;
  sweep->add_flag("--full-scale", sweep_full, "Start from the 100/150/250 chart, 10 start configuration");
  std::map<std::string, std::optional<std::string>> overrides;
  {
    std::istringstream defaults(format_sweep_config(SweepConfig::desk()));
    std::string line;
    while (std::getline(defaults, line)) {
      const auto eq = line.find(" = ");
      const std::string key = line.substr(0, eq);
      auto *opt = sweep->add_option("--" + key, overrides[key], "Override config key '" + key + "'");
      opt->default_str(line.substr(eq + 3));
    }
  }

  // render
  CLI::App *render = app.add_subcommand("render", "Convert charts, value caches and logs to CSV/PGM");
  fs::path rd_chart, rd_grid;
  int rd_resolution = 152;
  std::optional<double> rd_quiver_wmax;
  double rd_lo = -1.0, rd_hi = 1.0;
  render->add_option("--chart", rd_chart, "Chart file: writes land.csv and land.pgm");
  render->add_option("--grid", rd_grid, "Value cache: writes value.csv and value.pgm");
  render->add_option("--resolution", rd_resolution, "Sampling lattice for chart rendering")->check(CLI::Range(2, 4096));
  render->add_option("--quiver", rd_quiver_wmax, "With --chart: also write currents.csv for this w_max")
      ->check(CLI::Range(0.0, 1.0));
  render->add_option("--value_lo", rd_lo, "Value mapped to black");
  render->add_option("--value_hi", rd_hi, "Value mapped to white");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      ChartSamplingOptions opts;
      opts.quad_max = gen_quad_max;
      opts.island_count = gen_islands;
      const Chart chart = sample_chart(gen_seed, parse_density_band(gen_band), Domain{gen_width, gen_height}, opts);
      const fs::path path = out_dir / gen_name;
      open_out(path) << chart.serialize();
      std::cout << "wrote " << path.string() << " (" << chart.islands().size() << " islands)\n";
    } else if (*solve) {
      const Chart chart = load_chart(solve_chart);
      const TargetRegion target = solve_target.resolve(chart);
      solve_opts.variant = parse_value_variant(solve_variant);
      solve_opts.current = CurrentSpec{solve_wmax};
      const ValueGrid grid = value_iteration(chart, target, solve_opts);
      fs::create_directories(out_dir);
      write_value_cache(grid, out_dir / "value.vgrid");
      write_value_pgm(grid, out_dir / "value.pgm");
      write_value_csv(grid, out_dir / "value.csv");
      std::ofstream summary = open_out(out_dir / "solve.txt");
      for (std::ostream *os : {static_cast<std::ostream *>(&summary), static_cast<std::ostream *>(&std::cout)}) {
        print_target(*os, target);
        *os << "iterations " << grid.iterations << "\nconverged " << (grid.converged ? "yes" : "no")
            << "\nfinal_residual " << grid.residual_history.back() << "\n";
      }
      if (!grid.converged) {
        std::cerr << "value iteration did not converge within " << solve_opts.max_iterations << " sweeps\n";
        return kExitRuntime;
      }
    } else if (*rollout) {
      Chart chart;
      TargetRegion target;
      ValueGrid grid;
      Vec2 start;
      CurrentSpec spec{ro_wmax, ro_clamp};
      std::uint64_t seed = ro_start_seed;
      if (!ro_config.empty()) {
        const SweepConfig config = load_sweep_config(ro_config);
        const DensityBand band = parse_density_band(ro_band);
        ChartSetup setup = prepare_chart(config, band, ro_chart_index, &std::cerr);
        if (ro_start_index < 0 || ro_start_index >= static_cast<int>(setup.starts.size()))
          throw CLI::ValidationError("--start-index out of range");
        chart = setup.chart;
        target = setup.target;
        grid = std::move(setup.grid);
        start = setup.starts[static_cast<std::size_t>(ro_start_index)];
        spec.clamp_magnitude = config.clamp_current;
        const double g = ro_params.growth_rate;
        const int cap = ro_params.step_cap;
        ro_params = policy_params(config, g);
        ro_params.step_cap = cap;
      } else {
        if (ro_chart.empty()) throw CLI::ValidationError("rollout needs --chart or --config");
        chart = load_chart(ro_chart);
        target = ro_target.resolve(chart);
        if (!ro_grid.empty()) {
          grid = read_value_cache(ro_grid);
          if (!cache_matches(grid, chart.hash(), target, grid.gamma, ValueVariant::no_current, 0.0, grid.resolution()))
            throw std::runtime_error(ro_grid.string() + " was not solved for this chart and target");
        } else {
          SolveOptions so;
          so.gamma = ro_params.gamma;
          grid = value_iteration(chart, target, so);
        }
        if (ro_start_x.has_value() != ro_start_y.has_value())
          throw CLI::ValidationError("--start-x and --start-y go together");
        if (ro_start_x) {
          start = {*ro_start_x, *ro_start_y};
        } else {
          std::mt19937_64 rng(ro_start_seed);
          start = sample_free_position(chart, rng, target);
        }
      }
      const PolicyWorld world{chart, spec, target, grid};
      const TrajectoryLog log = run_trajectory(world, start, ro_params, seed);
      std::ofstream out = open_out(out_dir / "trajectory.log");
      write_trajectory_log(out, log);
      std::ofstream path = open_out(out_dir / "path.csv");
      write_trajectory_path_csv(path, log);
      std::cout << "outcome " << to_string(log.outcome) << " steps " << log.step_count() << " measurement_cost "
                << log.measurement_cost << "\n";
    } else if (*sweep) {
      SweepConfig config = sweep_full ? SweepConfig::full() : SweepConfig::desk();
      if (!sweep_config_path.empty()) config = load_sweep_config(sweep_config_path, config);
      for (const auto &[key, value] : overrides)
        if (value) set_config_value(config, key, *value);
      validate(config);
      const SweepResult result = run_sweep(config, &std::cerr);
      emit_results(result, out_dir);
      open_out(out_dir / "config.txt") << format_sweep_config(config);
      std::cout << "wrote " << result.cells.size() << " cells to " << out_dir.string() << "\n";
    } else if (*render) {
      if (rd_chart.empty() && rd_grid.empty()) throw CLI::ValidationError("render needs --chart and/or --grid");
      if (!rd_chart.empty()) {
        const Chart chart = load_chart(rd_chart);
        write_land_outputs(chart, rd_resolution, out_dir);
        if (rd_quiver_wmax) write_quiver(chart, CurrentSpec{*rd_quiver_wmax}, rd_resolution, out_dir / "currents.csv");
      }
      if (!rd_grid.empty()) {
        const ValueGrid grid = read_value_cache(rd_grid);
        fs::create_directories(out_dir);
        write_value_pgm(grid, out_dir / "value.pgm", rd_lo, rd_hi);
        write_value_csv(grid, out_dir / "value.csv");
      }
    }
  } catch (const CLI::ValidationError &e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
