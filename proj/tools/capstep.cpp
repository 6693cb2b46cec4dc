// Command-line laboratory: calibrate the open-loop gait, run seeded push
// experiments, and reduce the logs to analysis artifacts.
//
// Exit codes: 0 success, 2 validation/usage error, 3 runtime error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <capstep/analysis.hpp>
#include <capstep/calibration.hpp>
#include <capstep/config.hpp>
#include <capstep/experiment.hpp>
#include <capstep/log.hpp>
#include <capstep/svg.hpp>

namespace {

using namespace capstep;

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

std::string file_label(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = stem.rfind(".csv");
  if (dot != std::string::npos && dot == stem.size() - 4) stem.erase(dot);
  return stem;
}

std::string run_basename(ControllerKind kind) {
  std::string name = to_string(kind);
  for (char& ch : name)
    if (ch == '+') ch = '_';
  return "run_" + name;
}

struct CommonOpts {
  std::string config_path;
  std::string gait_path = "gait_params.json";
  bool gait_explicit = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool print_config = false;
};

ExperimentConfig resolve_config(const CommonOpts& opt, bool want_gait) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config_file(opt.config_path);
  if (want_gait) {
    std::ifstream g(opt.gait_path);
    if (g) {
      nlohmann::json j;
      try {
        g >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(opt.gait_path + ": " + e.what());
      }
      cfg.gait = gait_params_from_json(j).gait;
    } else if (opt.gait_explicit) {
      throw ConfigError("cannot open gait params '" + opt.gait_path + "'");
    } else if (!(cfg.gait.alpha > 0.0)) {
      throw ConfigError("no gait parameters: '" + opt.gait_path +
                        "' not found and the config carries none; run "
                        "`capstep calibrate` first");
    }
  }
  if (opt.seed_set) cfg.seed = opt.seed;
  return cfg;
}

int cmd_calibrate(const CommonOpts& opt, const std::string& out_path,
                  int steps) {
  ExperimentConfig cfg = resolve_config(opt, false);
  if (opt.print_config) {
    std::printf("%s\n", experiment_config_json(cfg).dump(2).c_str());
    return 0;
  }
  const CalibrationResult r = calibrate(
      cfg.plant, {cfg.nominal_period, cfg.nominal_width}, steps, cfg.seed);
  write_text(out_path, gait_params_to_json(r).dump(2) + "\n");
  std::printf(
      "calibrated alpha=%.6f delta=%.6f period=%.6f width=%.6f "
      "(%d steps) -> %s\n",
      r.gait.alpha, r.gait.delta, r.period, r.width, r.steps_used,
      out_path.c_str());
  return 0;
}

struct RunOutcome {
  std::string path;
  int pushes = 0;
  int falls = 0;
};

RunOutcome run_one(const ExperimentConfig& cfg, const std::string& out_dir,
                   const std::string& grid_in, bool save_learned_grid) {
  GridApproximator grid(cfg.grid);
  GridApproximator* grid_io = nullptr;
  if (cfg.controller == ControllerKind::TimingStepLearning) {
    if (!grid_in.empty()) grid = load_grid(grid_in);
    grid_io = &grid;
  }
  const RunLog log = run_experiment(cfg, grid_io);
  RunOutcome out;
  out.path = out_dir + "/" + run_basename(cfg.controller) + ".csv";
  write_run_log(out.path, log);
  if (grid_io && save_learned_grid)
    save_grid(grid, out_dir + "/" + run_basename(cfg.controller) + ".grid.csv");
  out.pushes = static_cast<int>(log.pushes.size());
  for (const PushRecord& p : log.pushes)
    if (p.fell) ++out.falls;
  return out;
}

int cmd_run(const CommonOpts& opt, const std::string& controller_name,
            bool controller_set, bool all_controllers, int jobs, int pushes,
            const std::string& out_dir, const std::string& grid_in,
            bool freeze_grid) {
  ExperimentConfig cfg = resolve_config(opt, true);
  if (pushes > 0) cfg.n_pushes = pushes;
  cfg.freeze_grid = freeze_grid;
  if (controller_set && !all_controllers) {
    const auto kind = parse_controller(controller_name);
    if (!kind)
      throw ConfigError("unknown controller '" + controller_name +
                        "' (expected none, timing, timing+step, "
                        "timing+step+learning)");
    cfg.controller = *kind;
  }
  if (opt.print_config) {
    std::printf("%s\n", experiment_config_json(cfg).dump(2).c_str());
    return 0;
  }

  std::vector<ExperimentConfig> cfgs;
  if (all_controllers) {
    for (ControllerKind k :
         {ControllerKind::NoFeedback, ControllerKind::Timing,
          ControllerKind::TimingStep, ControllerKind::TimingStepLearning}) {
      cfgs.push_back(cfg);
      cfgs.back().controller = k;
    }
  } else {
    cfgs.push_back(cfg);
  }
  for (const ExperimentConfig& c : cfgs) validate_experiment_config(c);

  std::vector<RunOutcome> outcomes(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  const std::size_t workers =
      std::min<std::size_t>(std::max(jobs, 1), cfgs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < cfgs.size(); i += workers) {
        try {
          outcomes[i] = run_one(cfgs[i], out_dir, grid_in, !freeze_grid);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < cfgs.size(); ++i)
    std::printf("%s: %s pushes=%d falls=%d\n",
                to_string(cfgs[i].controller), outcomes[i].path.c_str(),
                outcomes[i].pushes, outcomes[i].falls);
  return 0;
}

int cmd_analyze(const std::string& artifact,
                const std::vector<std::string>& log_paths, std::string out,
                double bin_width) {
  if (out.empty()) out = artifact;
  const GridSpec spec = heatmap_window();

  std::vector<std::pair<std::string, RunLog>> logs;
  for (const std::string& p : log_paths) {
    RunLog log = read_run_log(p);
    std::string label =
        log.meta.controller.empty() ? file_label(p) : log.meta.controller;
    logs.emplace_back(std::move(label), std::move(log));
  }

  std::string csv, svg;
  if (artifact == "fallprob") {
    csv = std::string(kFallProbHeader) + "\n";
    std::vector<std::pair<std::string, FallProbabilityTable>> curves;
    for (const auto& [label, log] : logs) {
      curves.emplace_back(label, fall_probability(log, bin_width));
      append_fallprob_csv(csv, label, curves.back().second);
    }
    svg = render_fallprob_svg(curves);
  } else if (artifact == "heatmap") {
    csv = std::string(kHeatmapHeader) + "\n";
    std::vector<std::pair<std::string, PhaseSpaceHeatmap>> panels;
    for (const auto& [label, log] : logs) {
      panels.emplace_back(label, build_heatmap({log}, spec));
      append_heatmap_csv(csv, label, panels.back().second);
    }
    svg = render_heatmap_svg(panels);
  } else if (artifact == "energy") {
    csv = std::string(kEnergyHeader) + "\n";
    std::vector<std::pair<std::string, EnergyStats>> rows;
    std::printf("%-22s %12s %12s\n", "controller", "efficiency", "pushes");
    for (const auto& [label, log] : logs) {
      if (!(log.meta.alpha > 0.0) || !(log.meta.c > 0.0))
        throw ConfigError(label + ": log metadata carries no gait parameters");
      const GaitParams gait{log.meta.alpha, log.meta.delta, {log.meta.c}};
      rows.emplace_back(label, energy_stats(log, gait));
      append_energy_csv(csv, label, rows.back().second);
      std::printf("%-22s %11.1f%% %12d\n", label.c_str(),
                  100.0 * rows.back().second.efficiency,
                  rows.back().second.pushes_used);
    }
    svg = render_energy_svg(rows);
  } else {
    throw ConfigError("unknown artifact '" + artifact +
                      "' (expected fallprob, heatmap, energy)");
  }
  write_text(out + ".csv", csv);
  write_text(out + ".svg", svg);
  std::printf("wrote %s.csv and %s.svg\n", out.c_str(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capture-step balance laboratory"};
  app.require_subcommand(1);

  CommonOpts opt;
  std::string cal_out = "gait_params.json";
  int cal_steps = 40;

  CLI::App* cal = app.add_subcommand("calibrate",
                                     "measure the open-loop gait parameters");
  cal->add_option("--config", opt.config_path, "config file (JSON)");
  cal->add_option("--out", cal_out, "gait parameter output path");
  cal->add_option("--steps", cal_steps, "steps to walk");
  auto* cal_seed = cal->add_option("--seed", opt.seed, "override the seed");
  cal->add_flag("--print-config", opt.print_config,
                "echo the resolved config and exit");

  std::string controller_name = "none";
  bool all_controllers = false;
  int jobs = 1, pushes = 0;
  std::string out_dir = ".", grid_in;
  bool freeze_grid = false;

  CLI::App* run = app.add_subcommand("run", "run the push experiment");
  run->add_option("--config", opt.config_path, "config file (JSON)");
  auto* gait_opt =
      run->add_option("--gait", opt.gait_path, "gait parameter file");
  auto* ctl_opt =
      run->add_option("--controller", controller_name,
                      "none | timing | timing+step | timing+step+learning");
  run->add_flag("--controllers-all,--all", all_controllers,
                "run all four controllers on the shared scenario stream");
  run->add_option("--jobs", jobs, "parallel runs for --controllers-all");
  run->add_option("--pushes", pushes, "override the push count");
  auto* run_seed = run->add_option("--seed", opt.seed, "override the seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--grid-in", grid_in, "initial learned grid");
  run->add_flag("--freeze-grid", freeze_grid,
                "replay a learned grid without updating it");
  run->add_flag("--print-config", opt.print_config,
                "echo the resolved config and exit");

  std::string artifact, analyze_out;
  double bin_width = 1.0;
  std::vector<std::string> log_paths;

  CLI::App* ana = app.add_subcommand("analyze", "reduce logs to artifacts");
  ana->add_option("--artifact", artifact, "fallprob | heatmap | energy")
      ->required();
  ana->add_option("--out", analyze_out, "output basename (.csv and .svg)");
  ana->add_option("--bin-width", bin_width, "impulse bin width (Ns)");
  ana->add_option("logs", log_paths, "run logs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  opt.seed_set = cal_seed->count() > 0 || run_seed->count() > 0;
  opt.gait_explicit = gait_opt->count() > 0;

  try {
    if (cal->parsed()) return cmd_calibrate(opt, cal_out, cal_steps);
    if (run->parsed())
      return cmd_run(opt, controller_name, ctl_opt->count() > 0,
                     all_controllers, jobs, pushes, out_dir, grid_in,
                     freeze_grid);
    return cmd_analyze(artifact, log_paths, analyze_out, bin_width);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
