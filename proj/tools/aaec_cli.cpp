// aaec: batch runner for the exposure-control benchmark.
//
//   aaec run     simulate every scenario x controller x seed, write step logs
//   aaec compare same, plus a seed-averaged table on stdout
//   aaec sweep   metric over log-spaced exposures at the nominal pose
//   aaec plot    SVG scatters and exposure traces from step logs
//
// Exit codes: 0 ok, 2 usage/config, 3 output.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aaec/experiment.hpp"
#include "aaec/report.hpp"

namespace fs = std::filesystem;
using namespace aaec;

namespace {

struct Overrides {
  std::string config;
  // Unset and set-but-empty differ: an empty list is an error.
  std::optional<std::string> scenario;
  std::optional<std::string> controller;
  std::optional<std::string> seed;
  std::optional<long long> frames;
  std::optional<double> fps;
  std::string noise;
  std::string trajectory;
  std::optional<unsigned> threads;
  std::string out;
  bool dump_frames = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI config file");
  cmd->add_option("--scenario", o.scenario, "comma list: normal, lowlight, adversarial");
  cmd->add_option("--controller", o.controller, "comma list: aaec, aec, gec, default");
  cmd->add_option("--seed", o.seed, "comma list of seeds");
  cmd->add_option("--frames", o.frames, "frames per run");
  cmd->add_option("--fps", o.fps, "simulated frame rate");
  cmd->add_option("--noise", o.noise, "on or off");
  cmd->add_option("--trajectory", o.trajectory, "static, lateral or jitter");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--dump-frames", o.dump_frames, "write every captured frame as PGM");
}

// Flags are applied as a config document so they go through the same
// validation as file keys.
exp::ExperimentConfig build_config(const Overrides& o) {
  exp::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = exp::load_config(o.config);
  std::string doc = "[experiment]\n";
  if (o.scenario) doc += "scenarios = " + *o.scenario + "\n";
  if (o.controller) doc += "controllers = " + *o.controller + "\n";
  if (o.seed) doc += "seeds = " + *o.seed + "\n";
  if (o.frames) doc += "frames = " + std::to_string(*o.frames) + "\n";
  if (!o.noise.empty()) doc += "noise = " + o.noise + "\n";
  if (!o.trajectory.empty()) doc += "trajectory = " + o.trajectory + "\n";
  if (o.threads) doc += "threads = " + std::to_string(*o.threads) + "\n";
  if (o.dump_frames) doc += "dump_frames = on\n";
  cfg = exp::parse_config(doc, cfg);
  if (o.fps) cfg.camera.fps = *o.fps;
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

std::vector<eval::Summary> run_and_write(const exp::ExperimentConfig& cfg) {
  const auto runs = exp::run_all(cfg);
  std::vector<eval::Summary> rows;
  for (const auto& r : runs) {
    exp::write_file_atomic(cfg.out_dir / exp::run_file_name(r), exp::steplog_csv(r));
    rows.push_back(eval::summarize(r, cfg.warmup_cap));
  }
  return rows;
}

int cmd_run(const Overrides& o) {
  const auto cfg = build_config(o);
  auto rows = run_and_write(cfg);
  if (cfg.seeds.size() > 1) {
    const auto agg = exp::aggregate(rows);
    rows.insert(rows.end(), agg.begin(), agg.end());
  }
  exp::write_file_atomic(cfg.out_dir / "summary.csv", exp::summary_csv(rows));
  std::cout << "wrote " << rows.size() << " summary rows to " << (cfg.out_dir / "summary.csv").string()
            << '\n';
  return 0;
}

int cmd_compare(const Overrides& o) {
  const auto cfg = build_config(o);
  if (cfg.controllers.size() < 2) throw exp::ConfigError("compare needs at least two controllers");
  const auto rows = run_and_write(cfg);
  const auto agg = exp::aggregate(rows);
  exp::write_file_atomic(cfg.out_dir / "summary.csv", exp::summary_csv(rows));
  exp::write_file_atomic(cfg.out_dir / "compare.csv", exp::summary_csv(agg));
  std::cout << exp::summary_table(agg);
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& region_label, int points) {
  const auto cfg = build_config(o);
  if (cfg.scenarios.size() != 1) throw exp::ConfigError("sweep takes exactly one scenario");
  const auto region = exp::parse_region(region_label);
  const auto scene = exp::build_scene(cfg, cfg.scenarios.front());
  auto params = cfg.params.metric;
  params.crf = cfg.camera.crf;
  const auto res = exp::sweep(scene, cfg.camera, params, region, points);
  const auto name = "sweep_" + std::string(sim::to_string(cfg.scenarios.front())) + "_" +
                    region_label + ".csv";
  exp::write_file_atomic(cfg.out_dir / name, exp::sweep_csv(res));
  const auto& best = res.rows[res.argmax];
  std::cout << "argmax dt_ms=" << best.dt << " m=" << best.m << " found=" << best.found << '\n';
  return 0;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<eval::RunRecord> runs;
  for (const auto& path : inputs) runs.push_back(exp::parse_steplog_csv(exp::read_file(path)));
  const fs::path dir = out.empty() ? fs::path("aaec_out") : fs::path(out);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto stem = fs::path(inputs[i]).stem().string();
    for (auto plane : {report::Plane::xy, report::Plane::xz, report::Plane::yz}) {
      exp::write_file_atomic(dir / ("scatter_" + stem + "_" + std::string(report::to_string(plane)) + ".svg"),
                             report::scatter_svg(runs[i], plane));
    }
  }
  exp::write_file_atomic(dir / "trace.svg", report::trace_svg(runs));
  std::cout << "wrote " << runs.size() * 3 + 1 << " SVG files to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marker-aware exposure control benchmark"};
  app.require_subcommand(1);

  Overrides run_o, cmp_o, sweep_o;
  auto* run = app.add_subcommand("run", "simulate runs and write step logs and a summary");
  add_common(run, run_o);
  auto* cmp = app.add_subcommand("compare", "seed-averaged comparison of two or more controllers");
  add_common(cmp, cmp_o);

  auto* sw = app.add_subcommand("sweep", "metric over log-spaced exposures, noise off");
  add_common(sw, sweep_o);
  std::string region = "roi";
  int points = 64;
  sw->add_option("--region", region, "full or roi");
  sw->add_option("--points", points, "number of exposures (>= 8)");

  auto* plot = app.add_subcommand("plot", "SVG plots from step-log CSVs");
  std::vector<std::string> inputs;
  std::string plot_out;
  plot->add_option("csv", inputs, "step-log CSV files")->required();
  plot->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*cmp) return cmd_compare(cmp_o);
    if (*sw) {
      if (sweep_o.noise.empty()) sweep_o.noise = "off";
      if (!sweep_o.scenario && sweep_o.config.empty()) sweep_o.scenario = "adversarial";
      return cmd_sweep(sweep_o, region, points);
    }
    if (*plot) return cmd_plot(inputs, plot_out);
  } catch (const exp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const exp::OutputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
