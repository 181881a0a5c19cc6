#include <doctest.h>

#include <filesystem>

#include "aaec/experiment.hpp"
#include "aaec/report.hpp"

using namespace aaec;
using namespace aaec::exp;

namespace {

ExperimentConfig quick(long long frames = 30) {
  ExperimentConfig cfg;
  cfg.frames = frames;
  cfg.scenarios = {sim::Scenario::normal};
  cfg.controllers = {control::ControllerKind::aaec};
  cfg.seeds = {1};
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("default configuration is the full grid") {
  const ExperimentConfig cfg;
  CHECK(cfg.scenarios.size() == 3);
  CHECK(cfg.controllers.size() == 4);
  CHECK(cfg.seeds.size() == 3);
  CHECK(cfg.frames == 1200);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config parsing") {
  const std::string text = R"(
# comment
[experiment]
scenarios = normal, adversarial
controllers = aaec,default
seeds = 4, 5
frames = 250   ; trailing comment
noise = off
trajectory = lateral
speed = 0.01
depth = 0.8

[camera]
crf = gamma
crf_gamma = 2.2
dt_max = 40

[controller]
gamma = 0.5
eta = 0.05
step_clip = 2
p = 0.6

[scenario.adversarial]
glare_peak = 3.5

[marker]
side = 0.12
row = 00000
row = 01100
row = 01010
row = 01110
row = 00000
)";
  const auto cfg = parse_config(text);
  CHECK(cfg.scenarios == std::vector{sim::Scenario::normal, sim::Scenario::adversarial});
  CHECK(cfg.controllers == std::vector{control::ControllerKind::aaec, control::ControllerKind::default_ae});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(cfg.frames == 250);
  CHECK_FALSE(cfg.noise);
  CHECK(cfg.trajectory == sim::TrajectoryKind::lateral);
  CHECK(cfg.speed == 0.01);
  CHECK(cfg.depth == 0.8);
  CHECK(cfg.camera.crf.kind == sim::CrfKind::gamma);
  CHECK(cfg.camera.crf.gamma == 2.2);
  CHECK(cfg.camera.dt_max == 40.0);
  CHECK(cfg.params.gamma_m == 0.5);
  CHECK(cfg.params.eta == 0.05);
  CHECK(cfg.params.step_clip == 2.0);
  CHECK(cfg.params.metric.p == 0.6);
  CHECK(cfg.params.metric.crf.kind == sim::CrfKind::gamma);
  REQUIRE(cfg.marker.has_value());
  CHECK(cfg.marker->side == 0.12);
  CHECK(cfg.marker->grid[1][1]);
  CHECK_NOTHROW(cfg.validate());

  const auto scene = build_scene(cfg, sim::Scenario::adversarial);
  CHECK(scene.glare_peak == 3.5);
  CHECK(scene.nominal_pose.translation.z() == 0.8);
  CHECK(scene.marker.side == 0.12);
  CHECK(build_scene(cfg, sim::Scenario::normal).glare_peak == 0.0);
}

TEST_CASE("config errors name the line") {
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nframez = 3\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nframes = 3\n\n[bogus]\n"), doctest::Contains("line 4"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("frames = 3\n"), doctest::Contains("outside"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nframes = many\n"), doctest::Contains("number"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nframes = 2.5\n"), doctest::Contains("integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nnoise = maybe\n"), doctest::Contains("on/off"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\ncontrollers = aaec, pid\n"), doctest::Contains("pid"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\njust words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[camera]\ncrf = log\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[scenario.sunny]\nglare_peak = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[marker]\nrow = 01x\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/aaec.ini"), ConfigError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\ncontrollers =\n").validate(), doctest::Contains("controller"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nframes = 5\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[controller]\neta = -1\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[camera]\ndt_min = 10\ndt_max = 5\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[marker]\nrow = 000\nrow = 010\nrow = 000\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\ndepth = 0\n").validate(), ConfigError);
}

TEST_CASE("single runs are deterministic per seed") {
  const auto cfg = quick(25);
  const auto a = run_single(cfg, sim::Scenario::normal, control::ControllerKind::aaec, 3);
  const auto b = run_single(cfg, sim::Scenario::normal, control::ControllerKind::aaec, 3);
  const auto c = run_single(cfg, sim::Scenario::normal, control::ControllerKind::aaec, 4);
  CHECK(steplog_csv(a) == steplog_csv(b));
  CHECK(steplog_csv(a) != steplog_csv(c));
  REQUIRE(a.frames.size() == 25);
  CHECK(a.frames[0].log.dt == cfg.params.initial_dt);
  CHECK(a.frames[3].log.t == doctest::Approx(3.0 / cfg.camera.fps));
  for (const auto& f : a.frames) CHECK(f.truth == sim::make_scenario(sim::Scenario::normal, cfg.camera).nominal_pose.translation);
}

TEST_CASE("lateral runs move the ground truth") {
  auto cfg = quick(40);
  cfg.trajectory = sim::TrajectoryKind::lateral;
  cfg.speed = 0.02;
  const auto r = run_single(cfg, sim::Scenario::normal, control::ControllerKind::default_ae, 1);
  CHECK(r.frames.front().truth.x() == doctest::Approx(cfg.start_offset_x));
  CHECK(r.frames.back().truth.x() - r.frames.front().truth.x() == doctest::Approx(0.02 * 39 / 20.0));
}

TEST_CASE("step log CSV round trip") {
  const auto cfg = quick(30);
  const auto run = run_single(cfg, sim::Scenario::normal, control::ControllerKind::aaec, 2);
  const auto text = steplog_csv(run);
  const auto back = parse_steplog_csv(text);
  CHECK(back.scenario == "normal");
  CHECK(back.controller == "aaec");
  CHECK(back.seed == 2);
  CHECK(back.fps == run.fps);
  REQUIRE(back.frames.size() == run.frames.size());
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    const auto& x = run.frames[i];
    const auto& y = back.frames[i];
    CHECK(y.log.dt == doctest::Approx(x.log.dt).epsilon(1e-8));
    CHECK(y.log.found == x.log.found);
    CHECK(y.log.roi == x.log.roi);
    CHECK(y.log.mode == x.log.mode);
    CHECK(y.detected.has_value() == x.detected.has_value());
  }
  CHECK(steplog_csv(back) == text);
  CHECK(run_file_name(run) == "run_normal_aaec_s2.csv");

  CHECK_THROWS_AS(parse_steplog_csv("frame,dt\n1,2\n"), ConfigError);
  const auto head = text.substr(0, text.find('\n', text.find('\n') + 1) + 1);
  CHECK_THROWS_WITH_AS(parse_steplog_csv(head + "1,2,3\n"), doctest::Contains("19 columns"), ConfigError);
}

TEST_CASE("baselines leave the metric column empty") {
  const auto cfg = quick(12);
  const auto run = run_single(cfg, sim::Scenario::normal, control::ControllerKind::gec, 1);
  CHECK(std::isnan(run.frames[0].log.m));
  CHECK(steplog_csv(run).find(",nan,") != std::string::npos);
}

TEST_CASE("run_all nests scenario, controller, seed") {
  auto cfg = quick(12);
  cfg.scenarios = {sim::Scenario::normal, sim::Scenario::lowlight};
  cfg.controllers = {control::ControllerKind::aec, control::ControllerKind::default_ae};
  cfg.seeds = {1, 2};
  const auto runs = run_all(cfg);
  REQUIRE(runs.size() == 8);
  CHECK(runs[0].scenario == "normal");
  CHECK(runs[0].controller == "aec");
  CHECK(runs[1].seed == 2);
  CHECK(runs[2].controller == "default");
  CHECK(runs[4].scenario == "lowlight");
  // Threading does not change results.
  cfg.threads = 3;
  const auto again = run_all(cfg);
  for (std::size_t i = 0; i < runs.size(); ++i) CHECK(steplog_csv(runs[i]) == steplog_csv(again[i]));
}

TEST_CASE("aggregation averages per scenario and controller") {
  eval::Summary a, b, c;
  a.scenario = b.scenario = c.scenario = "normal";
  a.controller = b.controller = "aaec";
  c.controller = "aec";
  a.cov_det = 1.0;
  b.cov_det = 3.0;
  a.detection_rate = 0.5;
  b.detection_rate = 1.0;
  a.convergence.frames = 10;
  a.convergence.seconds = 0.5;
  b.convergence.frames = 20;
  b.convergence.seconds = 1.0;
  c.cov_det = std::numeric_limits<double>::infinity();
  const auto agg = aggregate({a, c, b});
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].controller == "aaec");
  CHECK(agg[0].cov_det == 2.0);
  CHECK(agg[0].detection_rate == 0.75);
  CHECK(*agg[0].convergence.frames == 15);
  CHECK(agg[0].seed == "mean2");
  CHECK(std::isinf(agg[1].cov_det));
  CHECK_FALSE(agg[1].convergence.frames.has_value());

  const auto csv = summary_csv({a, c});
  CHECK(csv.find("normal,aec,") != std::string::npos);
  CHECK(csv.find(",inf,") != std::string::npos);
  CHECK(csv.find("none,none") != std::string::npos);
  CHECK(summary_table({a}).find("controller") != std::string::npos);
}

TEST_CASE("exposure sweep") {
  const sim::CameraModel cam;
  const auto scene = sim::make_scenario(sim::Scenario::normal, cam);
  const auto sw = sweep(scene, cam, metric::MetricParams{}, Region::full, 16);
  REQUIRE(sw.rows.size() == 16);
  CHECK(sw.rows.front().dt == doctest::Approx(cam.dt_min));
  CHECK(sw.rows.back().dt == doctest::Approx(cam.dt_max));
  for (std::size_t i = 1; i < sw.rows.size(); ++i) {
    CHECK(sw.rows[i].dt > sw.rows[i - 1].dt);
    CHECK(sw.rows[i].mean_intensity >= sw.rows[i - 1].mean_intensity);
  }
  for (const auto& r : sw.rows) CHECK(r.m <= sw.rows[sw.argmax].m);
  CHECK(sw.region == cam.frame_rect());
  const auto csv = sweep_csv(sw);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 18);
  CHECK_THROWS_AS(sweep(scene, cam, metric::MetricParams{}, Region::full, 4), ConfigError);
  CHECK(parse_region("roi") == Region::roi);
  CHECK_THROWS_AS(parse_region("left"), ConfigError);
}

TEST_CASE("ground-truth RoI and marker saturation") {
  const sim::CameraModel cam;
  const auto scene = sim::make_scenario(sim::Scenario::normal, cam);
  const auto roi = ground_truth_roi(scene, scene.nominal_pose);
  for (const auto& c : marker::project_corners(scene.marker, scene.nominal_pose, scene.intrinsics)) {
    CHECK(c.x() >= roi.x0);
    CHECK(c.y() >= roi.y0);
    CHECK(c.x() <= roi.x0 + roi.w);
    CHECK(c.y() <= roi.y0 + roi.h);
  }
  CHECK(marker_saturated_fraction(img::Image8(640, 480, 255), scene, scene.nominal_pose) == 1.0);
  CHECK(marker_saturated_fraction(img::Image8(640, 480, 254), scene, scene.nominal_pose) == 0.0);
}

TEST_CASE("atomic writes") {
  const auto dir = std::filesystem::temp_directory_path() / "aaec_write_test";
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "sub" / "x.txt", "hello\n");
  CHECK(read_file(dir / "sub" / "x.txt") == "hello\n");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "x.txt.tmp"));
  write_file_atomic(dir / "sub" / "x.txt", "again");
  CHECK(read_file(dir / "sub" / "x.txt") == "again");
  std::filesystem::create_directories(dir / "blocker");
  CHECK_THROWS_AS(write_file_atomic(dir / "blocker", "x"), OutputError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_file(dir / "missing"), ConfigError);
}

TEST_CASE("plots") {
  auto cfg = quick(20);
  const auto run = run_single(cfg, sim::Scenario::normal, control::ControllerKind::aaec, 1);
  const auto svg = report::scatter_svg(run, report::Plane::xz);
  std::size_t found = 0;
  for (const auto& f : run.frames) found += f.detected ? 1 : 0;
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  CHECK(circles == found);
  CHECK(svg == report::scatter_svg(run, report::Plane::xz));

  const auto trace = report::trace_svg({run, run});
  std::size_t lines = 0;
  for (auto pos = trace.find("<polyline"); pos != std::string::npos; pos = trace.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 2);
}

}  // TEST_SUITE
