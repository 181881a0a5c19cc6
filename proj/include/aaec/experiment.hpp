#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aaec/camera_sim.hpp"
#include "aaec/controller.hpp"
#include "aaec/eval.hpp"

namespace aaec::exp {

/// Bad configuration or usage (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Output could not be written (CLI exit code 3).
struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-scenario overrides of the built-in lighting fixtures.
struct ScenarioOverrides {
  std::optional<double> background_level;
  std::optional<double> marker_illumination;
  std::optional<double> glare_peak;
  std::optional<double> glare_sigma_scale;
  std::optional<double> glare_spill;
};

struct ExperimentConfig {
  // Defaults: the full benchmark grid.
  std::vector<sim::Scenario> scenarios{sim::Scenario::normal, sim::Scenario::lowlight,
                                       sim::Scenario::adversarial};
  std::vector<control::ControllerKind> controllers{
      control::ControllerKind::aaec, control::ControllerKind::aec, control::ControllerKind::gec,
      control::ControllerKind::default_ae};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  long long frames = 1200;  // 60 s at 20 fps
  bool noise = true;
  bool dump_frames = false;

  sim::TrajectoryKind trajectory = sim::TrajectoryKind::static_pose;
  double speed = 0.005;          // m/s (lateral)
  double start_offset_x = -0.15;  // m, applied to lateral runs
  double amplitude = 0.01;       // m (jitter)

  double depth = 0.6;  // m, nominal marker distance
  std::optional<marker::MarkerSpec> marker;
  std::map<sim::Scenario, ScenarioOverrides> scenario_overrides;

  sim::CameraModel camera;
  control::ControllerParams params;
  long long warmup_cap = 50;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::filesystem::path out_dir = "aaec_out";

  /// Throws ConfigError when an invariant fails.
  void validate() const;
};

/// Parses an INI-style file ([section] headers, key = value). Unknown keys
/// and sections are rejected with ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Same parser over an in-memory document, applied on top of `base`.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});

/// Scene for a scenario with config overrides applied.
sim::IrradianceScene build_scene(const ExperimentConfig& cfg, sim::Scenario scenario);
sim::Trajectory build_trajectory(const ExperimentConfig& cfg, const sim::IrradianceScene& scene,
                                 std::uint64_t seed);

/// One closed-loop simulation: capture, detect, control, record.
eval::RunRecord run_single(const ExperimentConfig& cfg, sim::Scenario scenario,
                           control::ControllerKind controller, std::uint64_t seed,
                           const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

/// Every (scenario, controller, seed) combination, in that nesting order.
std::vector<eval::RunRecord> run_all(const ExperimentConfig& cfg);

/// Averages per-seed summaries per (scenario, controller).
std::vector<eval::Summary> aggregate(const std::vector<eval::Summary>& rows);

std::string run_file_name(const eval::RunRecord& rec);
std::string steplog_csv(const eval::RunRecord& rec);
eval::RunRecord parse_steplog_csv(const std::string& text);
std::string summary_csv(const std::vector<eval::Summary>& rows);
std::string summary_table(const std::vector<eval::Summary>& rows);

/// Writes via a temporary file and rename. Throws OutputError.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

enum class Region { full, roi };
Region parse_region(std::string_view label);

struct SweepRow {
  double dt = 0.0;
  double m = 0.0;
  bool found = false;
  double mean_intensity = 0.0;
  double marker_saturated_frac = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t argmax = 0;
  img::Rect region;
};

/// Noise-free metric over n log-spaced exposures at the scene's nominal pose.
SweepResult sweep(const sim::IrradianceScene& scene, const sim::CameraModel& cam,
                  const metric::MetricParams& params, Region region, int n_points);
std::string sweep_csv(const SweepResult& result);

/// RoI built from the exact projected marker corners.
img::Rect ground_truth_roi(const sim::IrradianceScene& scene, const Pose& pose);
/// Fraction of pixels whose centre lies inside the projected marker that read 255.
double marker_saturated_fraction(const img::Image8& frame, const sim::IrradianceScene& scene,
                                 const Pose& pose);

}  // namespace aaec::exp
