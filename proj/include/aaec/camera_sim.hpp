#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "aaec/geometry.hpp"
#include "aaec/imgproc.hpp"
#include "aaec/marker.hpp"

namespace aaec::sim {

enum class CrfKind { linear, gamma };

/// Camera response: accumulated exposure x = E*dt (dimensionless, 1 saturates)
/// to intensity in DN.
struct Crf {
  CrfKind kind = CrfKind::linear;
  double gamma = 1.0;  // used when kind == gamma; output is 255 * x^(1/gamma)
};

double crf_apply(const Crf& crf, double x);
double crf_derivative(const Crf& crf, double x);
/// Accumulated exposure that produces `intensity` DN; saturates at 1.
double crf_inverse(const Crf& crf, double intensity);

struct CameraModel {
  int width = 640;
  int height = 480;
  Crf crf;
  double dt_min = 0.01;  // ms
  double dt_max = 50.0;  // ms
  double read_noise_sigma = 2.0;  // DN
  double shot_noise_scale = 0.5;
  double fps = 20.0;

  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
  [[nodiscard]] double clamp_dt(double dt) const;
  [[nodiscard]] img::Rect frame_rect() const { return {0, 0, width, height}; }
};

struct Frame {
  img::Image8 image;
  double dt = 0.0;  // ms
};

enum class Scenario { normal, lowlight, adversarial };

std::string_view to_string(Scenario s);
/// Throws std::invalid_argument naming the valid labels.
Scenario parse_scenario(std::string_view label);

/// Scene description. The irradiance field itself depends on the marker pose
/// (the adversarial glare follows the marker), so it is produced per pose by
/// render_irradiance.
struct IrradianceScene {
  Scenario scenario = Scenario::normal;
  int width = 640;
  int height = 480;
  Intrinsics intrinsics;
  marker::MarkerSpec marker;
  Pose nominal_pose;

  /// Mean background irradiance in saturation units per ms.
  double background_level = 0.30;
  /// Uniform illumination falling on the marker (normal, lowlight).
  double marker_illumination = 0.50;
  /// Gaussian glare centred on the marker (adversarial). Zero peak disables it.
  double glare_peak = 0.0;
  double glare_sigma_scale = 1.2;  // times the projected marker radius
  double glare_spill = 0.1;        // fraction of glare reaching the background

  /// Background reflectance texture, mean 1. Fixed in image coordinates.
  img::ImageF texture;
};

/// Smooth value-noise texture with mean 1 and values in [1 - amplitude, 1 + amplitude].
img::ImageF make_texture(int width, int height, int cell_px, double amplitude,
                         std::uint64_t seed);

IrradianceScene make_scenario(Scenario label, const CameraModel& cam);

/// Projected marker centre and radius (half the projected side) for a pose.
struct MarkerFootprint {
  double u = 0.0;
  double v = 0.0;
  double radius = 0.0;
};
MarkerFootprint marker_footprint(const IrradianceScene& scene, const Pose& pose);

/// Illumination field (saturation units per ms) that falls on the marker.
img::ImageF illumination_field(const IrradianceScene& scene, const Pose& pose);
/// Background irradiance field without the marker.
img::ImageF background_field(const IrradianceScene& scene, const Pose& pose);
/// Full irradiance field E(u, v) with the marker rendered at `pose`.
img::ImageF render_irradiance(const IrradianceScene& scene, const Pose& pose);

/// Noise-free intensities before quantisation: crf_apply(E * dt) per pixel.
img::ImageF expose_ideal(const img::ImageF& irradiance, const Crf& crf, double dt);

/// Exposure, noise and 8-bit quantisation of a prepared irradiance field.
/// rng == nullptr disables noise.
Frame capture(const img::ImageF& irradiance, const CameraModel& cam, double dt,
              std::mt19937_64* rng);

/// Renders the scene at `pose` and captures it.
Frame capture(const IrradianceScene& scene, const CameraModel& cam, double dt,
              const Pose& pose, std::mt19937_64* rng);

/// Caches the last rendered irradiance field so static runs render once.
class SceneRenderer {
 public:
  explicit SceneRenderer(IrradianceScene scene) : scene_(std::move(scene)) {}

  const img::ImageF& irradiance(const Pose& pose);
  [[nodiscard]] const IrradianceScene& scene() const { return scene_; }

 private:
  IrradianceScene scene_;
  Pose cached_pose_;
  img::ImageF cached_;
};

enum class TrajectoryKind { static_pose, lateral, jitter };

std::string_view to_string(TrajectoryKind k);
TrajectoryKind parse_trajectory(std::string_view label);

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::static_pose;
  Pose start;
  double speed = 0.005;        // m/s along camera x (lateral)
  double amplitude = 0.01;     // m, stationary std-dev per jittered axis
  bool jitter_axes[3] = {true, true, true};
  double duration = 60.0;      // s
  std::uint64_t seed = 0;

  // Ornstein-Uhlenbeck offsets sampled on a fixed grid (jitter only).
  double sample_step = 0.0125;
  std::vector<Eigen::Vector3d> offsets;
};

/// Builds a trajectory; for jitter the OU path is drawn here from `seed`.
Trajectory make_trajectory(TrajectoryKind kind, const Pose& start, double duration,
                           std::uint64_t seed, double speed = 0.005,
                           double amplitude = 0.01);

/// Pose at time t in [0, duration]; throws std::out_of_range otherwise.
Pose pose_at(const Trajectory& traj, double t);

}  // namespace aaec::sim
