#pragma once

#include <optional>
#include <string_view>

#include "aaec/camera_sim.hpp"
#include "aaec/marker.hpp"
#include "aaec/metric.hpp"

namespace aaec::control {

enum class ControllerKind { aaec, aec, gec, default_ae };

std::string_view to_string(ControllerKind k);
/// Throws std::invalid_argument naming the valid labels.
ControllerKind parse_controller(std::string_view label);

struct ControllerParams {
  double gamma_m = 0.9;  // momentum factor
  double eta = 0.1;      // learning rate on the normalised derivative
  double threshold = 1e-3;  // deadband on |normalised derivative|
  double step_clip = 1.0;   // bound on |normalised derivative| inside the update
  int hold_frames = 10;     // frames the last RoI survives a missed detection
  /// Frames without any detection after which reacquire mode restarts at
  /// dt_min and multiplies dt by scan_factor each frame, wrapping at dt_max;
  /// 0 disables scanning.
  int scan_after = 20;
  double scan_factor = 2.0;
  double saturation_escape = 0.9;  // saturated fraction that halves dt in reacquire
  double initial_dt = 1.0;         // ms

  // Baselines.
  double gec_kappa = 0.5;
  double default_target_mean = 118.0;  // DN
  double default_exponent = 0.7;

  metric::MetricParams metric;

  /// Throws std::invalid_argument for eta <= 0, gamma outside [0, 1) and
  /// similar misconfiguration.
  void validate() const;
};

enum class Mode { tracking, reacquire };

struct ControllerState {
  double dt = 1.0;  // ms
  double v = 0.0;   // ms per step
  std::optional<img::Rect> roi;
  int frames_since_detection = 0;
  Mode mode = Mode::reacquire;
  long long frame = 0;
};

ControllerState initial_state(const sim::CameraModel& cam, const ControllerParams& params);

/// One row per processed frame.
struct StepLog {
  long long frame = 0;
  double t = 0.0;   // simulated seconds
  double dt = 0.0;  // exposure used for this frame, ms
  double m = 0.0;   // NaN for controllers that do not evaluate the metric
  double dhat = 0.0;
  double v = 0.0;
  double saturated_frac = 0.0;
  bool found = false;
  img::Rect roi;
  Mode mode = Mode::reacquire;
};

/// Derivative normalisation: elasticity d ln M / d ln dt, zero when M = 0.
double normalized_derivative(const metric::MetricReport& rep, double dt);

/// Marker-aware momentum ascent over a tracked RoI.
StepLog aaec_step(ControllerState& state, const sim::Frame& frame,
                  const marker::DetectionResult& det, const sim::CameraModel& cam,
                  const ControllerParams& params);

/// Same update over the full frame, without momentum.
StepLog aec_global_step(ControllerState& state, const sim::Frame& frame,
                        const sim::CameraModel& cam, const ControllerParams& params);

/// Gamma-probe baseline: the gamma that maximises full-frame gradient mass
/// tells which way to move the exposure.
StepLog gec_step(ControllerState& state, const sim::Frame& frame, const sim::CameraModel& cam,
                 const ControllerParams& params);

/// Mean-intensity baseline targeting a fixed midtone.
StepLog default_ae_step(ControllerState& state, const sim::Frame& frame,
                        const sim::CameraModel& cam, const ControllerParams& params);

StepLog step(ControllerKind kind, ControllerState& state, const sim::Frame& frame,
             const marker::DetectionResult& det, const sim::CameraModel& cam,
             const ControllerParams& params);

/// Gamma values probed by gec_step, and the winner for a frame.
inline constexpr double gec_gammas[] = {0.5, 0.67, 0.8, 1.0, 1.25, 1.5, 2.0};
double gec_best_gamma(const img::Image8& frame);

}  // namespace aaec::control
