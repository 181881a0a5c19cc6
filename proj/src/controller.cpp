#include "aaec/controller.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace aaec::control {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

StepLog begin_log(const ControllerState& state, const sim::Frame& frame,
                  const sim::CameraModel& cam) {
  StepLog log;
  log.frame = state.frame;
  log.t = static_cast<double>(state.frame) / cam.fps;
  log.dt = frame.dt;
  log.m = kNaN;
  log.dhat = kNaN;
  log.roi = cam.frame_rect();
  log.mode = state.mode;
  return log;
}

double saturated_fraction(const img::Image8& im) {
  const auto n = std::count(im.data.begin(), im.data.end(), std::uint8_t{255});
  return static_cast<double>(n) / static_cast<double>(im.data.size());
}

// Near the saturation onset a few noisy pixels can drive the elasticity to
// -10 and beyond; unbounded, one such frame throws dt down to dt_min.
double clipped(double dhat, const ControllerParams& params) {
  return std::clamp(dhat, -params.step_clip, params.step_clip);
}

void finish(ControllerState& state, StepLog& log) {
  log.v = state.v;
  log.mode = state.mode;
  ++state.frame;
}

}  // namespace

std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::aaec:
      return "aaec";
    case ControllerKind::aec:
      return "aec";
    case ControllerKind::gec:
      return "gec";
    case ControllerKind::default_ae:
      return "default";
  }
  return "?";
}

ControllerKind parse_controller(std::string_view label) {
  if (label == "aaec") return ControllerKind::aaec;
  if (label == "aec") return ControllerKind::aec;
  if (label == "gec") return ControllerKind::gec;
  if (label == "default") return ControllerKind::default_ae;
  throw std::invalid_argument("unknown controller '" + std::string(label) +
                              "' (valid: aaec, aec, gec, default)");
}

void ControllerParams::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate eta must be positive");
  if (!(gamma_m >= 0.0 && gamma_m < 1.0)) {
    throw std::invalid_argument("momentum factor gamma must lie in [0, 1)");
  }
  if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be non-negative");
  if (hold_frames < 0 || scan_after < 0) {
    throw std::invalid_argument("frame counts must be non-negative");
  }
  if (!(step_clip > 0.0)) throw std::invalid_argument("step clip must be positive");
  if (!(scan_factor > 1.0)) {
    throw std::invalid_argument("scan factor must exceed 1");
  }
  if (!(initial_dt > 0.0)) throw std::invalid_argument("initial exposure must be positive");
  if (!(default_target_mean > 0.0 && default_target_mean < 255.0)) {
    throw std::invalid_argument("default target mean must lie in (0, 255)");
  }
  metric.validate();
}

ControllerState initial_state(const sim::CameraModel& cam, const ControllerParams& params) {
  params.validate();
  ControllerState s;
  s.dt = cam.clamp_dt(params.initial_dt);
  return s;
}

double normalized_derivative(const metric::MetricReport& rep, double dt) {
  if (!(rep.m > 1e-12)) return 0.0;
  return rep.dm_ddt * dt / rep.m;
}

StepLog aaec_step(ControllerState& state, const sim::Frame& frame,
                  const marker::DetectionResult& det, const sim::CameraModel& cam,
                  const ControllerParams& params) {
  StepLog log = begin_log(state, frame, cam);
  log.found = det.found;
  const img::Rect full = cam.frame_rect();

  if (det.found) {
    state.roi = marker::roi_from_detection(det, full);
    state.mode = Mode::tracking;
    state.frames_since_detection = 0;
  } else {
    ++state.frames_since_detection;
    if (state.frames_since_detection > params.hold_frames || !state.roi) {
      state.mode = Mode::reacquire;
      state.roi = full;
    }
  }
  if (state.roi->w < 3 || state.roi->h < 3 ||
      static_cast<long long>(state.roi->w - 2) * (state.roi->h - 2) < 2) {
    state.roi = full;
  }
  log.roi = *state.roi;

  const auto rep = metric::dm_ddt(frame, *state.roi, params.metric,
                                  metric::IrradianceSource::inverse_crf);
  const double dhat = normalized_derivative(rep, state.dt);
  log.m = rep.m;
  log.dhat = dhat;
  log.saturated_frac = rep.saturated_frac;

  const bool reacquire = state.mode == Mode::reacquire;
  if (reacquire && rep.saturated_frac > params.saturation_escape) {
    state.dt = cam.clamp_dt(state.dt * 0.5);
    state.v = 0.0;
  } else if (reacquire && params.scan_after > 0 &&
             state.frames_since_detection >= params.scan_after) {
    // Upward scan from the shortest exposure: an under-exposed marker is
    // still detectable, a saturated one is not.
    const double next = state.frames_since_detection == params.scan_after
                            ? cam.dt_min
                            : state.dt * params.scan_factor;
    state.dt = next > cam.dt_max ? cam.dt_min : next;
    state.v = 0.0;
  } else {
    // Restart: velocity that points against the current slope is dropped,
    // otherwise the ascent orbits the kink at the saturation onset.
    if (dhat * state.v < 0.0) state.v = 0.0;
    if (std::abs(dhat) >= params.threshold) {
      state.v = params.gamma_m * state.v + params.eta * clipped(dhat, params) * state.dt;
    } else {
      state.v = params.gamma_m * state.v;
    }
    const double next = state.dt + state.v;
    state.dt = cam.clamp_dt(next);
    if (state.dt != next) state.v = 0.0;
  }
  finish(state, log);
  return log;
}

StepLog aec_global_step(ControllerState& state, const sim::Frame& frame,
                        const sim::CameraModel& cam, const ControllerParams& params) {
  StepLog log = begin_log(state, frame, cam);
  state.mode = Mode::reacquire;
  state.roi = cam.frame_rect();
  const auto rep = metric::dm_ddt(frame, *state.roi, params.metric,
                                  metric::IrradianceSource::inverse_crf);
  const double dhat = normalized_derivative(rep, state.dt);
  log.m = rep.m;
  log.dhat = dhat;
  log.saturated_frac = rep.saturated_frac;
  state.v = 0.0;
  if (rep.saturated_frac > params.saturation_escape) {
    state.dt = cam.clamp_dt(state.dt * 0.5);
  } else if (std::abs(dhat) >= params.threshold) {
    state.dt = cam.clamp_dt(state.dt + params.eta * clipped(dhat, params) * state.dt);
  }
  finish(state, log);
  return log;
}

double gec_best_gamma(const img::Image8& frame) {
  double best_mass = -1.0;
  double best_gamma = 1.0;
  bool all_equal = true;
  double first_mass = -1.0;
  img::ImageF remapped(frame.width, frame.height);
  for (double g : gec_gammas) {
    std::array<double, 256> lut{};
    for (int i = 0; i < 256; ++i) lut[i] = 255.0 * std::pow(i / 255.0, g);
    for (std::size_t i = 0; i < frame.data.size(); ++i) remapped.data[i] = lut[frame.data[i]];
    const double mass = img::gradient_mass(remapped);
    if (first_mass < 0.0) first_mass = mass;
    if (mass != first_mass) all_equal = false;
    if (mass > best_mass) {
      best_mass = mass;
      best_gamma = g;
    }
  }
  if (all_equal) {
    // No gradient under any remap (flat or fully clipped frame): move away
    // from whichever end of the range the frame sits at.
    const double sum = std::accumulate(frame.data.begin(), frame.data.end(), 0.0);
    const double mean = sum / static_cast<double>(frame.data.size());
    return mean > 127.5 ? gec_gammas[std::size(gec_gammas) - 1] : gec_gammas[0];
  }
  return best_gamma;
}

StepLog gec_step(ControllerState& state, const sim::Frame& frame, const sim::CameraModel& cam,
                 const ControllerParams& params) {
  StepLog log = begin_log(state, frame, cam);
  log.saturated_frac = saturated_fraction(frame.image);
  const double g = gec_best_gamma(frame.image);
  state.dt = cam.clamp_dt(state.dt * (1.0 + params.gec_kappa * (1.0 - g) / g));
  state.v = 0.0;
  finish(state, log);
  return log;
}

StepLog default_ae_step(ControllerState& state, const sim::Frame& frame,
                        const sim::CameraModel& cam, const ControllerParams& params) {
  StepLog log = begin_log(state, frame, cam);
  log.saturated_frac = saturated_fraction(frame.image);
  const double sum = std::accumulate(frame.image.data.begin(), frame.image.data.end(), 0.0);
  const double mean = std::max(sum / static_cast<double>(frame.image.data.size()), 0.5);
  state.dt = cam.clamp_dt(state.dt *
                          std::pow(params.default_target_mean / mean, params.default_exponent));
  state.v = 0.0;
  finish(state, log);
  return log;
}

StepLog step(ControllerKind kind, ControllerState& state, const sim::Frame& frame,
             const marker::DetectionResult& det, const sim::CameraModel& cam,
             const ControllerParams& params) {
  StepLog log;
  switch (kind) {
    case ControllerKind::aaec:
      return aaec_step(state, frame, det, cam, params);
    case ControllerKind::aec:
      log = aec_global_step(state, frame, cam, params);
      break;
    case ControllerKind::gec:
      log = gec_step(state, frame, cam, params);
      break;
    case ControllerKind::default_ae:
      log = default_ae_step(state, frame, cam, params);
      break;
  }
  log.found = det.found;
  return log;
}

}  // namespace aaec::control
