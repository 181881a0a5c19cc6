#include "aaec/camera_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aaec::sim {

double crf_apply(const Crf& crf, double x) {
  const double c = std::clamp(x, 0.0, 1.0);
  if (crf.kind == CrfKind::linear) {
    return 255.0 * c;
  }
  return 255.0 * std::pow(c, 1.0 / crf.gamma);
}

double crf_derivative(const Crf& crf, double x) {
  if (x >= 1.0 || x < 0.0) {
    return 0.0;
  }
  if (crf.kind == CrfKind::linear) {
    return 255.0;
  }
  if (x == 0.0) {
    return 0.0;
  }
  return 255.0 / crf.gamma * std::pow(x, 1.0 / crf.gamma - 1.0);
}

double crf_inverse(const Crf& crf, double intensity) {
  const double c = std::clamp(intensity / 255.0, 0.0, 1.0);
  if (crf.kind == CrfKind::linear) {
    return c;
  }
  return std::pow(c, crf.gamma);
}

void CameraModel::validate() const {
  if (width < 8 || height < 8) {
    throw std::invalid_argument("camera must be at least 8x8 pixels");
  }
  if (!(dt_min > 0.0 && dt_min < dt_max)) {
    throw std::invalid_argument("camera exposure bounds need 0 < dt_min < dt_max");
  }
  if (read_noise_sigma < 0.0 || shot_noise_scale < 0.0) {
    throw std::invalid_argument("noise parameters must be non-negative");
  }
  if (crf.kind == CrfKind::gamma && !(crf.gamma > 0.0)) {
    throw std::invalid_argument("gamma CRF exponent must be positive");
  }
  if (!(fps > 0.0)) {
    throw std::invalid_argument("fps must be positive");
  }
}

double CameraModel::clamp_dt(double dt) const { return std::clamp(dt, dt_min, dt_max); }

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::normal:
      return "normal";
    case Scenario::lowlight:
      return "lowlight";
    case Scenario::adversarial:
      return "adversarial";
  }
  return "?";
}

Scenario parse_scenario(std::string_view label) {
  if (label == "normal") return Scenario::normal;
  if (label == "lowlight") return Scenario::lowlight;
  if (label == "adversarial") return Scenario::adversarial;
  throw std::invalid_argument("unknown scenario '" + std::string(label) +
                              "' (valid: normal, lowlight, adversarial)");
}

img::ImageF make_texture(int width, int height, int cell_px, double amplitude,
                         std::uint64_t seed) {
  const int gw = width / cell_px + 2;
  const int gh = height / cell_px + 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) {
    v = uni(rng);
  }
  const auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  img::ImageF tex(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = static_cast<double>(y) / cell_px;
    const int iy = static_cast<int>(fy);
    const double ty = smooth(fy - iy);
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell_px;
      const int ix = static_cast<int>(fx);
      const double tx = smooth(fx - ix);
      const auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
      const double top = at(ix, iy) * (1 - tx) + at(ix + 1, iy) * tx;
      const double bot = at(ix, iy + 1) * (1 - tx) + at(ix + 1, iy + 1) * tx;
      tex(x, y) = 1.0 + amplitude * (top * (1 - ty) + bot * ty);
    }
  }
  return tex;
}

IrradianceScene make_scenario(Scenario label, const CameraModel& cam) {
  IrradianceScene s;
  s.scenario = label;
  s.width = cam.width;
  s.height = cam.height;
  s.intrinsics = Intrinsics{600.0, 600.0, (cam.width - 1) / 2.0, (cam.height - 1) / 2.0};
  s.marker = marker::default_marker();
  s.nominal_pose.rotation = rotation_ypr(0.15, -0.1, 0.08);
  s.nominal_pose.translation = Eigen::Vector3d(0.0, 0.0, 0.6);
  s.texture = make_texture(cam.width, cam.height, 24, 0.5, 0x5eed);
  switch (label) {
    case Scenario::normal:
      s.background_level = 0.30;
      s.marker_illumination = 0.50;
      break;
    case Scenario::lowlight:
      s.background_level = 0.02;
      s.marker_illumination = 0.04;
      break;
    case Scenario::adversarial:
      s.background_level = 0.02;
      s.marker_illumination = 0.005;
      s.glare_peak = 5.0;
      s.glare_sigma_scale = 1.2;
      break;
  }
  return s;
}

MarkerFootprint marker_footprint(const IrradianceScene& scene, const Pose& pose) {
  const auto& t = pose.translation;
  MarkerFootprint fp;
  if (t.z() <= 0.0) {
    return fp;
  }
  const Eigen::Vector2d c = project(scene.intrinsics, t);
  fp.u = c.x();
  fp.v = c.y();
  fp.radius = 0.5 * scene.intrinsics.fx * scene.marker.side / t.z();
  return fp;
}

namespace {

template <typename F>
img::ImageF fill_field(const IrradianceScene& scene, F&& value) {
  img::ImageF out(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      out(x, y) = value(x, y);
    }
  }
  return out;
}

// Glare irradiance, or 0 when the scene has none.
struct Glare {
  double peak = 0.0;
  double u = 0.0;
  double v = 0.0;
  double inv_two_sigma2 = 0.0;

  [[nodiscard]] double at(int x, int y) const {
    if (peak == 0.0) return 0.0;
    const double du = x - u;
    const double dv = y - v;
    return peak * std::exp(-(du * du + dv * dv) * inv_two_sigma2);
  }
};

Glare make_glare(const IrradianceScene& scene, const Pose& pose) {
  Glare g;
  const auto fp = marker_footprint(scene, pose);
  if (scene.glare_peak <= 0.0 || fp.radius <= 0.0) {
    return g;
  }
  const double sigma = scene.glare_sigma_scale * fp.radius;
  g.peak = scene.glare_peak;
  g.u = fp.u;
  g.v = fp.v;
  g.inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  return g;
}

}  // namespace

img::ImageF illumination_field(const IrradianceScene& scene, const Pose& pose) {
  const Glare glare = make_glare(scene, pose);
  return fill_field(scene, [&](int x, int y) { return scene.marker_illumination + glare.at(x, y); });
}

img::ImageF background_field(const IrradianceScene& scene, const Pose& pose) {
  const Glare glare = make_glare(scene, pose);
  const bool textured = !scene.texture.empty();
  return fill_field(scene, [&](int x, int y) {
    const double tex = textured ? scene.texture(x, y) : 1.0;
    return tex * (scene.background_level + scene.glare_spill * glare.at(x, y));
  });
}

img::ImageF render_irradiance(const IrradianceScene& scene, const Pose& pose) {
  img::ImageF field = background_field(scene, pose);
  const img::ImageF illum = illumination_field(scene, pose);
  marker::render_marker(field, illum, scene.marker, pose, scene.intrinsics);
  return field;
}

img::ImageF expose_ideal(const img::ImageF& irradiance, const Crf& crf, double dt) {
  img::ImageF out(irradiance.width, irradiance.height);
  std::transform(irradiance.data.begin(), irradiance.data.end(), out.data.begin(),
                 [&](double e) { return crf_apply(crf, e * dt); });
  return out;
}

Frame capture(const img::ImageF& irradiance, const CameraModel& cam, double dt,
              std::mt19937_64* rng) {
  if (!(dt >= cam.dt_min && dt <= cam.dt_max)) {
    throw std::out_of_range("exposure time outside camera bounds");
  }
  Frame f{img::Image8(irradiance.width, irradiance.height), dt};
  std::normal_distribution<double> normal(0.0, 1.0);
  const double shot2 = cam.shot_noise_scale * cam.shot_noise_scale;
  const double read2 = cam.read_noise_sigma * cam.read_noise_sigma;
  for (std::size_t i = 0; i < irradiance.data.size(); ++i) {
    double v = crf_apply(cam.crf, irradiance.data[i] * dt);
    if (rng != nullptr) {
      // Shot and read noise are independent Gaussians; draw their sum once.
      v += std::sqrt(shot2 * v + read2) * normal(*rng);
    }
    f.image.data[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  return f;
}

Frame capture(const IrradianceScene& scene, const CameraModel& cam, double dt,
              const Pose& pose, std::mt19937_64* rng) {
  return capture(render_irradiance(scene, pose), cam, dt, rng);
}

const img::ImageF& SceneRenderer::irradiance(const Pose& pose) {
  if (cached_.empty() || !(pose == cached_pose_)) {
    cached_ = render_irradiance(scene_, pose);
    cached_pose_ = pose;
  }
  return cached_;
}

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::static_pose:
      return "static";
    case TrajectoryKind::lateral:
      return "lateral";
    case TrajectoryKind::jitter:
      return "jitter";
  }
  return "?";
}

TrajectoryKind parse_trajectory(std::string_view label) {
  if (label == "static") return TrajectoryKind::static_pose;
  if (label == "lateral") return TrajectoryKind::lateral;
  if (label == "jitter") return TrajectoryKind::jitter;
  throw std::invalid_argument("unknown trajectory '" + std::string(label) +
                              "' (valid: static, lateral, jitter)");
}

Trajectory make_trajectory(TrajectoryKind kind, const Pose& start, double duration,
                           std::uint64_t seed, double speed, double amplitude) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("trajectory duration must be positive");
  }
  Trajectory tr;
  tr.kind = kind;
  tr.start = start;
  tr.duration = duration;
  tr.seed = seed;
  tr.speed = speed;
  tr.amplitude = amplitude;
  if (kind == TrajectoryKind::jitter) {
    constexpr double theta = 2.0;  // 1/s
    const double decay = std::exp(-theta * tr.sample_step);
    const double kick = amplitude * std::sqrt(1.0 - decay * decay);
    const auto n = static_cast<std::size_t>(std::ceil(duration / tr.sample_step)) + 2;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    tr.offsets.reserve(n);
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      tr.offsets.push_back(x);
      for (int a = 0; a < 3; ++a) {
        x[a] = decay * x[a] + (tr.jitter_axes[a] ? kick * normal(rng) : 0.0);
      }
    }
  }
  return tr;
}

Pose pose_at(const Trajectory& traj, double t) {
  if (!(t >= 0.0 && t <= traj.duration)) {
    throw std::out_of_range("trajectory time outside [0, duration]");
  }
  Pose p = traj.start;
  switch (traj.kind) {
    case TrajectoryKind::static_pose:
      break;
    case TrajectoryKind::lateral:
      p.translation.x() += traj.speed * t;
      break;
    case TrajectoryKind::jitter: {
      const double s = t / traj.sample_step;
      const auto i = std::min(static_cast<std::size_t>(s), traj.offsets.size() - 2);
      const double a = s - static_cast<double>(i);
      p.translation += (1.0 - a) * traj.offsets[i] + a * traj.offsets[i + 1];
      break;
    }
  }
  return p;
}

}  // namespace aaec::sim
