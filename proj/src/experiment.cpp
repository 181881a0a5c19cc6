#include "aaec/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "aaec/marker.hpp"

namespace aaec::exp {

namespace {

constexpr const char* kStepLogTag = "# aaec-steplog v1";
constexpr const char* kSummaryTag = "# aaec-summary v1";
constexpr const char* kSweepTag = "# aaec-sweep v1";

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError(where + ": expected a number, got '" + s + "'");
  }
  return v;
}

long long to_int(const std::string& s, const std::string& where) {
  const double v = to_double(s, where);
  if (v != std::floor(v)) throw ConfigError(where + ": expected an integer, got '" + s + "'");
  return static_cast<long long>(v);
}

bool to_bool(const std::string& s, const std::string& where) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError(where + ": expected on/off, got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& value, F&& parse_one) {
  std::vector<T> out;
  for (const auto& item : split(value, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_one(item));
  }
  return out;
}

// Wraps the module parsers so bad labels surface as ConfigError.
template <typename F>
auto relabel(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("at least one scenario is required");
  if (controllers.empty()) throw ConfigError("at least one controller is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (frames < 10) throw ConfigError("frames must be at least 10");
  relabel([&] {
    camera.validate();
    params.validate();
    if (marker) marker->validate();
    return 0;
  });
  if (!(depth > 0.0)) throw ConfigError("depth must be positive");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig cfg) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  std::vector<std::string> marker_rows;
  std::optional<marker::MarkerSpec> marker_spec;
  const auto ensure_marker = [&]() -> marker::MarkerSpec& {
    if (!marker_spec) marker_spec = cfg.marker ? *cfg.marker : marker::default_marker();
    return *marker_spec;
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      const bool known = section == "experiment" || section == "camera" ||
                         section == "controller" || section == "marker" ||
                         section.rfind("scenario.", 0) == 0;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto num = [&] { return to_double(value, where); };
    const auto unknown = [&] {
      throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    };

    if (section == "experiment") {
      if (key == "scenarios") {
        cfg.scenarios = relabel([&] {
          return parse_list<sim::Scenario>(value, [](const std::string& s) { return sim::parse_scenario(s); });
        });
      } else if (key == "controllers") {
        cfg.controllers = relabel([&] {
          return parse_list<control::ControllerKind>(
              value, [](const std::string& s) { return control::parse_controller(s); });
        });
      } else if (key == "seeds") {
        cfg.seeds = parse_list<std::uint64_t>(
            value, [&](const std::string& s) { return static_cast<std::uint64_t>(to_int(s, where)); });
      } else if (key == "frames") {
        cfg.frames = to_int(value, where);
      } else if (key == "noise") {
        cfg.noise = to_bool(value, where);
      } else if (key == "dump_frames") {
        cfg.dump_frames = to_bool(value, where);
      } else if (key == "trajectory") {
        cfg.trajectory = relabel([&] { return sim::parse_trajectory(value); });
      } else if (key == "speed") {
        cfg.speed = num();
      } else if (key == "start_offset_x") {
        cfg.start_offset_x = num();
      } else if (key == "amplitude") {
        cfg.amplitude = num();
      } else if (key == "depth") {
        cfg.depth = num();
      } else if (key == "warmup_cap") {
        cfg.warmup_cap = to_int(value, where);
      } else if (key == "threads") {
        cfg.threads = static_cast<unsigned>(to_int(value, where));
      } else if (key == "out_dir") {
        cfg.out_dir = value;
      } else {
        unknown();
      }
    } else if (section == "camera") {
      auto& c = cfg.camera;
      if (key == "width") {
        c.width = static_cast<int>(to_int(value, where));
      } else if (key == "height") {
        c.height = static_cast<int>(to_int(value, where));
      } else if (key == "crf") {
        if (value == "linear") {
          c.crf.kind = sim::CrfKind::linear;
        } else if (value == "gamma") {
          c.crf.kind = sim::CrfKind::gamma;
        } else {
          throw ConfigError(where + ": crf must be linear or gamma");
        }
      } else if (key == "crf_gamma") {
        c.crf.gamma = num();
      } else if (key == "dt_min") {
        c.dt_min = num();
      } else if (key == "dt_max") {
        c.dt_max = num();
      } else if (key == "read_noise_sigma") {
        c.read_noise_sigma = num();
      } else if (key == "shot_noise_scale") {
        c.shot_noise_scale = num();
      } else if (key == "fps") {
        c.fps = num();
      } else {
        unknown();
      }
    } else if (section == "controller") {
      auto& p = cfg.params;
      if (key == "gamma") {
        p.gamma_m = num();
      } else if (key == "eta") {
        p.eta = num();
      } else if (key == "threshold") {
        p.threshold = num();
      } else if (key == "hold_frames") {
        p.hold_frames = static_cast<int>(to_int(value, where));
      } else if (key == "scan_after") {
        p.scan_after = static_cast<int>(to_int(value, where));
      } else if (key == "scan_factor") {
        p.scan_factor = num();
      } else if (key == "saturation_escape") {
        p.saturation_escape = num();
      } else if (key == "step_clip") {
        p.step_clip = num();
      } else if (key == "initial_dt") {
        p.initial_dt = num();
      } else if (key == "gec_kappa") {
        p.gec_kappa = num();
      } else if (key == "default_target_mean") {
        p.default_target_mean = num();
      } else if (key == "default_exponent") {
        p.default_exponent = num();
      } else if (key == "p") {
        p.metric.p = num();
      } else if (key == "k") {
        p.metric.k = num();
      } else {
        unknown();
      }
    } else if (section == "marker") {
      auto& m = ensure_marker();
      if (key == "side") {
        m.side = num();
      } else if (key == "border_cells") {
        m.border_cells = static_cast<int>(to_int(value, where));
      } else if (key == "quiet_cells") {
        m.quiet_cells = static_cast<int>(to_int(value, where));
      } else if (key == "rho_black") {
        m.rho_black = num();
      } else if (key == "rho_white") {
        m.rho_white = num();
      } else if (key == "row") {
        marker_rows.push_back(value);
      } else {
        unknown();
      }
    } else if (section.rfind("scenario.", 0) == 0) {
      const auto label = section.substr(9);
      const auto sc = relabel([&] { return sim::parse_scenario(label); });
      auto& o = cfg.scenario_overrides[sc];
      if (key == "background_level") {
        o.background_level = num();
      } else if (key == "marker_illumination") {
        o.marker_illumination = num();
      } else if (key == "glare_peak") {
        o.glare_peak = num();
      } else if (key == "glare_sigma_scale") {
        o.glare_sigma_scale = num();
      } else if (key == "glare_spill") {
        o.glare_spill = num();
      } else {
        unknown();
      }
    } else {
      throw ConfigError(where + ": key outside of any section");
    }
  }
  if (marker_spec) {
    if (!marker_rows.empty()) {
      marker_spec->grid = relabel([&] { return marker::parse_grid(marker_rows); });
    }
    cfg.marker = marker_spec;
  }
  // The metric inverts the response the camera applies.
  cfg.params.metric.crf = cfg.camera.crf;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

sim::IrradianceScene build_scene(const ExperimentConfig& cfg, sim::Scenario scenario) {
  auto scene = sim::make_scenario(scenario, cfg.camera);
  scene.nominal_pose.translation.z() = cfg.depth;
  if (cfg.marker) scene.marker = *cfg.marker;
  if (const auto it = cfg.scenario_overrides.find(scenario); it != cfg.scenario_overrides.end()) {
    const auto& o = it->second;
    if (o.background_level) scene.background_level = *o.background_level;
    if (o.marker_illumination) scene.marker_illumination = *o.marker_illumination;
    if (o.glare_peak) scene.glare_peak = *o.glare_peak;
    if (o.glare_sigma_scale) scene.glare_sigma_scale = *o.glare_sigma_scale;
    if (o.glare_spill) scene.glare_spill = *o.glare_spill;
  }
  return scene;
}

sim::Trajectory build_trajectory(const ExperimentConfig& cfg, const sim::IrradianceScene& scene,
                                 std::uint64_t seed) {
  Pose start = scene.nominal_pose;
  if (cfg.trajectory == sim::TrajectoryKind::lateral) start.translation.x() += cfg.start_offset_x;
  const double duration = std::max<double>(static_cast<double>(cfg.frames - 1), 1.0) / cfg.camera.fps;
  return sim::make_trajectory(cfg.trajectory, start, duration, seed, cfg.speed, cfg.amplitude);
}

eval::RunRecord run_single(const ExperimentConfig& cfg, sim::Scenario scenario,
                           control::ControllerKind controller, std::uint64_t seed,
                           const std::optional<std::filesystem::path>& dump_dir) {
  cfg.validate();
  const auto& cam = cfg.camera;
  auto params = cfg.params;
  params.metric.crf = cam.crf;

  sim::SceneRenderer renderer(build_scene(cfg, scenario));
  const auto& scene = renderer.scene();
  const auto traj = build_trajectory(cfg, scene, seed);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(scenario), 0xAAECu};
  std::mt19937_64 rng(seq);
  auto state = control::initial_state(cam, params);

  eval::RunRecord rec;
  rec.scenario = std::string(sim::to_string(scenario));
  rec.controller = std::string(control::to_string(controller));
  rec.trajectory = cfg.trajectory;
  rec.seed = seed;
  rec.fps = cam.fps;
  rec.frames.reserve(static_cast<std::size_t>(cfg.frames));
  if (dump_dir) std::filesystem::create_directories(*dump_dir);

  bool last_found = false;
  marker::DetectionResult last;
  for (long long k = 0; k < cfg.frames; ++k) {
    const double t = std::min(static_cast<double>(k) / cam.fps, traj.duration);
    const Pose pose = sim::pose_at(traj, t);
    const auto& irradiance = renderer.irradiance(pose);
    const auto frame = sim::capture(irradiance, cam, state.dt, cfg.noise ? &rng : nullptr);
    if (dump_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05lld.pgm", k);
      img::write_pgm(*dump_dir / name, frame.image);
    }
    // Search around the last detection first; the full frame is the fallback.
    marker::DetectionResult det;
    if (last_found) {
      const auto window = img::inflate_and_clip(marker::roi_from_detection(last, cam.frame_rect()),
                                                0.5, 0.5, cam.frame_rect());
      det = marker::detect(frame.image, window, scene.marker, scene.intrinsics);
    }
    if (!det.found) det = marker::detect(frame.image, cam.frame_rect(), scene.marker, scene.intrinsics);
    last_found = det.found;
    if (det.found) last = det;
    eval::FrameRecord fr;
    fr.log = control::step(controller, state, frame, det, cam, params);
    if (det.found) fr.detected = det.translation;
    fr.truth = pose.translation;
    rec.frames.push_back(std::move(fr));
  }
  return rec;
}

std::vector<eval::RunRecord> run_all(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Job {
    sim::Scenario scenario;
    control::ControllerKind controller;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto s : cfg.scenarios) {
    for (auto c : cfg.controllers) {
      for (auto seed : cfg.seeds) jobs.push_back({s, c, seed});
    }
  }
  std::vector<eval::RunRecord> out(jobs.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(cfg.threads ? cfg.threads : hw,
                                              static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& j = jobs[i];
      std::optional<std::filesystem::path> dump;
      if (cfg.dump_frames) {
        dump = cfg.out_dir / ("frames_" + std::string(sim::to_string(j.scenario)) + "_" +
                              std::string(control::to_string(j.controller)) + "_s" +
                              std::to_string(j.seed));
      }
      out[i] = run_single(cfg, j.scenario, j.controller, j.seed, dump);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::future<void>> pool;
    for (unsigned w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();
  }
  return out;
}

std::vector<eval::Summary> aggregate(const std::vector<eval::Summary>& rows) {
  std::vector<eval::Summary> out;
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.scenario, r.controller);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& key : keys) {
    eval::Summary agg;
    agg.scenario = key.first;
    agg.controller = key.second;
    int n = 0;
    int converged = 0;
    double conv_frames = 0.0;
    double conv_seconds = 0.0;
    for (const auto& r : rows) {
      if (r.scenario != key.first || r.controller != key.second) continue;
      ++n;
      agg.cov_det += r.cov_det;
      agg.detection_rate += r.detection_rate;
      agg.traj_dist += r.traj_dist;
      agg.max_pairwise_dist += r.max_pairwise_dist;
      if (r.convergence.frames) {
        ++converged;
        conv_frames += static_cast<double>(*r.convergence.frames);
        conv_seconds += r.convergence.seconds;
      }
    }
    agg.seed = "mean" + std::to_string(n);
    agg.cov_det /= n;
    agg.detection_rate /= n;
    agg.traj_dist /= n;
    agg.max_pairwise_dist /= n;
    if (converged == n) {
      agg.convergence.frames = std::llround(conv_frames / n);
      agg.convergence.seconds = conv_seconds / n;
    }
    out.push_back(agg);
  }
  return out;
}

std::string run_file_name(const eval::RunRecord& rec) {
  return "run_" + rec.scenario + "_" + rec.controller + "_s" + std::to_string(rec.seed) + ".csv";
}

std::string steplog_csv(const eval::RunRecord& rec) {
  std::ostringstream out;
  out << kStepLogTag << " scenario=" << rec.scenario << " controller=" << rec.controller
      << " trajectory=" << sim::to_string(rec.trajectory) << " seed=" << rec.seed
      << " fps=" << fmt(rec.fps) << '\n';
  out << "frame,t_s,dt_ms,m,dhat,v,saturated_frac,found,mode,roi_x,roi_y,roi_w,roi_h,"
         "det_x,det_y,det_z,true_x,true_y,true_z\n";
  for (const auto& f : rec.frames) {
    const auto& l = f.log;
    out << l.frame << ',' << fmt(l.t) << ',' << fmt(l.dt) << ',' << fmt(l.m) << ','
        << fmt(l.dhat) << ',' << fmt(l.v) << ',' << fmt(l.saturated_frac) << ','
        << (l.found ? 1 : 0) << ',' << (l.mode == control::Mode::tracking ? "tracking" : "reacquire")
        << ',' << l.roi.x0 << ',' << l.roi.y0 << ',' << l.roi.w << ',' << l.roi.h << ',';
    if (f.detected) {
      out << fmt(f.detected->x()) << ',' << fmt(f.detected->y()) << ',' << fmt(f.detected->z());
    } else {
      out << ",,";
    }
    out << ',' << fmt(f.truth.x()) << ',' << fmt(f.truth.y()) << ',' << fmt(f.truth.z()) << '\n';
  }
  return out.str();
}

eval::RunRecord parse_steplog_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kStepLogTag, 0) != 0) {
    throw ConfigError("not an aaec step log (missing version tag)");
  }
  eval::RunRecord rec;
  std::istringstream meta(line.substr(std::string(kStepLogTag).size()));
  std::string kv;
  while (meta >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto k = kv.substr(0, eq);
    const auto v = kv.substr(eq + 1);
    if (k == "scenario") rec.scenario = v;
    if (k == "controller") rec.controller = v;
    if (k == "trajectory") rec.trajectory = relabel([&] { return sim::parse_trajectory(v); });
    if (k == "seed") rec.seed = static_cast<std::uint64_t>(to_int(v, "step log header"));
    if (k == "fps") rec.fps = to_double(v, "step log header");
  }
  if (!std::getline(in, line)) throw ConfigError("step log has no header row");
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "step log line " + std::to_string(lineno);
    const auto c = split(line, ',');
    if (c.size() != 19) throw ConfigError(where + ": expected 19 columns");
    eval::FrameRecord f;
    auto& l = f.log;
    l.frame = to_int(c[0], where);
    l.t = to_double(c[1], where);
    l.dt = to_double(c[2], where);
    l.m = to_double(c[3], where);
    l.dhat = to_double(c[4], where);
    l.v = to_double(c[5], where);
    l.saturated_frac = to_double(c[6], where);
    l.found = to_int(c[7], where) != 0;
    l.mode = c[8] == "tracking" ? control::Mode::tracking : control::Mode::reacquire;
    l.roi = img::Rect{static_cast<int>(to_int(c[9], where)), static_cast<int>(to_int(c[10], where)),
                      static_cast<int>(to_int(c[11], where)), static_cast<int>(to_int(c[12], where))};
    if (!c[13].empty()) {
      f.detected = Eigen::Vector3d(to_double(c[13], where), to_double(c[14], where),
                                   to_double(c[15], where));
    }
    f.truth = Eigen::Vector3d(to_double(c[16], where), to_double(c[17], where),
                              to_double(c[18], where));
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

std::string summary_csv(const std::vector<eval::Summary>& rows) {
  std::ostringstream out;
  out << kSummaryTag << '\n';
  out << "scenario,controller,seed,cov_det,detection_rate,traj_dist_m,max_pairwise_dist_m,"
         "conv_frames,conv_seconds\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.controller << ',' << r.seed << ',' << fmt(r.cov_det) << ','
        << fmt(r.detection_rate) << ',' << fmt(r.traj_dist) << ',' << fmt(r.max_pairwise_dist)
        << ',';
    if (r.convergence.frames) {
      out << *r.convergence.frames << ',' << fmt(r.convergence.seconds);
    } else {
      out << "none,none";
    }
    out << '\n';
  }
  return out.str();
}

std::string summary_table(const std::vector<eval::Summary>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"scenario", "controller", "seed", "cov_det", "det_rate", "traj_dist_m",
                   "max_dist_m", "conv_frames", "conv_s"});
  for (const auto& r : rows) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4f", r.detection_rate);
    cells.push_back({r.scenario, r.controller, r.seed, fmt(r.cov_det), rate, fmt(r.traj_dist),
                     fmt(r.max_pairwise_dist),
                     r.convergence.frames ? std::to_string(*r.convergence.frames) : "none",
                     r.convergence.frames ? fmt(r.convergence.seconds) : "none"});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i] << std::string(width[i] - row[i].size() + (i + 1 < row.size() ? 2 : 0), ' ');
    }
    out << '\n';
  }
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw OutputError("cannot create directory " + path.parent_path().string());
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw OutputError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw OutputError("cannot rename " + tmp + " to " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Region parse_region(std::string_view label) {
  if (label == "full") return Region::full;
  if (label == "roi") return Region::roi;
  throw ConfigError("unknown region '" + std::string(label) + "' (valid: full, roi)");
}

img::Rect ground_truth_roi(const sim::IrradianceScene& scene, const Pose& pose) {
  marker::DetectionResult det;
  det.found = true;
  det.corners = marker::project_corners(scene.marker, pose, scene.intrinsics);
  return marker::roi_from_detection(det, img::Rect{0, 0, scene.width, scene.height});
}

double marker_saturated_fraction(const img::Image8& frame, const sim::IrradianceScene& scene,
                                 const Pose& pose) {
  const auto q = marker::project_corners(scene.marker, pose, scene.intrinsics);
  // Corners are clockwise in image coordinates: inside means all edge cross
  // products are non-negative.
  const auto inside = [&](double x, double y) {
    for (int i = 0; i < 4; ++i) {
      const auto& a = q[i];
      const auto& b = q[(i + 1) % 4];
      if ((b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x()) < 0.0) return false;
    }
    return true;
  };
  long long n = 0;
  long long sat = 0;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      if (!inside(x, y)) continue;
      ++n;
      sat += frame(x, y) == 255 ? 1 : 0;
    }
  }
  return n ? static_cast<double>(sat) / static_cast<double>(n) : 0.0;
}

SweepResult sweep(const sim::IrradianceScene& scene, const sim::CameraModel& cam,
                  const metric::MetricParams& params, Region region, int n_points) {
  if (n_points < 8) throw ConfigError("sweep needs at least 8 exposure points");
  const Pose pose = scene.nominal_pose;
  const auto irradiance = sim::render_irradiance(scene, pose);
  SweepResult res;
  res.region = region == Region::roi ? ground_truth_roi(scene, pose) : cam.frame_rect();
  const double lmin = std::log(cam.dt_min);
  const double lmax = std::log(cam.dt_max);
  for (int i = 0; i < n_points; ++i) {
    const double dt = std::exp(lmin + (lmax - lmin) * i / (n_points - 1));
    const auto frame = sim::capture(irradiance, cam, std::clamp(dt, cam.dt_min, cam.dt_max), nullptr);
    SweepRow row;
    row.dt = frame.dt;
    row.m = metric::m_softperc(frame.image, res.region, params);
    row.found = marker::detect(frame.image, cam.frame_rect(), scene.marker, scene.intrinsics).found;
    const double sum = std::accumulate(frame.image.data.begin(), frame.image.data.end(), 0.0);
    row.mean_intensity = sum / static_cast<double>(frame.image.data.size());
    row.marker_saturated_frac = marker_saturated_fraction(frame.image, scene, pose);
    res.rows.push_back(row);
  }
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    if (res.rows[i].m > res.rows[res.argmax].m) res.argmax = i;
  }
  return res;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kSweepTag << " region=" << result.region.x0 << ':' << result.region.y0 << ':'
      << result.region.w << ':' << result.region.h << '\n';
  out << "dt_ms,m_softperc,found,mean_intensity,marker_saturated_frac,argmax\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    out << fmt(r.dt) << ',' << fmt(r.m) << ',' << (r.found ? 1 : 0) << ',' << fmt(r.mean_intensity)
        << ',' << fmt(r.marker_saturated_frac) << ',' << (i == result.argmax ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace aaec::exp
