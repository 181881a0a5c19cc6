#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aaec/camera_sim.hpp"
#include "aaec/controller.hpp"

namespace aaec::eval {

struct FrameRecord {
  control::StepLog log;
  std::optional<Eigen::Vector3d> detected;  // camera-frame marker position when found
  Eigen::Vector3d truth = Eigen::Vector3d::Zero();
};

struct RunRecord {
  std::string scenario;
  std::string controller;
  sim::TrajectoryKind trajectory = sim::TrajectoryKind::static_pose;
  std::uint64_t seed = 0;
  double fps = 20.0;
  std::vector<FrameRecord> frames;
};

struct Convergence {
  std::optional<long long> frames;  // empty: no convergence
  double seconds = 0.0;
};

struct Summary {
  std::string scenario;
  std::string controller;
  std::string seed;
  double cov_det = 0.0;  // +inf when fewer than 4 detections remain
  double detection_rate = 0.0;
  double traj_dist = 0.0;          // m, NaN when nothing was detected
  double max_pairwise_dist = 0.0;  // m, NaN when nothing was detected
  Convergence convergence;
};

/// Determinant of the sample covariance (divisor n-1). Needs >= 4 points.
double covariance_determinant(std::span<const Eigen::Vector3d> points);

/// Convergence: first k with |dt_j - dt_end| / dt_end < 2% for all j in
/// [k, k+5], dt_end being the median exposure of the last 10 frames.
Convergence convergence_time(const RunRecord& rec);
Convergence convergence_time(std::span<const double> dts, double fps);

/// Frames excluded before precision statistics: the convergence frame or
/// `cap`, whichever comes first.
long long warmup_frames(const RunRecord& rec, long long cap = 50);

/// Found frames over counted frames after the warm-up window.
double detection_rate(const RunRecord& rec, long long warmup);

/// Mean distance from post-warm-up detections to the ground-truth path: a
/// point for static runs, the straight line for lateral ones. Throws
/// std::invalid_argument for jitter runs.
double trajectory_distance(const RunRecord& rec, long long warmup);

double max_pairwise_distance(std::span<const Eigen::Vector3d> points);

/// Post-warm-up detected positions.
std::vector<Eigen::Vector3d> detections(const RunRecord& rec, long long warmup);

Summary summarize(const RunRecord& rec, long long warmup_cap = 50);

}  // namespace aaec::eval
