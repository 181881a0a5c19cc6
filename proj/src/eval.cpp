#include "aaec/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aaec::eval {

double covariance_determinant(std::span<const Eigen::Vector3d> points) {
  if (points.size() < 4) {
    throw std::invalid_argument("covariance determinant needs at least 4 points");
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size() - 1);
  return std::max(0.0, cov.determinant());
}

Convergence convergence_time(std::span<const double> dts, double fps) {
  Convergence c;
  const std::size_t n = dts.size();
  if (n < 10) return c;
  std::vector<double> tail(dts.end() - 10, dts.end());
  std::nth_element(tail.begin(), tail.begin() + 5, tail.end());
  double end = tail[5];
  // Even count: average the two middle values.
  const double upper = end;
  std::nth_element(tail.begin(), tail.begin() + 4, tail.end());
  end = 0.5 * (upper + tail[4]);

  const auto inside = [&](std::size_t j) { return std::abs(dts[j] - end) / end < 0.02; };
  for (std::size_t k = 0; k + 5 < n; ++k) {
    bool ok = true;
    for (std::size_t j = k; j <= k + 5; ++j) {
      if (!inside(j)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      c.frames = static_cast<long long>(k);
      c.seconds = static_cast<double>(k) / fps;
      return c;
    }
  }
  return c;
}

Convergence convergence_time(const RunRecord& rec) {
  std::vector<double> dts;
  dts.reserve(rec.frames.size());
  for (const auto& f : rec.frames) dts.push_back(f.log.dt);
  return convergence_time(dts, rec.fps);
}

long long warmup_frames(const RunRecord& rec, long long cap) {
  const auto c = convergence_time(rec);
  const long long w = c.frames ? std::min(*c.frames, cap) : cap;
  return std::min<long long>(w, static_cast<long long>(rec.frames.size()) - 1);
}

double detection_rate(const RunRecord& rec, long long warmup) {
  const auto n = static_cast<long long>(rec.frames.size());
  const long long start = std::clamp<long long>(warmup, 0, n);
  if (n - start <= 0) return 0.0;
  long long found = 0;
  for (long long i = start; i < n; ++i) found += rec.frames[i].log.found ? 1 : 0;
  return static_cast<double>(found) / static_cast<double>(n - start);
}

std::vector<Eigen::Vector3d> detections(const RunRecord& rec, long long warmup) {
  std::vector<Eigen::Vector3d> pts;
  for (std::size_t i = static_cast<std::size_t>(std::max<long long>(warmup, 0)); i < rec.frames.size(); ++i) {
    if (rec.frames[i].detected) pts.push_back(*rec.frames[i].detected);
  }
  return pts;
}

double trajectory_distance(const RunRecord& rec, long long warmup) {
  if (rec.trajectory == sim::TrajectoryKind::jitter) {
    throw std::invalid_argument("trajectory distance supports static and lateral runs only");
  }
  if (rec.frames.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::Vector3d origin = rec.frames.front().truth;
  const Eigen::Vector3d span = rec.frames.back().truth - origin;
  const bool line = rec.trajectory == sim::TrajectoryKind::lateral && span.norm() > 1e-12;
  const Eigen::Vector3d dir = line ? span.normalized() : Eigen::Vector3d::Zero();

  double total = 0.0;
  long long n = 0;
  for (const auto& p : detections(rec, warmup)) {
    const Eigen::Vector3d d = p - origin;
    total += line ? (d - d.dot(dir) * dir).norm() : d.norm();
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double max_pairwise_distance(std::span<const Eigen::Vector3d> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

Summary summarize(const RunRecord& rec, long long warmup_cap) {
  Summary s;
  s.scenario = rec.scenario;
  s.controller = rec.controller;
  s.seed = std::to_string(rec.seed);
  s.convergence = convergence_time(rec);
  const long long warmup = warmup_frames(rec, warmup_cap);
  const auto pts = detections(rec, warmup);
  s.cov_det = pts.size() >= 4 ? covariance_determinant(pts)
                              : std::numeric_limits<double>::infinity();
  s.detection_rate = detection_rate(rec, warmup);
  s.max_pairwise_dist = pts.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : max_pairwise_distance(pts);
  s.traj_dist = rec.trajectory == sim::TrajectoryKind::jitter
                    ? std::numeric_limits<double>::quiet_NaN()
                    : trajectory_distance(rec, warmup);
  return s;
}

}  // namespace aaec::eval
