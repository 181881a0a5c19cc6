#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "aaec/geometry.hpp"
#include "aaec/imgproc.hpp"

namespace aaec::marker {

using Corners = std::array<Eigen::Vector2d, 4>;

/// Square fiducial: an n x n grid of black/white cells with a solid black
/// border. Cell (row, col) spans x in [-side/2 + col*c, -side/2 + (col+1)*c]
/// and likewise for y, with c = side / n.
struct MarkerSpec {
  double side = 0.1;  // m
  int border_cells = 1;
  // White margin printed around the pattern, in cells. Not part of `side`.
  int quiet_cells = 1;
  // Row-major, true = white.
  std::vector<std::vector<bool>> grid;
  double rho_black = 0.08;
  double rho_white = 0.90;

  [[nodiscard]] int cells() const { return static_cast<int>(grid.size()); }
  [[nodiscard]] double cell_size() const { return side / cells(); }
  [[nodiscard]] double reflectance(int row, int col) const {
    return grid[row][col] ? rho_white : rho_black;
  }
  /// Marker-plane corners, clockwise in the image for the identity pose:
  /// top-left, top-right, bottom-right, bottom-left.
  [[nodiscard]] std::array<Eigen::Vector2d, 4> plane_corners() const;

  /// Throws std::invalid_argument unless the grid is square, has a solid
  /// black border and differs from each of its three rotations.
  void validate() const;
};

/// 5x5 default pattern with one asymmetric interior cell.
MarkerSpec default_marker();

/// Parses rows of '0'/'1' characters ('1' = white).
std::vector<std::vector<bool>> parse_grid(const std::vector<std::string>& rows);
std::vector<std::string> format_grid(const std::vector<std::vector<bool>>& grid);

struct DetectionResult {
  bool found = false;
  Corners corners{};
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // m, camera frame
  double reproj_error = 0.0;                               // RMS px
};

/// Image positions of the marker corners for a pose (same order as plane_corners).
Corners project_corners(const MarkerSpec& spec, const Pose& pose, const Intrinsics& k);

/// Paints the marker into `field`. Covered pixels become
/// illumination * reflectance, weighted by exact cell/pixel overlap area at
/// cell boundaries; uncovered pixels keep their value.
void render_marker(img::ImageF& field, const img::ImageF& illumination,
                   const MarkerSpec& spec, const Pose& pose, const Intrinsics& k);

/// Finds the marker inside `search`. Failure is reported through found=false.
DetectionResult detect(const img::Image8& frame, const img::Rect& search,
                       const MarkerSpec& spec, const Intrinsics& k);

struct DegenerateCorners : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PoseEstimate {
  Pose pose;
  double reproj_error = 0.0;
};

/// Four-point DLT homography pose. Throws DegenerateCorners for collinear input.
PoseEstimate estimate_pose(const Corners& corners, const MarkerSpec& spec,
                           const Intrinsics& k);

/// Corner bounding box padded by 10% of its width and height per side,
/// clipped to `frame`. Throws std::logic_error when det.found is false.
img::Rect roi_from_detection(const DetectionResult& det, const img::Rect& frame);

}  // namespace aaec::marker
