#include "aaec/marker.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <optional>

namespace aaec::marker {

namespace {

using Vec2 = Eigen::Vector2d;

// Homography mapping src[i] to dst[i] (four correspondences, Hartley-normalised DLT).
Eigen::Matrix3d homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
  const auto normaliser = [](const std::array<Vec2, 4>& pts) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= 4.0;
    double spread = 0.0;
    for (const auto& p : pts) spread += (p - mean).norm();
    spread /= 4.0;
    const double s = spread > 0.0 ? std::sqrt(2.0) / spread : 1.0;
    Eigen::Matrix3d t;
    t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return t;
  };
  const Eigen::Matrix3d ts = normaliser(src);
  const Eigen::Matrix3d td = normaliser(dst);

  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = ts * src[i].homogeneous();
    const Eigen::Vector3d q = td * dst[i].homogeneous();
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d hm = td.inverse() * hn * ts;
  return hm / hm(2, 2);
}

Vec2 apply(const Eigen::Matrix3d& h, const Vec2& p) {
  return (h * p.homogeneous()).hnormalized();
}

double signed_area(const std::array<Vec2, 4>& q) {
  double a = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& p = q[i];
    const auto& n = q[(i + 1) % 4];
    a += p.x() * n.y() - n.x() * p.y();
  }
  return 0.5 * a;
}

bool is_convex(const std::array<Vec2, 4>& q) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2 e1 = q[(i + 1) % 4] - q[i];
    const Vec2 e2 = q[(i + 2) % 4] - q[(i + 1) % 4];
    const double cr = e1.x() * e2.y() - e1.y() * e2.x();
    if (cr == 0.0) return false;
    const int s = cr > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

// Area of a convex polygon clipped to the axis-aligned square [x0,x1]x[y0,y1].
double clipped_area(const std::array<Vec2, 4>& quad, double x0, double y0, double x1, double y1) {
  std::vector<Vec2> poly(quad.begin(), quad.end());
  std::vector<Vec2> next;
  const auto clip = [&](auto inside, auto cross) {
    next.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % poly.size()];
      const bool ia = inside(a);
      const bool ib = inside(b);
      if (ia) next.push_back(a);
      if (ia != ib) next.push_back(cross(a, b));
    }
    poly.swap(next);
  };
  const auto at_x = [](double x) {
    return [x](const Vec2& a, const Vec2& b) {
      const double t = (x - a.x()) / (b.x() - a.x());
      return Vec2(x, a.y() + t * (b.y() - a.y()));
    };
  };
  const auto at_y = [](double y) {
    return [y](const Vec2& a, const Vec2& b) {
      const double t = (y - a.y()) / (b.y() - a.y());
      return Vec2(a.x() + t * (b.x() - a.x()), y);
    };
  };
  clip([&](const Vec2& p) { return p.x() >= x0; }, at_x(x0));
  if (poly.empty()) return 0.0;
  clip([&](const Vec2& p) { return p.x() <= x1; }, at_x(x1));
  if (poly.empty()) return 0.0;
  clip([&](const Vec2& p) { return p.y() >= y0; }, at_y(y0));
  if (poly.empty()) return 0.0;
  clip([&](const Vec2& p) { return p.y() <= y1; }, at_y(y1));
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& n = poly[(i + 1) % poly.size()];
    a += p.x() * n.y() - n.x() * p.y();
  }
  return std::abs(0.5 * a);
}

double bilinear(const img::Image8& im, double x, double y) {
  const int ix = static_cast<int>(std::floor(x));
  const int iy = static_cast<int>(std::floor(y));
  if (ix < 0 || iy < 0 || ix + 1 >= im.width || iy + 1 >= im.height) {
    return -1.0;
  }
  const double ax = x - ix;
  const double ay = y - iy;
  return (1 - ay) * ((1 - ax) * im(ix, iy) + ax * im(ix + 1, iy)) +
         ay * ((1 - ax) * im(ix, iy + 1) + ax * im(ix + 1, iy + 1));
}

using Histogram = std::array<long long, 256>;

Histogram histogram(const img::Image8& im, const img::Rect& r) {
  Histogram hist{};
  for (int y = r.y0; y < r.y1(); ++y) {
    for (int x = r.x0; x < r.x1(); ++x) ++hist[im(x, y)];
  }
  return hist;
}

// Otsu split of the histogram restricted to [lo, hi]; -1 when that range
// holds fewer than two distinct levels.
int otsu_threshold(const Histogram& hist, int lo, int hi) {
  double total = 0.0;
  double sum_all = 0.0;
  for (int i = lo; i <= hi; ++i) {
    total += static_cast<double>(hist[i]);
    sum_all += i * static_cast<double>(hist[i]);
  }
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_t = -1;
  for (int t = lo; t < hi; ++t) {
    w0 += static_cast<double>(hist[t]);
    sum0 += t * static_cast<double>(hist[t]);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

struct Component {
  std::span<const int> pixels;  // indices into the search-local grid
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool touches_border = false;
};

// Dark-pixel mask over the search rect (row-major, 1 = dark).
using Mask = std::vector<std::uint8_t>;

Mask global_mask(const img::Image8& im, const img::Rect& r, int threshold) {
  Mask m(static_cast<std::size_t>(r.area()));
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) m[static_cast<std::size_t>(y) * r.w + x] = im(r.x0 + x, r.y0 + y) <= threshold;
  }
  return m;
}

// Dark where a pixel sits clearly below the mean of its (2*radius+1)^2 box.
Mask adaptive_mask(const img::Image8& im, const img::Rect& r, int radius) {
  const int w = r.w;
  const int h = r.h;
  std::vector<long long> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    long long row = 0;
    for (int x = 0; x < w; ++x) {
      row += im(r.x0 + x, r.y0 + y);
      integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
  Mask m(static_cast<std::size_t>(r.area()));
  for (int y = 0; y < h; ++y) {
    const int ya = std::max(0, y - radius);
    const int yb = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - radius);
      const int xb = std::min(w, x + radius + 1);
      const auto at = [&](int yy, int xx) { return integral[static_cast<std::size_t>(yy) * (w + 1) + xx]; };
      const double sum = static_cast<double>(at(yb, xb) - at(ya, xb) - at(yb, xa) + at(ya, xa));
      const double mean = sum / static_cast<double>((xb - xa) * (yb - ya));
      const double v = im(r.x0 + x, r.y0 + y);
      m[static_cast<std::size_t>(y) * w + x] = v < mean - (6.0 + 0.1 * mean);
    }
  }
  return m;
}

struct Labelling {
  std::vector<int> pool;  // pixel indices, one contiguous run per component
  std::vector<Component> comps;
};

Labelling dark_components(const img::Rect& r, Mask visited) {
  const int w = r.w;
  const int h = r.h;
  Labelling out;
  // Reserved up front so the spans handed out below stay valid.
  out.pool.reserve(visited.size());
  std::vector<int> stack;
  for (int idx0 = 0; idx0 < w * h; ++idx0) {
    if (!visited[idx0]) continue;
    Component c;
    c.min_x = c.max_x = idx0 % w;
    c.min_y = c.max_y = idx0 / w;
    const std::size_t begin = out.pool.size();
    visited[idx0] = 0;
    stack.assign(1, idx0);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      out.pool.push_back(cur);
      const int cx = cur % w;
      const int cy = cur / w;
      c.min_x = std::min(c.min_x, cx);
      c.max_x = std::max(c.max_x, cx);
      c.min_y = std::min(c.min_y, cy);
      c.max_y = std::max(c.max_y, cy);
      if (cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1) c.touches_border = true;
      const auto push = [&](int ni) {
        if (visited[ni]) {
          visited[ni] = 0;
          stack.push_back(ni);
        }
      };
      if (cx > 0) push(cur - 1);
      if (cx + 1 < w) push(cur + 1);
      if (cy > 0) push(cur - w);
      if (cy + 1 < h) push(cur + w);
    }
    c.pixels = std::span<const int>(out.pool.data() + begin, out.pool.size() - begin);
    out.comps.push_back(c);
  }
  return out;
}

struct Candidate {
  std::array<Vec2, 4> coarse;  // image coordinates, clockwise
  Vec2 centroid;
  double dark_mean = 0.0;
  double bright_mean = 0.0;
};

// Fills holes in the component and checks that the filled shape is a quad.
std::optional<Candidate> quad_candidate(const img::Image8& im, const img::Rect& r,
                                        const Component& c) {
  const int bw = c.max_x - c.min_x + 3;
  const int bh = c.max_y - c.min_y + 3;
  // 0 = unknown, 1 = component, 2 = outside (reached from the margin).
  std::vector<std::uint8_t> cell(static_cast<std::size_t>(bw) * bh, 0);
  for (int p : c.pixels) {
    const int x = p % r.w - c.min_x + 1;
    const int y = p / r.w - c.min_y + 1;
    cell[static_cast<std::size_t>(y) * bw + x] = 1;
  }
  std::vector<int> stack{0};
  cell[0] = 2;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const int x = cur % bw;
    const int y = cur / bw;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= bw || ny[k] >= bh) continue;
      const int ni = ny[k] * bw + nx[k];
      if (cell[ni] == 0) {
        cell[ni] = 2;
        stack.push_back(ni);
      }
    }
  }

  std::vector<Vec2> boundary;
  double filled = 0.0;
  Vec2 centroid = Vec2::Zero();
  double dark_sum = 0.0, bright_sum = 0.0;
  long long dark_n = 0, bright_n = 0;
  for (int y = 1; y < bh - 1; ++y) {
    for (int x = 1; x < bw - 1; ++x) {
      const auto v = cell[static_cast<std::size_t>(y) * bw + x];
      if (v == 2) continue;
      const int gx = r.x0 + c.min_x + x - 1;
      const int gy = r.y0 + c.min_y + y - 1;
      filled += 1.0;
      centroid += Vec2(gx, gy);
      if (v == 1) {
        dark_sum += im(gx, gy);
        ++dark_n;
      } else {
        bright_sum += im(gx, gy);
        ++bright_n;
      }
      const bool edge = cell[static_cast<std::size_t>(y) * bw + x - 1] == 2 ||
                        cell[static_cast<std::size_t>(y) * bw + x + 1] == 2 ||
                        cell[static_cast<std::size_t>(y - 1) * bw + x] == 2 ||
                        cell[static_cast<std::size_t>(y + 1) * bw + x] == 2;
      if (edge) boundary.emplace_back(gx, gy);
    }
  }
  if (bright_n == 0 || boundary.size() < 8) return std::nullopt;
  centroid /= filled;

  const auto farthest = [&](auto score) {
    std::size_t best = 0;
    double best_s = -1e300;
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      const double s = score(boundary[i]);
      if (s > best_s) {
        best_s = s;
        best = i;
      }
    }
    return boundary[best];
  };
  const Vec2 p0 = farthest([&](const Vec2& p) { return (p - centroid).squaredNorm(); });
  const Vec2 p1 = farthest([&](const Vec2& p) { return (p - p0).squaredNorm(); });
  const Vec2 d = (p1 - p0).normalized();
  const auto side = [&](const Vec2& p) { return d.x() * (p.y() - p0.y()) - d.y() * (p.x() - p0.x()); };
  const Vec2 p2 = farthest(side);
  const Vec2 p3 = farthest([&](const Vec2& p) { return -side(p); });

  std::array<Vec2, 4> q{p0, p1, p2, p3};
  std::sort(q.begin(), q.end(), [&](const Vec2& a, const Vec2& b) {
    return std::atan2(a.y() - centroid.y(), a.x() - centroid.x()) <
           std::atan2(b.y() - centroid.y(), b.x() - centroid.x());
  });
  const double area = signed_area(q);
  if (!is_convex(q) || std::abs(area) < 64.0) return std::nullopt;
  const double ratio = filled / std::abs(area);
  if (ratio < 0.8 || ratio > 1.3) return std::nullopt;

  Candidate cand;
  cand.coarse = q;
  if (area < 0) std::reverse(cand.coarse.begin(), cand.coarse.end());
  cand.centroid = centroid;
  cand.dark_mean = dark_sum / static_cast<double>(dark_n);
  cand.bright_mean = bright_sum / static_cast<double>(bright_n);
  return cand;
}

struct Line {
  Vec2 point;
  Vec2 normal;  // unit
};

std::optional<Vec2> intersect(const Line& a, const Line& b) {
  // n . x = n . p for both lines
  Eigen::Matrix2d m;
  m << a.normal.x(), a.normal.y(), b.normal.x(), b.normal.y();
  if (std::abs(m.determinant()) < 1e-9) return std::nullopt;
  const Vec2 rhs(a.normal.dot(a.point), b.normal.dot(b.point));
  return m.inverse() * rhs;
}

// Sub-pixel points along one side of the quad. For each row (steep side) or
// column (shallow side) the fraction of dark coverage in a short window
// across the edge is summed, which locates a straight edge exactly for
// area-averaged pixels. Each point carries the edge contrast as its weight.
std::optional<Line> refine_side(const img::Image8& im, const img::Rect& search, const Vec2& a,
                                const Vec2& b, const Vec2& centroid, int half_window) {
  const Vec2 dir = b - a;
  const bool steep = std::abs(dir.y()) > std::abs(dir.x());
  // Axis along which we step (s) and across which we measure (m).
  const double s0 = steep ? a.y() : a.x();
  const double s1 = steep ? b.y() : b.x();
  const double m0 = steep ? a.x() : a.y();
  const double slope = steep ? dir.x() / dir.y() : dir.y() / dir.x();
  const Vec2 mid = 0.5 * (a + b);
  const double out_sign = ((steep ? mid.x() - centroid.x() : mid.y() - centroid.y()) > 0) ? 1.0 : -1.0;

  const double lo = std::min(s0, s1);
  const double hi = std::max(s0, s1);
  const double margin = 0.12 * (hi - lo) + 1.0;
  const auto pixel = [&](int s, int m) -> int {
    const int x = steep ? m : s;
    const int y = steep ? s : m;
    if (!search.contains(x, y)) return -1;
    return im(x, y);
  };

  std::vector<Vec2> pts;
  std::vector<double> wts;
  for (int s = static_cast<int>(std::ceil(lo + margin)); s <= static_cast<int>(std::floor(hi - margin)); ++s) {
    const double m_line = m0 + slope * (s - s0);
    const int c = static_cast<int>(std::lround(m_line));
    const auto at = [&](int off) { return pixel(s, c + static_cast<int>(out_sign) * off); };
    const int in_px = at(-(half_window + 1));
    const int out1 = at(half_window + 1);
    const int out2 = at(half_window + 2);
    if (in_px < 0 || out1 < 0 || out2 < 0) continue;
    const double lin = in_px;
    bool ok = true;
    double dark = 0.0;
    double contrast = 0.0;
    for (int off = -half_window; off <= half_window; ++off) {
      const int v = at(off);
      if (v < 0) {
        ok = false;
        break;
      }
      const double lout = out1 + (out1 - out2) * static_cast<double>(half_window + 1 - off);
      const double span = lout - lin;
      if (off == 0) contrast = span;
      if (span <= 0.0) {
        ok = false;
        break;
      }
      dark += std::clamp((lout - v) / span, 0.0, 1.0);
    }
    if (!ok || contrast < 10.0) continue;
    const double edge_u = -half_window - 0.5 + dark;
    const double m_edge = c + out_sign * edge_u;
    pts.push_back(steep ? Vec2(m_edge, s) : Vec2(s, m_edge));
    wts.push_back(contrast);
  }
  if (pts.size() < 4) return std::nullopt;

  double wsum = 0.0;
  Vec2 mean = Vec2::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mean += wts[i] * pts[i];
    wsum += wts[i];
  }
  mean /= wsum;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 d = pts[i] - mean;
    cov += wts[i] * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return Line{mean, es.eigenvectors().col(0).normalized()};
}

std::optional<std::array<Vec2, 4>> refine_corners(const img::Image8& im, const img::Rect& search,
                                                  const std::array<Vec2, 4>& coarse,
                                                  const Vec2& centroid) {
  std::array<Vec2, 4> corners = coarse;
  for (int half_window : {2, 1}) {
    std::array<Line, 4> lines;
    for (int i = 0; i < 4; ++i) {
      auto line = refine_side(im, search, corners[i], corners[(i + 1) % 4], centroid, half_window);
      if (!line) return std::nullopt;
      lines[i] = *line;
    }
    std::array<Vec2, 4> next;
    for (int i = 0; i < 4; ++i) {
      auto p = intersect(lines[(i + 3) % 4], lines[i]);
      if (!p) return std::nullopt;
      next[i] = *p;
    }
    for (int i = 0; i < 4; ++i) {
      if ((next[i] - corners[i]).norm() > 4.0) return std::nullopt;
    }
    corners = next;
  }
  return corners;
}

// Picks the cyclic shift of `corners` that best reproduces the cell pattern.
std::optional<Corners> orient(const img::Image8& im, const std::array<Vec2, 4>& corners,
                              const MarkerSpec& spec, double threshold) {
  const auto plane = spec.plane_corners();
  const int n = spec.cells();
  const double c = spec.cell_size();
  int best = -1;
  int best_err = 1 << 30;
  int second_err = 1 << 30;
  for (int r = 0; r < 4; ++r) {
    std::array<Vec2, 4> rotated;
    for (int j = 0; j < 4; ++j) rotated[j] = corners[(j + r) % 4];
    const Eigen::Matrix3d h = homography(plane, rotated);
    int err = 0;
    for (int row = spec.border_cells; row < n - spec.border_cells; ++row) {
      for (int col = spec.border_cells; col < n - spec.border_cells; ++col) {
        const Vec2 centre(-spec.side / 2 + (col + 0.5) * c, -spec.side / 2 + (row + 0.5) * c);
        const Vec2 px = apply(h, centre);
        const double v = bilinear(im, px.x(), px.y());
        if (v < 0.0) return std::nullopt;
        const bool white = v > threshold;
        if (white != static_cast<bool>(spec.grid[row][col])) ++err;
      }
    }
    if (err < best_err) {
      second_err = best_err;
      best_err = err;
      best = r;
    } else if (err < second_err) {
      second_err = err;
    }
  }
  if (best < 0 || best_err >= second_err) return std::nullopt;
  Corners out;
  for (int j = 0; j < 4; ++j) out[j] = corners[(j + best) % 4];
  return out;
}

}  // namespace

std::array<Eigen::Vector2d, 4> MarkerSpec::plane_corners() const {
  const double h = side / 2.0;
  return {Vec2(-h, -h), Vec2(h, -h), Vec2(h, h), Vec2(-h, h)};
}

void MarkerSpec::validate() const {
  const int n = cells();
  if (!(side > 0.0)) throw std::invalid_argument("marker side must be positive");
  if (n < 3 || border_cells < 1 || 2 * border_cells >= n) {
    throw std::invalid_argument("marker grid too small for its border");
  }
  for (const auto& row : grid) {
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("marker grid must be square");
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const bool border = r < border_cells || c < border_cells || r >= n - border_cells ||
                          c >= n - border_cells;
      if (border && grid[r][c]) throw std::invalid_argument("marker border must be solid black");
    }
  }
  // rot90 clockwise: new[r][c] = old[n-1-c][r]
  auto g = grid;
  for (int k = 0; k < 3; ++k) {
    auto next = g;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) next[r][c] = g[n - 1 - c][r];
    }
    g = next;
    if (g == grid) throw std::invalid_argument("marker pattern must be rotationally asymmetric");
  }
  if (quiet_cells < 0) throw std::invalid_argument("quiet zone must be non-negative");
  if (!(rho_black >= 0.0 && rho_black < rho_white)) {
    throw std::invalid_argument("marker reflectances need 0 <= black < white");
  }
}

MarkerSpec default_marker() {
  MarkerSpec m;
  m.grid = parse_grid({"00000", "00110", "01010", "01110", "00000"});
  return m;
}

std::vector<std::vector<bool>> parse_grid(const std::vector<std::string>& rows) {
  std::vector<std::vector<bool>> g;
  for (const auto& row : rows) {
    std::vector<bool> r;
    for (char ch : row) {
      if (ch == '0' || ch == '1') {
        r.push_back(ch == '1');
      } else if (ch != ' ') {
        throw std::invalid_argument("marker grid rows may only contain 0 and 1");
      }
    }
    g.push_back(std::move(r));
  }
  return g;
}

std::vector<std::string> format_grid(const std::vector<std::vector<bool>>& grid) {
  std::vector<std::string> rows;
  for (const auto& r : grid) {
    std::string s;
    for (bool b : r) s.push_back(b ? '1' : '0');
    rows.push_back(std::move(s));
  }
  return rows;
}

Corners project_corners(const MarkerSpec& spec, const Pose& pose, const Intrinsics& k) {
  Corners out;
  const auto plane = spec.plane_corners();
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = pose.rotation * Eigen::Vector3d(plane[i].x(), plane[i].y(), 0.0) +
                              pose.translation;
    out[i] = project(k, p);
  }
  return out;
}

void render_marker(img::ImageF& field, const img::ImageF& illumination, const MarkerSpec& spec,
                   const Pose& pose, const Intrinsics& k) {
  // Extended grid: the pattern plus `quiet_cells` of white stock on every side.
  const int q = spec.quiet_cells;
  const int n = spec.cells() + 2 * q;
  const double c = spec.cell_size();
  const double half = spec.side / 2.0 + q * c;
  const auto reflectance = [&](int r, int col) {
    const int pr = r - q;
    const int pc = col - q;
    if (pr < 0 || pc < 0 || pr >= spec.cells() || pc >= spec.cells()) return spec.rho_white;
    return spec.reflectance(pr, pc);
  };

  // Grid vertices in the image; bail out if any lies behind the camera.
  std::vector<Vec2> vert(static_cast<std::size_t>(n + 1) * (n + 1));
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (int r = 0; r <= n; ++r) {
    for (int col = 0; col <= n; ++col) {
      const Eigen::Vector3d p =
          pose.rotation * Eigen::Vector3d(-half + col * c, -half + r * c, 0.0) + pose.translation;
      if (p.z() <= 1e-6) return;
      const Vec2 v = project(k, p);
      vert[static_cast<std::size_t>(r) * (n + 1) + col] = v;
      min_x = std::min(min_x, v.x());
      max_x = std::max(max_x, v.x());
      min_y = std::min(min_y, v.y());
      max_y = std::max(max_y, v.y());
    }
  }
  const int x_lo = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int y_lo = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int x_hi = std::min(field.width - 1, static_cast<int>(std::ceil(max_x)) + 1);
  const int y_hi = std::min(field.height - 1, static_cast<int>(std::ceil(max_y)) + 1);
  if (x_lo > x_hi || y_lo > y_hi) return;

  Eigen::Matrix3d h;
  h.col(0) = k.matrix() * pose.rotation.col(0);
  h.col(1) = k.matrix() * pose.rotation.col(1);
  h.col(2) = k.matrix() * pose.translation;
  const Eigen::Matrix3d hinv = h.inverse();

  const auto cell_quad = [&](int r, int col) {
    const auto at = [&](int rr, int cc) { return vert[static_cast<std::size_t>(rr) * (n + 1) + cc]; };
    return std::array<Vec2, 4>{at(r, col), at(r, col + 1), at(r + 1, col + 1), at(r + 1, col)};
  };

  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      int cmin = 1 << 30, cmax = -(1 << 30), rmin = 1 << 30, rmax = -(1 << 30);
      for (int corner = 0; corner < 4; ++corner) {
        const Vec2 px(x + ((corner & 1) ? 0.5 : -0.5), y + ((corner & 2) ? 0.5 : -0.5));
        const Vec2 m = apply(hinv, px);
        const int col = static_cast<int>(std::floor((m.x() + half) / c));
        const int row = static_cast<int>(std::floor((m.y() + half) / c));
        cmin = std::min(cmin, col);
        cmax = std::max(cmax, col);
        rmin = std::min(rmin, row);
        rmax = std::max(rmax, row);
      }
      if (cmax < 0 || rmax < 0 || cmin >= n || rmin >= n) continue;
      double covered = 0.0;
      double reflected = 0.0;
      if (cmin == cmax && rmin == rmax) {
        covered = 1.0;
        reflected = reflectance(rmin, cmin);
      } else {
        for (int r = std::max(0, rmin); r <= std::min(n - 1, rmax); ++r) {
          for (int col = std::max(0, cmin); col <= std::min(n - 1, cmax); ++col) {
            const double a = clipped_area(cell_quad(r, col), x - 0.5, y - 0.5, x + 0.5, y + 0.5);
            covered += a;
            reflected += a * reflectance(r, col);
          }
        }
        covered = std::min(covered, 1.0);
      }
      field(x, y) = (1.0 - covered) * field(x, y) + illumination(x, y) * reflected;
    }
  }
}

namespace {

double rms_reprojection(const Pose& pose, const Corners& corners, const MarkerSpec& spec,
                        const Intrinsics& k) {
  const Corners reproj = project_corners(spec, pose, k);
  double sq = 0.0;
  for (int i = 0; i < 4; ++i) sq += (reproj[i] - corners[i]).squaredNorm();
  return std::sqrt(sq / 4.0);
}

// Gauss-Newton on the corner reprojection error, rotation updated on the
// left by a small axis-angle step. The closed-form homography pose loses
// millimetres of depth on small, steeply tilted markers once its rotation is
// forced orthonormal; a few iterations recover them.
Pose refine_pose(Pose pose, const Corners& corners, const MarkerSpec& spec, const Intrinsics& k) {
  const auto plane = spec.plane_corners();
  double err = rms_reprojection(pose, corners, spec, k);
  for (int iter = 0; iter < 10; ++iter) {
    Eigen::Matrix<double, 8, 6> jac;
    Eigen::Matrix<double, 8, 1> res;
    for (int i = 0; i < 4; ++i) {
      const Eigen::Vector3d rx = pose.rotation * Eigen::Vector3d(plane[i].x(), plane[i].y(), 0.0);
      const Eigen::Vector3d p = rx + pose.translation;
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix3d skew;
      skew << 0.0, -rx.z(), rx.y(), rx.z(), 0.0, -rx.x(), -rx.y(), rx.x(), 0.0;
      jac.block<2, 3>(2 * i, 0) = -dproj * skew;
      jac.block<2, 3>(2 * i, 3) = dproj;
      res.segment<2>(2 * i) = project(k, p) - corners[i];
    }
    const Eigen::Matrix<double, 6, 1> step = (jac.transpose() * jac).ldlt().solve(-jac.transpose() * res);
    if (!step.allFinite()) break;
    Pose next = pose;
    const Eigen::Vector3d w = step.head<3>();
    if (w.norm() > 0.0) next.rotation = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() * pose.rotation;
    next.translation += step.tail<3>();
    if (next.translation.z() <= 0.0) break;
    const double next_err = rms_reprojection(next, corners, spec, k);
    if (!(next_err < err)) break;
    pose = next;
    const bool small = err - next_err < 1e-12;
    err = next_err;
    if (small) break;
  }
  return pose;
}

}  // namespace

PoseEstimate estimate_pose(const Corners& corners, const MarkerSpec& spec, const Intrinsics& k) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i) scale = std::max(scale, (corners[i] - corners[(i + 1) % 4]).norm());
  for (int i = 0; i < 4; ++i) {
    const Vec2 a = corners[(i + 1) % 4] - corners[i];
    const Vec2 b = corners[(i + 2) % 4] - corners[i];
    if (std::abs(a.x() * b.y() - a.y() * b.x()) < 1e-9 * scale * scale + 1e-12) {
      throw DegenerateCorners("marker corners are collinear");
    }
  }
  const Eigen::Matrix3d h = homography(spec.plane_corners(), corners);
  const Eigen::Matrix3d m = k.matrix().inverse() * h;
  double lambda = 2.0 / (m.col(0).norm() + m.col(1).norm());
  if (lambda * m(2, 2) < 0.0) lambda = -lambda;

  Eigen::Matrix3d r0;
  r0.col(0) = lambda * m.col(0);
  r0.col(1) = lambda * m.col(1);
  r0.col(2) = r0.col(0).cross(r0.col(1));
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    rot = u * svd.matrixV().transpose();
  }

  PoseEstimate out;
  out.pose.rotation = rot;
  out.pose.translation = lambda * m.col(2);
  if (out.pose.translation.z() > 0.0) out.pose = refine_pose(out.pose, corners, spec, k);
  out.reproj_error = rms_reprojection(out.pose, corners, spec, k);
  return out;
}

namespace {

std::optional<DetectionResult> detect_at(const img::Image8& frame, const img::Rect& search,
                                         const MarkerSpec& spec, const Intrinsics& k,
                                         Mask mask) {
  const auto labelling = dark_components(search, std::move(mask));
  const auto& comps = labelling.comps;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (comps[i].pixels.size() >= 16 && !comps[i].touches_border) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return comps[a].pixels.size() > comps[b].pixels.size();
  });

  constexpr int max_candidates = 8;
  int tried = 0;
  for (std::size_t idx : order) {
    const Component& c = comps[idx];
    if (++tried > max_candidates) break;
    const auto cand = quad_candidate(frame, search, c);
    if (!cand) continue;
    if (cand->bright_mean - cand->dark_mean < 20.0) continue;
    const auto refined = refine_corners(frame, search, cand->coarse, cand->centroid);
    if (!refined || !is_convex(*refined) || std::abs(signed_area(*refined)) < 64.0) continue;
    const auto ordered = orient(frame, *refined, spec, 0.5 * (cand->dark_mean + cand->bright_mean));
    if (!ordered) continue;
    PoseEstimate est;
    try {
      est = estimate_pose(*ordered, spec, k);
    } catch (const DegenerateCorners&) {
      continue;
    }
    if (!(est.reproj_error <= 2.0) || est.pose.translation.z() <= 0.0) continue;
    DetectionResult det;
    det.found = true;
    det.corners = *ordered;
    det.translation = est.pose.translation;
    det.reproj_error = est.reproj_error;
    return det;
  }
  return std::nullopt;
}

}  // namespace

DetectionResult detect(const img::Image8& frame, const img::Rect& search, const MarkerSpec& spec,
                       const Intrinsics& k) {
  DetectionResult none;
  if (!img::bounds(frame).contains(search) || search.w < 8 || search.h < 8) return none;
  // A single global split fails when a large dark background dominates the
  // histogram, so the two Otsu classes are split again first.
  const auto hist = histogram(frame, search);
  const int t1 = otsu_threshold(hist, 0, 255);
  if (t1 < 0) return none;
  std::vector<int> thresholds{t1};
  for (int t : {otsu_threshold(hist, t1 + 1, 255), otsu_threshold(hist, 0, t1)}) {
    if (t >= 0) thresholds.push_back(t);
  }
  for (int threshold : thresholds) {
    if (auto det = detect_at(frame, search, spec, k, global_mask(frame, search, threshold))) return *det;
  }
  // Uneven illumination (glare falling off across the marker) defeats any
  // single threshold; a local-mean test does not care.
  const int radius = std::clamp(std::min(search.w, search.h) / 32, 6, 24);
  if (auto det = detect_at(frame, search, spec, k, adaptive_mask(frame, search, radius))) return *det;
  return none;
}

img::Rect roi_from_detection(const DetectionResult& det, const img::Rect& frame) {
  if (!det.found) throw std::logic_error("roi_from_detection needs a successful detection");
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const auto& p : det.corners) {
    min_x = std::min(min_x, p.x());
    min_y = std::min(min_y, p.y());
    max_x = std::max(max_x, p.x());
    max_y = std::max(max_y, p.y());
  }
  const int x0 = static_cast<int>(std::floor(min_x));
  const int y0 = static_cast<int>(std::floor(min_y));
  const int x1 = std::max(x0 + 1, static_cast<int>(std::ceil(max_x)));
  const int y1 = std::max(y0 + 1, static_cast<int>(std::ceil(max_y)));
  return img::inflate_and_clip(img::Rect{x0, y0, x1 - x0, y1 - y0}, 0.10, 0.10, frame);
}

}  // namespace aaec::marker
