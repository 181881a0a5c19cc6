#include "aaec/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace aaec::report {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;

  // Pads degenerate ranges so a single point still lands mid-plot.
  void finish() {
    if (!(hi > lo)) {
      const double pad = std::max(std::abs(lo) * 1e-3, 1e-6);
      lo -= pad;
      hi += pad;
    }
  }
  [[nodiscard]] double map(double v, double a, double b) const {
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
}

void frame_axes(std::ostringstream& out, const Axis& ax, const Axis& ay, const std::string& xlabel,
                const std::string& ylabel) {
  const double x0 = kMargin, x1 = kWidth - kMargin / 2;
  const double y0 = kHeight - kMargin, y1 = kMargin / 1.5;
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0)
      << "\" height=\"" << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num(x0) << "\" y=\"" << num(y0 + 16) << "\" font-size=\"11\">"
      << label(ax.lo) << "</text>\n";
  out << "<text x=\"" << num(x1) << "\" y=\"" << num(y0 + 16)
      << "\" font-size=\"11\" text-anchor=\"end\">" << label(ax.hi) << "</text>\n";
  out << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y0)
      << "\" font-size=\"11\" text-anchor=\"end\">" << label(ay.lo) << "</text>\n";
  out << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y1 + 10)
      << "\" font-size=\"11\" text-anchor=\"end\">" << label(ay.hi) << "</text>\n";
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 16)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
  out << "<text x=\"14\" y=\"" << num((y0 + y1) / 2)
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
      << num((y0 + y1) / 2) << ")\">" << ylabel << "</text>\n";
}

}  // namespace

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::xy:
      return "xy";
    case Plane::xz:
      return "xz";
    case Plane::yz:
      return "yz";
  }
  return "?";
}

std::string scatter_svg(const eval::RunRecord& run, Plane plane) {
  const int ia = plane == Plane::yz ? 1 : 0;
  const int ib = plane == Plane::xy ? 1 : 2;
  const char names[] = {'x', 'y', 'z'};

  std::vector<std::pair<double, double>> pts;
  for (const auto& f : run.frames) {
    if (f.detected) pts.emplace_back((*f.detected)[ia], (*f.detected)[ib]);
  }
  Axis ax{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Axis ay = ax;
  for (const auto& [a, b] : pts) {
    ax.lo = std::min(ax.lo, a);
    ax.hi = std::max(ax.hi, a);
    ay.lo = std::min(ay.lo, b);
    ay.hi = std::max(ay.hi, b);
  }
  if (pts.empty()) ax = ay = Axis{};
  ax.finish();
  ay.finish();

  std::ostringstream out;
  header(out, run.scenario + " / " + run.controller + " / seed " + std::to_string(run.seed) +
                  " (" + std::to_string(pts.size()) + " detections)");
  frame_axes(out, ax, ay, std::string(1, names[ia]) + " [m]", std::string(1, names[ib]) + " [m]");
  out << "<g fill=\"" << kPalette[0] << "\" fill-opacity=\"0.6\">\n";
  for (const auto& [a, b] : pts) {
    out << "<circle cx=\"" << num(ax.map(a, kMargin, kWidth - kMargin / 2)) << "\" cy=\""
        << num(ay.map(b, kHeight - kMargin, kMargin / 1.5)) << "\" r=\"2\"/>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string trace_svg(const std::vector<eval::RunRecord>& runs) {
  Axis ax{0.0, 1.0};
  Axis ay{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& r : runs) {
    ax.hi = std::max(ax.hi, static_cast<double>(r.frames.size()) - 1.0);
    for (const auto& f : r.frames) {
      const double l = std::log10(std::max(f.log.dt, 1e-9));
      ay.lo = std::min(ay.lo, l);
      ay.hi = std::max(ay.hi, l);
    }
  }
  if (!(ay.hi >= ay.lo)) ay = Axis{};
  ay.finish();

  std::ostringstream out;
  header(out, "exposure traces");
  frame_axes(out, ax, ay, "frame", "log10 exposure [ms]");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < r.frames.size(); ++k) {
      const double l = std::log10(std::max(r.frames[k].log.dt, 1e-9));
      out << (k ? " " : "") << num(ax.map(static_cast<double>(k), kMargin, kWidth - kMargin / 2))
          << ',' << num(ay.map(l, kHeight - kMargin, kMargin / 1.5));
    }
    out << "\"/>\n";
    out << "<text x=\"" << num(kWidth - kMargin / 2 - 4) << "\" y=\"" << num(kMargin + 14.0 * i)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << colour << "\">" << r.scenario
        << ' ' << r.controller << " s" << r.seed << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace aaec::report
