#pragma once

#include <string>
#include <vector>

#include "aaec/eval.hpp"

namespace aaec::report {

/// Projection plane for detected-position scatters, named by the kept axes.
enum class Plane { xy, xz, yz };

std::string_view to_string(Plane p);

/// Scatter of a run's detected positions (m) projected onto `plane`. One
/// <circle> per found frame, in frame order.
std::string scatter_svg(const eval::RunRecord& run, Plane plane);

/// Exposure traces (ms against frame index), one <polyline> per run with one
/// vertex per frame. Log-scaled exposure axis.
std::string trace_svg(const std::vector<eval::RunRecord>& runs);

}  // namespace aaec::report
