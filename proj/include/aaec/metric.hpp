#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aaec/camera_sim.hpp"
#include "aaec/imgproc.hpp"

namespace aaec::metric {

struct MetricParams {
  double p = 0.75;  // target percentile
  double k = 5.0;   // weight sharpness
  sim::Crf crf;

  void validate() const;
};

struct MetricReport {
  double m = 0.0;
  double dm_ddt = 0.0;  // per ms
  long long s = 0;      // pixels entering the sort
  double saturated_frac = 0.0;
};

struct RoiTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Percentile weights over S pixels sorted by ascending gradient.
/// Unnormalised w_i = sin(pi*i / (2m))^k for i <= m = floor(pS) and
/// sin(pi/2 - pi*(i-m) / (2(S-m)))^k above it; returned normalised to sum 1.
std::vector<double> weights(long long s, double p, double k);

/// Pixel order used by the metric: ascending gradient, ties by index.
std::vector<std::uint32_t> gradient_order(const std::vector<double>& values);

/// Interior (non-border) gradient magnitudes of `intensity` over `roi`, row-major.
std::vector<double> interior_gradients(const img::ImageF& intensity, const img::Rect& roi);

/// Weighted sum of sorted gradient magnitudes inside roi.
double m_softperc(const img::ImageF& intensity, const img::Rect& roi, const MetricParams& params);
double m_softperc(const img::Image8& frame, const img::Rect& roi, const MetricParams& params);

enum class IrradianceSource { ground_truth, inverse_crf };

/// Metric value and its derivative with respect to exposure time.
/// ground_truth needs `irradiance` (full-frame E); inverse_crf recovers it
/// from the intensities. The sort order is frozen at the current frame.
MetricReport dm_ddt(const img::ImageF& intensity, const img::Rect& roi, double dt,
                    const MetricParams& params, IrradianceSource source,
                    const img::ImageF* irradiance = nullptr);
MetricReport dm_ddt(const sim::Frame& frame, const img::Rect& roi, const MetricParams& params,
                    IrradianceSource source, const img::ImageF* irradiance = nullptr);

}  // namespace aaec::metric
