#include "aaec/metric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

namespace aaec::metric {

void MetricParams::validate() const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("metric percentile p must lie in (0, 1)");
  if (!(k >= 1.0)) throw std::invalid_argument("metric exponent k must be >= 1");
}

std::vector<double> weights(long long s, double p, double k) {
  if (s < 2) throw RoiTooSmall("percentile weights need at least two pixels");
  const long long m = static_cast<long long>(std::floor(p * static_cast<double>(s)));
  std::vector<double> w(static_cast<std::size_t>(s));
  const double pi = std::numbers::pi;
  double total = 0.0;
  for (long long i = 0; i < s; ++i) {
    double v;
    if (i <= m) {
      v = m > 0 ? std::sin(pi * static_cast<double>(i) / (2.0 * static_cast<double>(m))) : 1.0;
    } else {
      v = std::sin(pi / 2.0 - pi * static_cast<double>(i - m) / (2.0 * static_cast<double>(s - m)));
    }
    v = std::pow(std::max(v, 0.0), k);
    w[static_cast<std::size_t>(i)] = v;
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

namespace {

// Weight vectors are reused across frames of the same RoI size.
const std::vector<double>& cached_weights(long long s, double p, double k) {
  thread_local std::map<std::tuple<long long, double, double>, std::vector<double>> cache;
  const auto key = std::make_tuple(s, p, k);
  auto it = cache.find(key);
  if (it == cache.end()) {
    if (cache.size() > 64) cache.clear();
    it = cache.emplace(key, weights(s, p, k)).first;
  }
  return it->second;
}

std::uint64_t order_key(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  return (bits >> 63) ? ~bits : (bits | (std::uint64_t{1} << 63));
}

void require_roi(const img::ImageF& im, const img::Rect& roi) {
  if (!img::bounds(im).contains(roi)) throw RoiTooSmall("RoI lies outside the frame");
  if (static_cast<long long>(roi.w - 2) * (roi.h - 2) < 2 || roi.w < 3 || roi.h < 3) {
    throw RoiTooSmall("RoI interior must hold at least two pixels");
  }
}

}  // namespace

std::vector<std::uint32_t> gradient_order(const std::vector<double>& values) {
  // Stable LSD radix sort on order-preserving keys; stability gives the
  // index tie-break.
  const std::size_t n = values.size();
  std::vector<std::uint64_t> keys(n), keys_tmp(n);
  std::vector<std::uint32_t> idx(n), idx_tmp(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = order_key(values[i]);
    idx[i] = static_cast<std::uint32_t>(i);
  }
  std::vector<std::size_t> count(1 << 16);
  for (int pass = 0; pass < 4; ++pass) {
    const int shift = 16 * pass;
    std::fill(count.begin(), count.end(), 0);
    for (auto key : keys) ++count[(key >> shift) & 0xffff];
    if (count[(keys.empty() ? 0 : (keys[0] >> shift) & 0xffff)] == n) continue;
    std::size_t sum = 0;
    for (auto& c : count) {
      const std::size_t t = c;
      c = sum;
      sum += t;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pos = count[(keys[i] >> shift) & 0xffff]++;
      keys_tmp[pos] = keys[i];
      idx_tmp[pos] = idx[i];
    }
    keys.swap(keys_tmp);
    idx.swap(idx_tmp);
  }
  return idx;
}

std::vector<double> interior_gradients(const img::ImageF& intensity, const img::Rect& roi) {
  require_roi(intensity, roi);
  const auto g = img::sobel_gradients(img::crop(intensity, roi));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(roi.w - 2) * (roi.h - 2));
  for (int y = 1; y < roi.h - 1; ++y) {
    for (int x = 1; x < roi.w - 1; ++x) out.push_back(g.gmag(x, y));
  }
  return out;
}

double m_softperc(const img::ImageF& intensity, const img::Rect& roi, const MetricParams& params) {
  const auto grad = interior_gradients(intensity, roi);
  const auto order = gradient_order(grad);
  const auto& w = cached_weights(static_cast<long long>(grad.size()), params.p, params.k);
  double m = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) m += w[i] * grad[order[i]];
  return m;
}

double m_softperc(const img::Image8& frame, const img::Rect& roi, const MetricParams& params) {
  return m_softperc(img::to_float(img::crop(frame, roi)), img::Rect{0, 0, roi.w, roi.h}, params);
}

MetricReport dm_ddt(const img::ImageF& intensity, const img::Rect& roi, double dt,
                    const MetricParams& params, IrradianceSource source,
                    const img::ImageF* irradiance) {
  require_roi(intensity, roi);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::out_of_range("exposure time must be positive");
  if (source == IrradianceSource::ground_truth &&
      (irradiance == nullptr || irradiance->width != intensity.width ||
       irradiance->height != intensity.height)) {
    throw std::invalid_argument("ground-truth derivative needs a matching irradiance field");
  }

  const img::ImageF patch = img::crop(intensity, roi);
  // D = dI/d(dt) per pixel, zero where the sensor saturates.
  img::ImageF deriv(roi.w, roi.h);
  long long saturated = 0;
  for (int y = 0; y < roi.h; ++y) {
    for (int x = 0; x < roi.w; ++x) {
      const double i = patch(x, y);
      if (i >= 255.0) {
        ++saturated;
        continue;
      }
      double xhat, ehat;
      if (source == IrradianceSource::ground_truth) {
        ehat = (*irradiance)(roi.x0 + x, roi.y0 + y);
        xhat = ehat * dt;
      } else {
        xhat = sim::crf_inverse(params.crf, i);
        ehat = xhat / dt;
      }
      deriv(x, y) = sim::crf_derivative(params.crf, xhat) * ehat;
    }
  }

  const auto g = img::sobel_gradients(patch);
  const auto dg = img::sobel_gradients(deriv);
  const int iw = roi.w - 2;
  const int ih = roi.h - 2;
  std::vector<double> grad(static_cast<std::size_t>(iw) * ih);
  std::vector<double> dgrad(grad.size());
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * iw + x;
      const double gm = g.gmag(x + 1, y + 1);
      grad[i] = gm;
      dgrad[i] = gm > 0.0 ? (g.gx(x + 1, y + 1) * dg.gx(x + 1, y + 1) +
                             g.gy(x + 1, y + 1) * dg.gy(x + 1, y + 1)) / gm
                          : 0.0;
    }
  }
  const auto order = gradient_order(grad);
  const auto& w = cached_weights(static_cast<long long>(grad.size()), params.p, params.k);
  MetricReport rep;
  for (std::size_t i = 0; i < order.size(); ++i) {
    rep.m += w[i] * grad[order[i]];
    rep.dm_ddt += w[i] * dgrad[order[i]];
  }
  rep.s = static_cast<long long>(grad.size());
  rep.saturated_frac = static_cast<double>(saturated) / static_cast<double>(roi.area());
  return rep;
}

MetricReport dm_ddt(const sim::Frame& frame, const img::Rect& roi, const MetricParams& params,
                    IrradianceSource source, const img::ImageF* irradiance) {
  if (source == IrradianceSource::ground_truth) {
    return dm_ddt(img::to_float(frame.image), roi, frame.dt, params, source, irradiance);
  }
  const auto patch = img::to_float(img::crop(frame.image, roi));
  return dm_ddt(patch, img::Rect{0, 0, roi.w, roi.h}, frame.dt, params, source, nullptr);
}

}  // namespace aaec::metric
