#include "aaec/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace aaec::img {

namespace {

void require_sobel_size(const ImageF& img) {
  if (img.width < 3 || img.height < 3) {
    throw DimensionError("sobel_gradients needs an image of at least 3x3 pixels");
  }
}

template <typename T>
Image<T> crop_impl(const Image<T>& img, const Rect& r) {
  if (r.w < 1 || r.h < 1 || !bounds(img).contains(r)) {
    throw DimensionError("crop rect lies outside the image");
  }
  Image<T> out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    const auto* src = &img(r.x0, r.y0 + y);
    std::copy(src, src + r.w, &out(0, y));
  }
  return out;
}

}  // namespace

Gradients sobel_gradients(const ImageF& img) {
  require_sobel_size(img);
  const int w = img.width;
  const int h = img.height;
  Gradients g{ImageF(w, h), ImageF(w, h), ImageF(w, h)};
  for (int y = 1; y < h - 1; ++y) {
    const double* up = &img(0, y - 1);
    const double* mid = &img(0, y);
    const double* dn = &img(0, y + 1);
    for (int x = 1; x < w - 1; ++x) {
      const double gx = (up[x + 1] - up[x - 1]) + 2.0 * (mid[x + 1] - mid[x - 1]) +
                        (dn[x + 1] - dn[x - 1]);
      const double gy = (dn[x - 1] - up[x - 1]) + 2.0 * (dn[x] - up[x]) +
                        (dn[x + 1] - up[x + 1]);
      g.gx(x, y) = gx;
      g.gy(x, y) = gy;
      g.gmag(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

double gradient_mass(const ImageF& img) {
  require_sobel_size(img);
  double total = 0.0;
  for (int y = 1; y < img.height - 1; ++y) {
    const double* up = &img(0, y - 1);
    const double* mid = &img(0, y);
    const double* dn = &img(0, y + 1);
    for (int x = 1; x < img.width - 1; ++x) {
      const double gx = (up[x + 1] - up[x - 1]) + 2.0 * (mid[x + 1] - mid[x - 1]) +
                        (dn[x + 1] - dn[x - 1]);
      const double gy = (dn[x - 1] - up[x - 1]) + 2.0 * (dn[x] - up[x]) +
                        (dn[x + 1] - up[x + 1]);
      total += std::sqrt(gx * gx + gy * gy);
    }
  }
  return total;
}

ImageF to_float(const Image8& img) {
  ImageF out(img.width, img.height);
  std::transform(img.data.begin(), img.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<double>(v); });
  return out;
}

Image8 crop(const Image8& img, const Rect& r) { return crop_impl(img, r); }
ImageF crop(const ImageF& img, const Rect& r) { return crop_impl(img, r); }

Rect inflate_and_clip(const Rect& r, double fx, double fy, const Rect& b) {
  if (fx < 0.0 || fy < 0.0) {
    throw std::invalid_argument("inflation fractions must be non-negative");
  }
  const int px = static_cast<int>(std::lround(fx * r.w));
  const int py = static_cast<int>(std::lround(fy * r.h));
  const int x0 = std::max(b.x0, r.x0 - px);
  const int y0 = std::max(b.y0, r.y0 - py);
  const int x1 = std::min(b.x1(), r.x1() + px);
  const int y1 = std::min(b.y1(), r.y1() + py);
  if (x1 <= x0 || y1 <= y0) {
    throw DimensionError("rect does not overlap its clipping bounds");
  }
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x0, b.x0);
  const int y0 = std::max(a.y0, b.y0);
  const int x1 = std::min(a.x1(), b.x1());
  const int y1 = std::min(a.y1(), b.y1());
  if (x1 <= x0 || y1 <= y0) {
    throw DimensionError("rects do not overlap");
  }
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

void write_pgm(const std::filesystem::path& path, const Image8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
}

void write_pgm(const std::filesystem::path& path, const ImageF& img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double span = (*hi > *lo) ? (*hi - *lo) : 1.0;
  Image8 scaled(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    scaled.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * (img.data[i] - *lo) / span));
  }
  write_pgm(path, scaled);
}

}  // namespace aaec::img
