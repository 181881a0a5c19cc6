#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace aaec::img {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Row-major single-channel image. Pixel (x, y) lives at data[y * width + x].
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h) {
    if (w < 1 || h < 1) {
      throw DimensionError("image dimensions must be positive");
    }
    data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool empty() const { return data.empty(); }

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const Image&) const = default;
};

/// 8-bit intensities in digital numbers (DN, 0-255).
using Image8 = Image<std::uint8_t>;
/// Real-valued samples: DN, DN/ms or DN/pixel depending on context.
using ImageF = Image<double>;

struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 1;
  int h = 1;

  [[nodiscard]] int x1() const { return x0 + w; }  // exclusive
  [[nodiscard]] int y1() const { return y0 + h; }  // exclusive
  [[nodiscard]] long long area() const { return static_cast<long long>(w) * h; }
  [[nodiscard]] bool contains(const Rect& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1() <= x1() && o.y1() <= y1();
  }
  [[nodiscard]] bool contains(int x, int y) const {
    return x >= x0 && y >= y0 && x < x1() && y < y1();
  }

  bool operator==(const Rect&) const = default;
};

template <typename T>
Rect bounds(const Image<T>& im) {
  return Rect{0, 0, im.width, im.height};
}

struct Gradients {
  ImageF gx;
  ImageF gy;
  ImageF gmag;
};

/// 3x3 Sobel responses. The one-pixel border is zero in every output.
Gradients sobel_gradients(const ImageF& img);

/// Sum of Sobel magnitudes over the interior, without materialising the maps.
double gradient_mass(const ImageF& img);

ImageF to_float(const Image8& img);

Image8 crop(const Image8& img, const Rect& r);
ImageF crop(const ImageF& img, const Rect& r);

/// Grows r by round(fx*w) on the left and right and round(fy*h) on top and
/// bottom, then clips the result to `bounds`.
Rect inflate_and_clip(const Rect& r, double fx, double fy, const Rect& bounds);

/// Intersection of two rects; throws DimensionError when they do not overlap.
Rect intersect(const Rect& a, const Rect& b);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Image8& img);
/// Affine rescale of [min, max] onto [0, 255] before writing.
void write_pgm(const std::filesystem::path& path, const ImageF& img);

}  // namespace aaec::img
