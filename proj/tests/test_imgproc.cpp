#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "aaec/imgproc.hpp"
#include "oracles.hpp"

using namespace aaec::img;

TEST_SUITE("imgproc") {

TEST_CASE("flat image has no gradient") {
  ImageF im(16, 12, 128.0);
  const auto g = sobel_gradients(im);
  for (double v : g.gmag.data) CHECK(v == 0.0);
}

TEST_CASE("vertical step edge matches direct convolution") {
  const int w = 20, h = 10, c = 9;
  ImageF im(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = c; x < w; ++x) im(x, y) = 255.0;
  const auto g = sobel_gradients(im);
  const auto ref = oracle::sobel(im);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      CHECK(g.gx(x, y) == doctest::Approx(ref.gx[y * w + x]));
      CHECK(g.gy(x, y) == doctest::Approx(ref.gy[y * w + x]));
      CHECK(g.gmag(x, y) == doctest::Approx(ref.mag(x, y)));
    }
  }
  // The two columns either side of the step carry 4 * 255.
  for (int y = 1; y < h - 1; ++y) {
    CHECK(g.gmag(c - 1, y) == 1020.0);
    CHECK(g.gmag(c, y) == 1020.0);
    CHECK(g.gmag(c - 2, y) == 0.0);
    CHECK(g.gmag(c + 1, y) == 0.0);
  }
}

TEST_CASE("random images match direct convolution") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto im = oracle::random_image(13 + t, 9 + 2 * t, rng);
    const auto g = sobel_gradients(im);
    const auto ref = oracle::sobel(im);
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x) {
        REQUIRE(g.gx(x, y) == doctest::Approx(ref.gx[y * im.width + x]).epsilon(1e-12));
        REQUIRE(g.gy(x, y) == doctest::Approx(ref.gy[y * im.width + x]).epsilon(1e-12));
      }
    CHECK(gradient_mass(im) ==
          doctest::Approx(std::accumulate(g.gmag.data.begin(), g.gmag.data.end(), 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("diagonal edge is symmetric under transpose") {
  const int n = 15;
  ImageF im(n, n), tr(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) im(x, y) = x > y ? 200.0 : 10.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) tr(x, y) = im(y, x);
  const auto a = sobel_gradients(im);
  const auto b = sobel_gradients(tr);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      CHECK(a.gmag(x, y) == doctest::Approx(b.gmag(y, x)));
      CHECK(a.gx(x, y) == doctest::Approx(b.gy(y, x)));
    }
}

TEST_CASE("gradients are linear and magnitudes non-negative with a zero border") {
  std::mt19937_64 rng(5);
  const auto i1 = oracle::random_image(17, 11, rng);
  const auto i2 = oracle::random_image(17, 11, rng);
  const double a = 0.7, b = -1.3;
  ImageF mix(17, 11);
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * i1.data[i] + b * i2.data[i];
  const auto g1 = sobel_gradients(i1), g2 = sobel_gradients(i2), gm = sobel_gradients(mix);
  for (std::size_t i = 0; i < mix.data.size(); ++i) {
    CHECK(gm.gx.data[i] == doctest::Approx(a * g1.gx.data[i] + b * g2.gx.data[i]));
    CHECK(gm.gy.data[i] == doctest::Approx(a * g1.gy.data[i] + b * g2.gy.data[i]));
    CHECK(gm.gmag.data[i] >= 0.0);
  }
  for (int x = 0; x < 17; ++x) {
    CHECK(gm.gmag(x, 0) == 0.0);
    CHECK(gm.gmag(x, 10) == 0.0);
  }
  for (int y = 0; y < 11; ++y) {
    CHECK(gm.gmag(0, y) == 0.0);
    CHECK(gm.gmag(16, y) == 0.0);
  }
}

TEST_CASE("images below 3x3 are rejected") {
  CHECK_THROWS_AS(sobel_gradients(ImageF(2, 5)), DimensionError);
  CHECK_THROWS_AS(sobel_gradients(ImageF(5, 2)), DimensionError);
  CHECK_THROWS_AS(ImageF(0, 4), DimensionError);
}

TEST_CASE("crop") {
  std::mt19937_64 rng(3);
  const auto im = oracle::random_image(20, 15, rng);
  CHECK(crop(im, bounds(im)) == im);
  const auto px = crop(im, Rect{7, 4, 1, 1});
  CHECK(px.width == 1);
  CHECK(px.data[0] == im(7, 4));

  const Rect outer{3, 2, 12, 10}, inner{2, 3, 5, 4};
  const auto twice = crop(crop(im, outer), inner);
  CHECK(twice == crop(im, Rect{outer.x0 + inner.x0, outer.y0 + inner.y0, inner.w, inner.h}));

  Image8 im8(10, 10, 7);
  im8(4, 5) = 99;
  CHECK(crop(im8, Rect{4, 5, 2, 2})(0, 0) == 99);

  CHECK_THROWS_AS(crop(im, Rect{15, 0, 6, 5}), DimensionError);
  CHECK_THROWS_AS(crop(im, Rect{-1, 0, 3, 3}), DimensionError);
}

TEST_CASE("inflate_and_clip") {
  const Rect big{0, 0, 1000, 1000};
  CHECK(inflate_and_clip(Rect{100, 100, 50, 40}, 0.1, 0.1, big) == Rect{95, 96, 60, 48});
  CHECK(inflate_and_clip(Rect{100, 100, 50, 40}, 0.0, 0.0, big) == Rect{100, 100, 50, 40});
  const Rect frame{0, 0, 640, 480};
  const auto edge = inflate_and_clip(Rect{0, 430, 100, 50}, 0.1, 0.1, frame);
  CHECK(edge == Rect{0, 425, 110, 55});
  CHECK(frame.contains(edge));
  CHECK_THROWS_AS(inflate_and_clip(Rect{1, 1, 2, 2}, -0.1, 0.0, frame), std::invalid_argument);
}

TEST_CASE("inflate_and_clip stays inside bounds and keeps the clipped original") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pos(-20, 120), ext(1, 60);
  std::uniform_real_distribution<double> frac(0.0, 0.6);
  const Rect b{0, 0, 100, 80};
  for (int t = 0; t < 500; ++t) {
    const Rect r{pos(rng), pos(rng), ext(rng), ext(rng)};
    Rect clipped;
    try {
      clipped = intersect(r, b);
    } catch (const DimensionError&) {
      continue;
    }
    const auto out = inflate_and_clip(r, frac(rng), frac(rng), b);
    CHECK(b.contains(out));
    CHECK(out.contains(clipped));
  }
}

TEST_CASE("pgm output") {
  const auto dir = std::filesystem::temp_directory_path() / "aaec_pgm_test";
  std::filesystem::create_directories(dir);
  Image8 im(9, 8, 0);
  im(3, 2) = 200;
  write_pgm(dir / "a.pgm", im);
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  std::vector<char> body(static_cast<std::size_t>(w * h));
  in.read(body.data(), static_cast<std::streamsize>(body.size()));
  CHECK(magic == "P5");
  CHECK(w == 9);
  CHECK(h == 8);
  CHECK(maxv == 255);
  CHECK(static_cast<unsigned char>(body[2 * 9 + 3]) == 200);

  ImageF f(4, 4, 1.0);
  f(0, 0) = 3.0;
  write_pgm(dir / "b.pgm", f);
  CHECK(std::filesystem::file_size(dir / "b.pgm") > 16);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
