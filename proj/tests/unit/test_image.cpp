#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::random_tensor;
using test_helpers::scratch_dir;

TEST_CASE("ppm and pgm files round-trip losslessly", "[image]") {
  const std::string dir = scratch_dir("image_io");
  Rng rng(3);

  Tensor img(Shape{5, 7, 3});
  for (auto& v : img.v) v = rng.below(256) / 255.0;  // exactly representable
  write_ppm(dir + "/a.ppm", img);
  const Tensor back = read_ppm(dir + "/a.ppm");
  REQUIRE(back.shape == img.shape);
  for (int i = 0; i < img.size(); ++i)
    CHECK(back.v[i] == Catch::Approx(img.v[i]).margin(1e-12));

  LabelImage mask(4, 6);
  for (auto& v : mask.v) v = static_cast<std::uint8_t>(rng.below(7));
  write_pgm(dir + "/a.pgm", mask);
  CHECK(read_pgm(dir + "/a.pgm") == mask);
}

TEST_CASE("pnm reader skips comments and rejects bad magic", "[image]") {
  const std::string dir = scratch_dir("image_hdr");
  {
    std::ofstream f(dir + "/c.pgm", std::ios::binary);
    f << "P5\n# a comment line\n2 2\n255\n";
    f.put(1).put(2).put(3).put(4);
  }
  const LabelImage m = read_pgm(dir + "/c.pgm");
  REQUIRE(m.h == 2);
  REQUIRE(m.w == 2);
  CHECK(m.at(1, 1) == 4);
  CHECK_THROWS(read_ppm(dir + "/c.pgm"));
  CHECK_THROWS(read_pgm(dir + "/missing.pgm"));
}

TEST_CASE("bilinear resize reproduces linear ramps exactly", "[image]") {
  // f(y,x) = 2y + 3x is reproduced by bilinear interpolation at any scale
  Tensor src(Shape{4, 4, 1});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) src.at(y, x, 0) = 2.0 * y + 3.0 * x;

  const Tensor up = resize_bilinear(src, 7, 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const double sy = y * 3.0 / 6.0, sx = x * 3.0 / 6.0;
      CHECK(up.at(y, x, 0) == Catch::Approx(2.0 * sy + 3.0 * sx).margin(1e-12));
    }

  // identity resize is exact
  const Tensor same = resize_bilinear(src, 4, 4);
  CHECK(same.v == src.v);
}

TEST_CASE("nearest resize picks center-of-cell samples", "[image]") {
  LabelImage m(2, 2);
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(1, 0) = 3;
  m.at(1, 1) = 4;
  const LabelImage up = resize_nearest(m, 4, 4);
  CHECK(up.at(0, 0) == 1);
  CHECK(up.at(0, 3) == 2);
  CHECK(up.at(3, 0) == 3);
  CHECK(up.at(3, 3) == 4);

  // downsample by integer stride keeps one label per cell
  const LabelImage down = downsample_labels(up, 2);
  CHECK(down == m);
}

TEST_CASE("upsample_argmax maps channel winners to class ids", "[image]") {
  Tensor probs(Shape{1, 2, 3});
  probs.at(0, 0, 0) = 0.1;
  probs.at(0, 0, 1) = 0.7;
  probs.at(0, 0, 2) = 0.2;
  probs.at(0, 1, 0) = 0.5;
  probs.at(0, 1, 1) = 0.2;
  probs.at(0, 1, 2) = 0.3;
  const LabelImage out = upsample_argmax(probs, 1, 2, {0, 4, 6});
  CHECK(out.at(0, 0) == 4);
  CHECK(out.at(0, 1) == 0);
}
