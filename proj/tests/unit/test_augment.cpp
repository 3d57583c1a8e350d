#include <catch_amalgamated.hpp>

#include <set>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::random_mask;
using test_helpers::random_tensor;

TEST_CASE("augmentation emits the configured size and is deterministic",
          "[augment]") {
  Rng img_rng(3);
  const Tensor image = random_tensor({48, 40, 3}, img_rng, 0.0, 1.0);
  const LabelImage mask = random_mask(48, 40, 5, img_rng);
  AugmentConfig cfg;
  cfg.resize_to = 32;

  Rng a(9), b(9), c(10);
  const auto [ia, ma] = augment(image, mask, cfg, a);
  const auto [ib, mb] = augment(image, mask, cfg, b);
  const auto [ic, mc] = augment(image, mask, cfg, c);

  CHECK(ia.shape == Shape{32, 32, 3});
  CHECK(ma.h == 32);
  CHECK(ma.w == 32);
  CHECK(ia.v == ib.v);
  CHECK(ma == mb);
  CHECK((ic.v != ia.v || !(mc == ma)));  // different stream, different draw
}

TEST_CASE("augmentation introduces no labels that were not in the source",
          "[augment]") {
  Rng img_rng(5);
  const Tensor image = random_tensor({40, 40, 3}, img_rng, 0.0, 1.0);
  LabelImage mask(40, 40);
  for (int y = 10; y < 30; ++y)
    for (int x = 12; x < 28; ++x) mask.at(y, x) = (y < 20) ? 2 : 6;

  AugmentConfig cfg;
  cfg.resize_to = 32;
  std::set<int> source{0, 2, 6};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto [img, out] = augment(image, mask, cfg, rng);
    for (auto v : out.v) CHECK(source.count(v) == 1);
  }
}

TEST_CASE("shrinking scales pad with background labels", "[augment]") {
  Rng img_rng(8);
  const Tensor image = random_tensor({32, 32, 3}, img_rng, 0.5, 1.0);
  LabelImage mask(32, 32, 3);  // every source pixel is class 3

  AugmentConfig cfg;
  cfg.resize_to = 32;
  cfg.scale_min = 0.5;
  cfg.scale_max = 0.5;  // always shrink to 16x16 inside a 32x32 frame
  cfg.flip = false;
  Rng rng(4);
  const auto [img, out] = augment(image, mask, cfg, rng);

  int fg = 0, bg = 0;
  for (auto v : out.v) (v == 3 ? fg : bg)++;
  CHECK(fg == 16 * 16);
  CHECK(bg == 32 * 32 - 16 * 16);
}

TEST_CASE("flips are mirror-exact on image and mask together", "[augment]") {
  Tensor image(Shape{1, 3, 3});
  for (int x = 0; x < 3; ++x) image.at(0, x, 0) = x;
  LabelImage mask(1, 3);
  for (int x = 0; x < 3; ++x) mask.at(0, x) = static_cast<std::uint8_t>(x);

  const Tensor fi = detail::flip_h(image);
  const LabelImage fm = detail::flip_h(mask);
  CHECK(fi.at(0, 0, 0) == 2.0);
  CHECK(fi.at(0, 2, 0) == 0.0);
  CHECK(fm.at(0, 0) == 2);
  CHECK(fm.at(0, 2) == 0);
}
