#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "oshp/episode.hpp"
#include "oshp/manifest.hpp"

// Procedural desk-scale dataset: textured geometric figures on a noisy
// background, with pixel-exact label masks. Stands in for the large human
// parsing corpora so the full episodic pipeline can run in seconds.

namespace oshp {

struct SyntheticConfig {
  int image_size = 64;
  int n_train_support = 30;
  int n_train_query = 30;
  int n_test_support = 12;
  int n_test_query = 12;
  std::vector<std::string> class_names = {"background", "head", "torso",
                                          "arms",       "legs", "hat",
                                          "skirt"};
  std::string out_dir;

  void validate() const {
    if (static_cast<int>(class_names.size()) < 5)
      throw std::runtime_error("synthetic: need >= 4 part classes");
    if (image_size < 32)
      throw std::runtime_error("synthetic: image size must be >= 32");
  }
};

// fold used by the synthetic benchmark: fashion items are the novel classes
inline FoldSpec default_synthetic_fold() {
  FoldSpec fold;
  for (int c = 0; c <= 6; ++c) fold.merge_map[c] = c;
  fold.base_classes = {1, 2, 3, 4};
  fold.novel_classes = {5, 6};
  return fold;
}

namespace detail {

struct Figure {
  Tensor image;
  LabelImage mask;
};

inline void fill_rect(Figure& fig, double x0, double y0, double x1, double y1,
                      int cls, const double rgb[3], Rng& rng, int texture) {
  const int h = fig.mask.h, w = fig.mask.w;
  const int iy0 = std::max(0, int(y0)), iy1 = std::min(h - 1, int(y1));
  const int ix0 = std::max(0, int(x0)), ix1 = std::min(w - 1, int(x1));
  for (int y = iy0; y <= iy1; ++y)
    for (int x = ix0; x <= ix1; ++x) {
      double shade = 1.0;
      if (texture == 1 && (x / 2) % 2 == 0) shade = 0.55;   // vertical stripes
      if (texture == 2 && (y / 2) % 2 == 0) shade = 0.55;   // horizontal stripes
      if (texture == 3 && ((x / 2) + (y / 2)) % 2 == 0) shade = 0.5;  // checker
      if (texture == 4 && (((x + y) / 2) % 2 == 0)) shade = 0.55;  // diagonal
      if (texture == 5 && (x % 4 < 2 && y % 4 < 2)) shade = 0.45;  // dots
      for (int c = 0; c < 3; ++c)
        fig.image.at(y, x, c) =
            std::clamp(rgb[c] * shade + rng.range(-0.03, 0.03), 0.0, 1.0);
      fig.mask.at(y, x) = static_cast<std::uint8_t>(cls);
    }
}

inline void fill_circle(Figure& fig, double cx, double cy, double r, int cls,
                        const double rgb[3], Rng& rng) {
  const int h = fig.mask.h, w = fig.mask.w;
  for (int y = std::max(0, int(cy - r)); y <= std::min(h - 1, int(cy + r)); ++y)
    for (int x = std::max(0, int(cx - r)); x <= std::min(w - 1, int(cx + r));
         ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
        for (int c = 0; c < 3; ++c)
          fig.image.at(y, x, c) =
              std::clamp(rgb[c] + rng.range(-0.03, 0.03), 0.0, 1.0);
        fig.mask.at(y, x) = static_cast<std::uint8_t>(cls);
      }
}

inline Figure render_figure(int size, int n_classes, Rng& rng) {
  Figure fig;
  fig.image = Tensor{Shape{size, size, 3}};
  fig.mask = LabelImage(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double g = 0.16 + rng.range(-0.05, 0.05);
      fig.image.at(y, x, 0) = g;
      fig.image.at(y, x, 1) = g + 0.02;
      fig.image.at(y, x, 2) = g;
    }

  const double s = size * rng.range(0.9, 1.1);
  const double cx = size * 0.5 + size * rng.range(-0.06, 0.06);
  const double cy = size * 0.46 + size * rng.range(-0.04, 0.04);
  const double jit = rng.range(-0.06, 0.06);  // per-figure brightness shift

  // every part shares one base color: classes are separable by texture and
  // position only, so an untrained embedding cannot solve the task by color
  auto tint = [jit](double r, double g, double b) {
    return std::array<double, 3>{r + jit, g + jit, b + jit};
  };
  const auto head_c = tint(0.62, 0.55, 0.68);
  const auto torso_c = head_c;
  const auto arms_c = head_c;
  const auto legs_c = head_c;
  const auto hat_c = head_c;
  const auto skirt_c = head_c;

  const double torso_w = 0.18 * s, torso_h = 0.15 * s;
  const double torso_top = cy - torso_h, torso_bot = cy + torso_h;

  // legs (checker)
  fill_rect(fig, cx - 0.16 * s, torso_bot, cx - 0.02 * s, torso_bot + 0.28 * s,
            4, legs_c.data(), rng, 3);
  fill_rect(fig, cx + 0.02 * s, torso_bot, cx + 0.16 * s, torso_bot + 0.28 * s,
            4, legs_c.data(), rng, 3);
  // arms
  fill_rect(fig, cx - torso_w - 0.105 * s, torso_top + 0.02 * s,
            cx - torso_w - 0.005 * s, torso_bot, 3, arms_c.data(), rng, 2);
  fill_rect(fig, cx + torso_w + 0.005 * s, torso_top + 0.02 * s,
            cx + torso_w + 0.105 * s, torso_bot, 3, arms_c.data(), rng, 2);
  // torso (vertical stripes)
  fill_rect(fig, cx - torso_w, torso_top, cx + torso_w, torso_bot, 2,
            torso_c.data(), rng, 1);
  // skirt over the hip area, when the class exists in this dataset
  if (n_classes > 6 && rng.u01() < 0.85)
    fill_rect(fig, cx - 0.22 * s, torso_bot - 0.03 * s, cx + 0.22 * s,
              torso_bot + 0.14 * s, 6, skirt_c.data(), rng, 5);
  // head
  const double head_r = 0.10 * s;
  const double head_cy = torso_top - head_r - 0.02 * s;
  fill_circle(fig, cx, head_cy, head_r, 1, head_c.data(), rng);
  // hat
  if (n_classes > 5 && rng.u01() < 0.85)
    fill_rect(fig, cx - 0.14 * s, head_cy - head_r - 0.06 * s, cx + 0.14 * s,
              head_cy - head_r * 0.45, 5, hat_c.data(), rng, 4);
  return fig;
}

}  // namespace detail

inline DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg,
                                                  std::uint64_t seed) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  DatasetManifest m;
  m.class_names = cfg.class_names;
  m.root = cfg.out_dir;

  struct Block {
    Split split;
    int count;
    const char* prefix;
  };
  const Block blocks[] = {
      {Split::meta_train_support, cfg.n_train_support, "trs"},
      {Split::meta_train_query, cfg.n_train_query, "trq"},
      {Split::meta_test_support, cfg.n_test_support, "tes"},
      {Split::meta_test_query, cfg.n_test_query, "teq"},
  };
  int global = 0;
  for (const auto& b : blocks)
    for (int i = 0; i < b.count; ++i, ++global) {
      // per-image stream so regeneration is order-independent
      Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(global));
      const auto fig = detail::render_figure(
          cfg.image_size, static_cast<int>(cfg.class_names.size()), rng);
      const std::string stem =
          std::string(b.prefix) + "_" + std::to_string(i);
      write_ppm((fs::path(cfg.out_dir) / (stem + ".ppm")).string(), fig.image);
      write_pgm((fs::path(cfg.out_dir) / (stem + ".pgm")).string(), fig.mask);
      m.entries.push_back({stem + ".ppm", stem + ".pgm", b.split});
    }

  save_manifest(m, (fs::path(cfg.out_dir) / "manifest.txt").string());
  return m;
}

}  // namespace oshp
