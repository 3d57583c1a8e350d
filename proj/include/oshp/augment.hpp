#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "oshp/image.hpp"

namespace oshp {

struct AugmentConfig {
  int resize_to = 64;
  double scale_min = 0.5;
  double scale_max = 2.0;
  bool crop = true;
  bool flip = true;
};

namespace detail {
inline Tensor flip_h(const Tensor& img) {
  Tensor out(img.shape);
  for (int y = 0; y < img.shape.h; ++y)
    for (int x = 0; x < img.shape.w; ++x)
      for (int c = 0; c < img.shape.c; ++c)
        out.at(y, x, c) = img.at(y, img.shape.w - 1 - x, c);
  return out;
}
inline LabelImage flip_h(const LabelImage& m) {
  LabelImage out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
  return out;
}
}  // namespace detail

// Identical geometric transform on image and mask: resize, random scale,
// random crop (zero/background padded when the scaled image is smaller),
// random horizontal flip. Mask resampling is always nearest-neighbour.
inline std::pair<Tensor, LabelImage> augment(const Tensor& image,
                                             const LabelImage& mask,
                                             const AugmentConfig& cfg,
                                             Rng& rng) {
  const int t = cfg.resize_to;
  Tensor img = resize_bilinear(image, t, t);
  LabelImage msk = resize_nearest(mask, t, t);

  const double s = rng.range(cfg.scale_min, cfg.scale_max);
  const int sz = std::max(1, int(std::lround(t * s)));
  if (sz != t) {
    img = resize_bilinear(img, sz, sz);
    msk = resize_nearest(msk, sz, sz);
  }

  if (cfg.crop || sz != t) {
    Tensor out{Shape{t, t, 3}};
    LabelImage outm(t, t);
    int oy, ox;  // crop offset in source, negative = padding offset
    if (sz >= t) {
      oy = rng.below(sz - t + 1);
      ox = rng.below(sz - t + 1);
    } else {
      oy = -rng.below(t - sz + 1);
      ox = -rng.below(t - sz + 1);
    }
    for (int y = 0; y < t; ++y)
      for (int x = 0; x < t; ++x) {
        const int sy = y + oy, sx = x + ox;
        if (sy < 0 || sy >= sz || sx < 0 || sx >= sz) continue;  // stays pad
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        outm.at(y, x) = msk.at(sy, sx);
      }
    img = std::move(out);
    msk = std::move(outm);
  }

  if (cfg.flip && rng.coin()) {
    img = detail::flip_h(img);
    msk = detail::flip_h(msk);
  }
  return {std::move(img), std::move(msk)};
}

}  // namespace oshp
