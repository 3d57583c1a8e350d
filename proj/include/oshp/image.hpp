#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oshp/tensor.hpp"

// Binary PPM/PGM image IO plus the resampling rules used throughout:
// images are resized bilinearly, label masks only ever nearest-neighbour.

namespace oshp {

// H x W integer label image, id 0 = background
struct LabelImage {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  LabelImage() = default;
  LabelImage(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const {
    return v[static_cast<size_t>(y) * w + x];
  }
  bool operator==(const LabelImage&) const = default;
};

inline void write_ppm(const std::string& path, const Tensor& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << img.shape.w << " " << img.shape.h << "\n255\n";
  for (int y = 0; y < img.shape.h; ++y)
    for (int x = 0; x < img.shape.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        f.put(static_cast<char>(std::lround(v * 255.0)));
      }
}

inline void write_pgm(const std::string& path, const LabelImage& mask) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << mask.w << " " << mask.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(mask.v.data()),
          static_cast<std::streamsize>(mask.v.size()));
}

namespace detail {
inline int read_pnm_header(std::istream& f, const std::string& magic,
                           int& w, int& h) {
  std::string m;
  f >> m;
  if (m != magic) throw std::runtime_error("bad magic, expected " + magic);
  int maxval;
  // skip comments
  auto next_int = [&f]() {
    for (;;) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(ch)) {
        f.get();
      } else {
        break;
      }
    }
    int v;
    f >> v;
    return v;
  };
  w = next_int();
  h = next_int();
  maxval = next_int();
  f.get();  // single whitespace before raster
  return maxval;
}
}  // namespace detail

inline Tensor read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  int w, h;
  const int maxval = detail::read_pnm_header(f, "P6", w, h);
  Tensor img{Shape{h, w, 3}};
  std::vector<char> buf(static_cast<size_t>(w) * h * 3);
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated image " + path);
  for (size_t i = 0; i < buf.size(); ++i)
    img.v[i] = static_cast<std::uint8_t>(buf[i]) / double(maxval);
  return img;
}

inline LabelImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  int w, h;
  detail::read_pnm_header(f, "P5", w, h);
  LabelImage mask(h, w);
  f.read(reinterpret_cast<char*>(mask.v.data()),
         static_cast<std::streamsize>(mask.v.size()));
  if (!f) throw std::runtime_error("truncated mask " + path);
  return mask;
}

inline Tensor resize_bilinear(const Tensor& img, int oh, int ow) {
  const int ih = img.shape.h, iw = img.shape.w, c = img.shape.c;
  Tensor out{Shape{oh, ow, c}};
  const double sy = oh > 1 ? double(ih - 1) / (oh - 1) : 0.0;
  const double sx = ow > 1 ? double(iw - 1) / (ow - 1) : 0.0;
  for (int y = 0; y < oh; ++y) {
    const double fy = y * sy;
    const int y0 = std::min(int(fy), ih - 1), y1 = std::min(y0 + 1, ih - 1);
    const double ty = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = x * sx;
      const int x0 = std::min(int(fx), iw - 1), x1 = std::min(x0 + 1, iw - 1);
      const double tx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double a = img.at(y0, x0, ch) * (1 - tx) + img.at(y0, x1, ch) * tx;
        const double b = img.at(y1, x0, ch) * (1 - tx) + img.at(y1, x1, ch) * tx;
        out.at(y, x, ch) = a * (1 - ty) + b * ty;
      }
    }
  }
  return out;
}

inline LabelImage resize_nearest(const LabelImage& mask, int oh, int ow) {
  LabelImage out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const int iy = std::min(int((y + 0.5) * mask.h / oh), mask.h - 1);
    for (int x = 0; x < ow; ++x) {
      const int ix = std::min(int((x + 0.5) * mask.w / ow), mask.w - 1);
      out.at(y, x) = mask.at(iy, ix);
    }
  }
  return out;
}

// downsample a label mask to feature resolution (integer stride, nearest)
inline LabelImage downsample_labels(const LabelImage& mask, int stride) {
  return resize_nearest(mask, mask.h / stride, mask.w / stride);
}

// bilinearly upsample an h x w x K probability tensor and take per-pixel argmax
inline LabelImage upsample_argmax(const Tensor& probs, int oh, int ow,
                                  const std::vector<int>& class_ids) {
  const Tensor up = resize_bilinear(probs, oh, ow);
  LabelImage out(oh, ow);
  const int k = probs.shape.c;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      int best = 0;
      double bv = up.at(y, x, 0);
      for (int j = 1; j < k; ++j)
        if (up.at(y, x, j) > bv) {
          bv = up.at(y, x, j);
          best = j;
        }
      out.at(y, x) = static_cast<std::uint8_t>(class_ids[best]);
    }
  return out;
}

}  // namespace oshp
