#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oshp {

// Dense row-major H x W x C tensor of doubles. Scalars are 1x1x1,
// vectors 1x1xC.
struct Shape {
  int h = 1;
  int w = 1;
  int c = 1;

  int size() const { return h * w * c; }
  bool operator==(const Shape&) const = default;
};

struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(static_cast<size_t>(s.size()), 0.0) {}
  Tensor(Shape s, double fill)
      : shape(s), v(static_cast<size_t>(s.size()), fill) {}

  static Tensor scalar(double x) {
    Tensor t{Shape{1, 1, 1}};
    t.v[0] = x;
    return t;
  }
  static Tensor vec(const std::vector<double>& xs) {
    Tensor t{Shape{1, 1, static_cast<int>(xs.size())}};
    t.v = xs;
    return t;
  }

  double& at(int y, int x, int ch) {
    return v[static_cast<size_t>((y * shape.w + x) * shape.c + ch)];
  }
  double at(int y, int x, int ch) const {
    return v[static_cast<size_t>((y * shape.w + x) * shape.c + ch)];
  }

  int size() const { return shape.size(); }
};

// Deterministic RNG helpers on top of a 64-bit state stream. We avoid the
// std distributions so draws are identical across library versions.
struct Rng {
  std::uint64_t s;

  explicit Rng(std::uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double range(double a, double b) { return a + (b - a) * u01(); }
  int below(int n) {
    assert(n > 0);
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }
  bool coin() { return (next() & 1u) != 0; }
};

}  // namespace oshp
