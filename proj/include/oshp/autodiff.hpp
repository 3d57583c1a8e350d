#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "oshp/tensor.hpp"

// Reverse-mode automatic differentiation on small dense tensors. Every op
// builds a graph node holding the forward value and a closure that scatters
// the incoming gradient to its parents. Graphs are rebuilt per episode;
// parameter nodes are long-lived leaves shared across graphs.

namespace oshp::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.v.size() != value.v.size() || grad.shape != value.shape)
      grad = Tensor(value.shape);
  }
  void zero_grad() { grad = Tensor(value.shape); }
  double scalar() const { return value.v[0]; }
};

inline NodePtr constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

inline NodePtr constant(double x) { return constant(Tensor::scalar(x)); }

inline NodePtr param(Tensor t) {
  auto n = constant(std::move(t));
  n->requires_grad = true;
  n->ensure_grad();
  return n;
}

inline NodePtr make_op(Tensor value, std::vector<NodePtr> parents,
                       std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

// ---------------------------------------------------------------------------
// elementwise / scalar ops

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (!(a->value.shape == b->value.shape))
    throw std::invalid_argument("ag::add: shape mismatch");
  Tensor out = a->value;
  for (int i = 0; i < out.size(); ++i) out.v[i] += b->value.v[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i) a->grad.v[i] += n.grad.v[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i) b->grad.v[i] += n.grad.v[i];
    }
  });
}

// a*x + b with scalar constants
inline NodePtr affine_const(const NodePtr& x, double a, double b) {
  Tensor out = x->value;
  for (auto& e : out.v) e = a * e + b;
  return make_op(std::move(out), {x}, [x, a](Node& n) {
    x->ensure_grad();
    for (int i = 0; i < n.value.size(); ++i) x->grad.v[i] += a * n.grad.v[i];
  });
}

inline NodePtr scale(const NodePtr& x, double a) {
  return affine_const(x, a, 0.0);
}

inline NodePtr relu(const NodePtr& x) {
  Tensor out = x->value;
  for (auto& e : out.v) e = e > 0.0 ? e : 0.0;
  return make_op(std::move(out), {x}, [x](Node& n) {
    x->ensure_grad();
    for (int i = 0; i < n.value.size(); ++i)
      if (x->value.v[i] > 0.0) x->grad.v[i] += n.grad.v[i];
  });
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
  if (!(a->value.shape == b->value.shape))
    throw std::invalid_argument("ag::mul: shape mismatch");
  Tensor out = a->value;
  for (int i = 0; i < out.size(); ++i) out.v[i] *= b->value.v[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i)
        a->grad.v[i] += n.grad.v[i] * b->value.v[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i)
        b->grad.v[i] += n.grad.v[i] * a->value.v[i];
    }
  });
}

// weighted sum of same-shaped nodes (scalars included)
inline NodePtr weighted_sum(const std::vector<NodePtr>& xs,
                            const std::vector<double>& ws) {
  if (xs.empty() || xs.size() != ws.size())
    throw std::invalid_argument("ag::weighted_sum: bad arity");
  Tensor out(xs[0]->value.shape);
  for (size_t k = 0; k < xs.size(); ++k)
    for (int i = 0; i < out.size(); ++i) out.v[i] += ws[k] * xs[k]->value.v[i];
  std::vector<NodePtr> parents(xs.begin(), xs.end());
  return make_op(std::move(out), std::move(parents), [xs, ws](Node& n) {
    for (size_t k = 0; k < xs.size(); ++k) {
      if (!xs[k]->requires_grad) continue;
      xs[k]->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i)
        xs[k]->grad.v[i] += ws[k] * n.grad.v[i];
    }
  });
}

// scalar contraction sum_i w_i * x_i against constant weights
inline NodePtr inner_const(const NodePtr& x, const std::vector<double>& ws) {
  if (static_cast<size_t>(x->value.size()) != ws.size())
    throw std::invalid_argument("ag::inner_const: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < ws.size(); ++i) s += ws[i] * x->value.v[i];
  auto w = ws;
  return make_op(Tensor::scalar(s), {x}, [x, w](Node& n) {
    x->ensure_grad();
    for (size_t i = 0; i < w.size(); ++i) x->grad.v[i] += w[i] * n.grad.v[0];
  });
}

inline NodePtr mean_of(const std::vector<NodePtr>& xs) {
  return weighted_sum(xs,
                      std::vector<double>(xs.size(), 1.0 / double(xs.size())));
}

// Elementwise mean of same-shaped nodes, accumulated in value-sorted order.
// The result is bitwise invariant to permutations of the input list, which
// keeps class-symmetric reductions exactly equivariant.
inline NodePtr mean_sym(const std::vector<NodePtr>& xs) {
  if (xs.empty()) throw std::invalid_argument("ag::mean_sym: empty");
  const Shape s = xs[0]->value.shape;
  for (const auto& x : xs)
    if (!(x->value.shape == s))
      throw std::invalid_argument("ag::mean_sym: shape mismatch");
  const double inv = 1.0 / double(xs.size());
  Tensor out(s);
  std::vector<double> buf(xs.size());
  for (int i = 0; i < out.size(); ++i) {
    for (size_t k = 0; k < xs.size(); ++k) buf[k] = xs[k]->value.v[i];
    std::sort(buf.begin(), buf.end());
    double acc = 0.0;
    for (double v : buf) acc += v;
    out.v[i] = acc * inv;
  }
  std::vector<NodePtr> parents(xs.begin(), xs.end());
  return make_op(std::move(out), std::move(parents), [xs, inv](Node& n) {
    for (const auto& x : xs) {
      if (!x->requires_grad) continue;
      x->ensure_grad();
      for (int i = 0; i < n.value.size(); ++i)
        x->grad.v[i] += inv * n.grad.v[i];
    }
  });
}

// log(sum_k exp(x_k)) over scalar nodes, stabilised by the running max
inline NodePtr logsumexp(const std::vector<NodePtr>& xs) {
  double m = -1e300;
  for (const auto& x : xs) m = std::max(m, x->scalar());
  double s = 0.0;
  for (const auto& x : xs) s += std::exp(x->scalar() - m);
  Tensor out = Tensor::scalar(m + std::log(s));
  std::vector<NodePtr> parents(xs.begin(), xs.end());
  double lse = out.v[0];
  return make_op(std::move(out), std::move(parents), [xs, lse](Node& n) {
    for (const auto& x : xs) {
      if (!x->requires_grad) continue;
      x->ensure_grad();
      x->grad.v[0] += n.grad.v[0] * std::exp(x->scalar() - lse);
    }
  });
}

// ---------------------------------------------------------------------------
// shape ops

inline NodePtr concat_channels(const NodePtr& a, const NodePtr& b) {
  const Shape sa = a->value.shape, sb = b->value.shape;
  if (sa.h != sb.h || sa.w != sb.w)
    throw std::invalid_argument("ag::concat_channels: spatial mismatch");
  Tensor out(Shape{sa.h, sa.w, sa.c + sb.c});
  for (int y = 0; y < sa.h; ++y)
    for (int x = 0; x < sa.w; ++x) {
      for (int ch = 0; ch < sa.c; ++ch) out.at(y, x, ch) = a->value.at(y, x, ch);
      for (int ch = 0; ch < sb.c; ++ch)
        out.at(y, x, sa.c + ch) = b->value.at(y, x, ch);
    }
  return make_op(std::move(out), {a, b}, [a, b, sa, sb](Node& n) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    for (int y = 0; y < sa.h; ++y)
      for (int x = 0; x < sa.w; ++x) {
        if (a->requires_grad)
          for (int ch = 0; ch < sa.c; ++ch)
            a->grad.at(y, x, ch) += n.grad.at(y, x, ch);
        if (b->requires_grad)
          for (int ch = 0; ch < sb.c; ++ch)
            b->grad.at(y, x, ch) += n.grad.at(y, x, sa.c + ch);
      }
  });
}

// stack single-channel maps into an h x w x K tensor
inline NodePtr stack_maps(const std::vector<NodePtr>& maps) {
  if (maps.empty()) throw std::invalid_argument("ag::stack_maps: empty");
  const Shape s0 = maps[0]->value.shape;
  const int k = static_cast<int>(maps.size());
  Tensor out(Shape{s0.h, s0.w, k});
  for (int j = 0; j < k; ++j) {
    const Shape sj = maps[j]->value.shape;
    if (sj.h != s0.h || sj.w != s0.w || sj.c != 1)
      throw std::invalid_argument("ag::stack_maps: shape mismatch");
    for (int y = 0; y < s0.h; ++y)
      for (int x = 0; x < s0.w; ++x)
        out.at(y, x, j) = maps[j]->value.at(y, x, 0);
  }
  std::vector<NodePtr> parents(maps.begin(), maps.end());
  return make_op(std::move(out), std::move(parents), [maps, s0](Node& n) {
    for (size_t j = 0; j < maps.size(); ++j) {
      if (!maps[j]->requires_grad) continue;
      maps[j]->ensure_grad();
      for (int y = 0; y < s0.h; ++y)
        for (int x = 0; x < s0.w; ++x)
          maps[j]->grad.at(y, x, 0) += n.grad.at(y, x, static_cast<int>(j));
    }
  });
}

// broadcast an h x w x 1 map over the channels of an h x w x c tensor
inline NodePtr broadcast_mul(const NodePtr& map, const NodePtr& x) {
  const Shape sm = map->value.shape, sx = x->value.shape;
  if (sm.h != sx.h || sm.w != sx.w || sm.c != 1)
    throw std::invalid_argument("ag::broadcast_mul: shape mismatch");
  Tensor out(sx);
  for (int y = 0; y < sx.h; ++y)
    for (int x2 = 0; x2 < sx.w; ++x2) {
      const double m = map->value.at(y, x2, 0);
      for (int ch = 0; ch < sx.c; ++ch)
        out.at(y, x2, ch) = m * x->value.at(y, x2, ch);
    }
  return make_op(std::move(out), {map, x}, [map, x, sx](Node& n) {
    if (map->requires_grad) map->ensure_grad();
    if (x->requires_grad) x->ensure_grad();
    for (int y = 0; y < sx.h; ++y)
      for (int x2 = 0; x2 < sx.w; ++x2) {
        const double m = map->value.at(y, x2, 0);
        for (int ch = 0; ch < sx.c; ++ch) {
          const double g = n.grad.at(y, x2, ch);
          if (map->requires_grad)
            map->grad.at(y, x2, 0) += g * x->value.at(y, x2, ch);
          if (x->requires_grad) x->grad.at(y, x2, ch) += g * m;
        }
      }
  });
}

// w * x + b where w, b are scalar nodes and x an h x w x 1 map
inline NodePtr affine_map(const NodePtr& x, const NodePtr& w,
                          const NodePtr& b) {
  const double wv = w->scalar(), bv = b->scalar();
  Tensor out = x->value;
  for (auto& e : out.v) e = wv * e + bv;
  return make_op(std::move(out), {x, w, b}, [x, w, b, wv](Node& n) {
    if (x->requires_grad) x->ensure_grad();
    if (w->requires_grad) w->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    for (int i = 0; i < n.value.size(); ++i) {
      const double g = n.grad.v[i];
      if (x->requires_grad) x->grad.v[i] += g * wv;
      if (w->requires_grad) w->grad.v[0] += g * x->value.v[i];
      if (b->requires_grad) b->grad.v[0] += g;
    }
  });
}

// ---------------------------------------------------------------------------
// convolutions

// weights: Shape{kh, kw, cin*cout}, index (ky, kx, ci*cout + co); bias 1x1xcout
inline NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                      int kh, int kw, int cin, int cout, int stride) {
  const Shape sx = x->value.shape;
  if (sx.c != cin) throw std::invalid_argument("ag::conv2d: channel mismatch");
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;  // same padding
  const int oh = (sx.h + stride - 1) / stride, ow = (sx.w + stride - 1) / stride;
  Tensor out(Shape{oh, ow, cout});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      double* op = &out.at(oy, ox, 0);
      for (int co = 0; co < cout; ++co) op[co] = b->value.v[co];
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - ph;
        if (iy < 0 || iy >= sx.h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pw;
          if (ix < 0 || ix >= sx.w) continue;
          const double* ip = &x->value.at(iy, ix, 0);
          const double* wp = &w->value.at(ky, kx, 0);
          for (int ci = 0; ci < cin; ++ci) {
            const double xv = ip[ci];
            const double* wrow = wp + ci * cout;
            for (int co = 0; co < cout; ++co) op[co] += xv * wrow[co];
          }
        }
      }
    }
  return make_op(
      std::move(out), {x, w, b},
      [x, w, b, kh, kw, cin, cout, stride, ph, pw, sx, oh, ow](Node& n) {
        if (x->requires_grad) x->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double* gp = &n.grad.at(oy, ox, 0);
            if (b->requires_grad)
              for (int co = 0; co < cout; ++co) b->grad.v[co] += gp[co];
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride + ky - ph;
              if (iy < 0 || iy >= sx.h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride + kx - pw;
                if (ix < 0 || ix >= sx.w) continue;
                const double* ip = &x->value.at(iy, ix, 0);
                const double* wp = &w->value.at(ky, kx, 0);
                for (int ci = 0; ci < cin; ++ci) {
                  const double* wrow = wp + ci * cout;
                  double gx = 0.0;
                  for (int co = 0; co < cout; ++co) {
                    const double g = gp[co];
                    if (w->requires_grad)
                      w->grad.at(ky, kx, ci * cout + co) += g * ip[ci];
                    gx += g * wrow[co];
                  }
                  if (x->requires_grad) x->grad.at(iy, ix, ci) += gx;
                }
              }
            }
          }
      });
}

// depthwise 3x3 (stride 1, same padding); weights Shape{kh, kw, c}, bias 1x1xc
inline NodePtr depthwise_conv2d(const NodePtr& x, const NodePtr& w,
                                const NodePtr& b, int kh, int kw) {
  const Shape sx = x->value.shape;
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  Tensor out(sx);
  for (int oy = 0; oy < sx.h; ++oy)
    for (int ox = 0; ox < sx.w; ++ox)
      for (int ch = 0; ch < sx.c; ++ch) {
        double acc = b->value.v[ch];
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy + ky - ph;
          if (iy < 0 || iy >= sx.h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox + kx - pw;
            if (ix < 0 || ix >= sx.w) continue;
            acc += x->value.at(iy, ix, ch) * w->value.at(ky, kx, ch);
          }
        }
        out.at(oy, ox, ch) = acc;
      }
  return make_op(std::move(out), {x, w, b},
                 [x, w, b, kh, kw, ph, pw, sx](Node& n) {
                   if (x->requires_grad) x->ensure_grad();
                   if (w->requires_grad) w->ensure_grad();
                   if (b->requires_grad) b->ensure_grad();
                   for (int oy = 0; oy < sx.h; ++oy)
                     for (int ox = 0; ox < sx.w; ++ox)
                       for (int ch = 0; ch < sx.c; ++ch) {
                         const double g = n.grad.at(oy, ox, ch);
                         if (b->requires_grad) b->grad.v[ch] += g;
                         for (int ky = 0; ky < kh; ++ky) {
                           const int iy = oy + ky - ph;
                           if (iy < 0 || iy >= sx.h) continue;
                           for (int kx = 0; kx < kw; ++kx) {
                             const int ix = ox + kx - pw;
                             if (ix < 0 || ix >= sx.w) continue;
                             if (w->requires_grad)
                               w->grad.at(ky, kx, ch) +=
                                   g * x->value.at(iy, ix, ch);
                             if (x->requires_grad)
                               x->grad.at(iy, ix, ch) +=
                                   g * w->value.at(ky, kx, ch);
                           }
                         }
                       }
                 });
}

inline NodePtr avgpool2(const NodePtr& x) {
  const Shape sx = x->value.shape;
  if (sx.h % 2 || sx.w % 2)
    throw std::invalid_argument("ag::avgpool2: odd spatial size");
  Tensor out(Shape{sx.h / 2, sx.w / 2, sx.c});
  for (int y = 0; y < sx.h / 2; ++y)
    for (int x2 = 0; x2 < sx.w / 2; ++x2)
      for (int ch = 0; ch < sx.c; ++ch)
        out.at(y, x2, ch) = 0.25 * (x->value.at(2 * y, 2 * x2, ch) +
                                    x->value.at(2 * y, 2 * x2 + 1, ch) +
                                    x->value.at(2 * y + 1, 2 * x2, ch) +
                                    x->value.at(2 * y + 1, 2 * x2 + 1, ch));
  return make_op(std::move(out), {x}, [x, sx](Node& n) {
    x->ensure_grad();
    for (int y = 0; y < sx.h / 2; ++y)
      for (int x2 = 0; x2 < sx.w / 2; ++x2)
        for (int ch = 0; ch < sx.c; ++ch) {
          const double g = 0.25 * n.grad.at(y, x2, ch);
          x->grad.at(2 * y, 2 * x2, ch) += g;
          x->grad.at(2 * y, 2 * x2 + 1, ch) += g;
          x->grad.at(2 * y + 1, 2 * x2, ch) += g;
          x->grad.at(2 * y + 1, 2 * x2 + 1, ch) += g;
        }
  });
}

// ---------------------------------------------------------------------------
// pooling / similarity

// mean of the feature vectors at the given pixel indices -> 1x1xC
inline NodePtr masked_mean(const NodePtr& x, const std::vector<int>& pixels) {
  if (pixels.empty()) throw std::invalid_argument("ag::masked_mean: empty set");
  const Shape sx = x->value.shape;
  Tensor out(Shape{1, 1, sx.c});
  const double inv = 1.0 / static_cast<double>(pixels.size());
  for (int p : pixels)
    for (int ch = 0; ch < sx.c; ++ch)
      out.v[ch] += x->value.v[static_cast<size_t>(p) * sx.c + ch];
  for (int ch = 0; ch < sx.c; ++ch) out.v[ch] *= inv;
  auto pix = pixels;
  return make_op(std::move(out), {x}, [x, pix, inv, sx](Node& n) {
    x->ensure_grad();
    for (int p : pix)
      for (int ch = 0; ch < sx.c; ++ch)
        x->grad.v[static_cast<size_t>(p) * sx.c + ch] += inv * n.grad.v[ch];
  });
}

constexpr double kCosineEps = 1e-8;

namespace detail {
inline double norm_of(const double* v, int c) {
  double s = 0.0;
  for (int i = 0; i < c; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}
}  // namespace detail

// per-pixel cosine similarity between an h x w x C feature map and a 1x1xC
// prototype. The norm product is floored at kCosineEps, which keeps the
// value exactly invariant to positive rescaling of either input (for
// non-degenerate vectors) and makes zero vectors score 0.
inline NodePtr cosine_map(const NodePtr& x, const NodePtr& p) {
  const Shape sx = x->value.shape;
  if (p->value.shape.c != sx.c)
    throw std::invalid_argument("ag::cosine_map: dim mismatch");
  const int c = sx.c;
  const double pn = detail::norm_of(p->value.v.data(), c);
  Tensor out(Shape{sx.h, sx.w, 1});
  for (int i = 0; i < sx.h * sx.w; ++i) {
    const double* u = &x->value.v[static_cast<size_t>(i) * c];
    double dot = 0.0;
    for (int ch = 0; ch < c; ++ch) dot += u[ch] * p->value.v[ch];
    out.v[i] = dot / std::max(detail::norm_of(u, c) * pn, kCosineEps);
  }
  return make_op(std::move(out), {x, p}, [x, p, sx, c, pn](Node& n) {
    if (x->requires_grad) x->ensure_grad();
    if (p->requires_grad) p->ensure_grad();
    const double* pv = p->value.v.data();
    for (int i = 0; i < sx.h * sx.w; ++i) {
      const double g = n.grad.v[i];
      if (g == 0.0) continue;
      const double* u = &x->value.v[static_cast<size_t>(i) * c];
      const double un = detail::norm_of(u, c);
      const bool saturated = un * pn <= kCosineEps;
      const double denom = std::max(un * pn, kCosineEps);
      const double s = n.value.v[i];
      if (x->requires_grad) {
        double* gu = &x->grad.v[static_cast<size_t>(i) * c];
        const double su = saturated ? 0.0 : s / (un * un);
        for (int ch = 0; ch < c; ++ch)
          gu[ch] += g * (pv[ch] / denom - su * u[ch]);
      }
      if (p->requires_grad) {
        const double sp = saturated ? 0.0 : s / (pn * pn);
        for (int ch = 0; ch < c; ++ch)
          p->grad.v[ch] += g * (u[ch] / denom - sp * pv[ch]);
      }
    }
  });
}

// cosine similarity between two 1x1xC vectors -> scalar
inline NodePtr cosine_vec(const NodePtr& a, const NodePtr& b) {
  const int c = a->value.shape.c;
  if (b->value.shape.c != c)
    throw std::invalid_argument("ag::cosine_vec: dim mismatch");
  const double* u = a->value.v.data();
  const double* v = b->value.v.data();
  const double un = detail::norm_of(u, c), vn = detail::norm_of(v, c);
  const bool saturated = un * vn <= kCosineEps;
  const double denom = std::max(un * vn, kCosineEps);
  double dot = 0.0;
  for (int ch = 0; ch < c; ++ch) dot += u[ch] * v[ch];
  const double s = dot / denom;
  return make_op(Tensor::scalar(s), {a, b},
                 [a, b, c, un, vn, denom, s, saturated](Node& n) {
                   const double g = n.grad.v[0];
                   const double* u = a->value.v.data();
                   const double* v = b->value.v.data();
                   if (a->requires_grad) {
                     a->ensure_grad();
                     const double su = saturated ? 0.0 : s / (un * un);
                     for (int ch = 0; ch < c; ++ch)
                       a->grad.v[ch] += g * (v[ch] / denom - su * u[ch]);
                   }
                   if (b->requires_grad) {
                     b->ensure_grad();
                     const double sv = saturated ? 0.0 : s / (vn * vn);
                     for (int ch = 0; ch < c; ++ch)
                       b->grad.v[ch] += g * (u[ch] / denom - sv * v[ch]);
                   }
                 });
}

// ---------------------------------------------------------------------------
// losses

// Per-pixel softmax over channels (forward-only helper). The exponential
// sum is accumulated in sorted order so the normaliser — and therefore every
// probability — is bitwise invariant to channel permutations.
inline Tensor softmax_channels(const Tensor& logits) {
  Tensor out(logits.shape);
  const int k = logits.shape.c, n = logits.shape.h * logits.shape.w;
  std::vector<double> buf(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) {
    const double* l = &logits.v[static_cast<size_t>(i) * k];
    double* o = &out.v[static_cast<size_t>(i) * k];
    double m = l[0];
    for (int j = 1; j < k; ++j) m = std::max(m, l[j]);
    for (int j = 0; j < k; ++j) buf[j] = (o[j] = std::exp(l[j] - m));
    std::sort(buf.begin(), buf.end());
    double s = 0.0;
    for (double v : buf) s += v;
    for (int j = 0; j < k; ++j) o[j] /= s;
  }
  return out;
}

// mean per-pixel cross entropy; targets index the channel dimension
inline NodePtr softmax_cross_entropy(const NodePtr& logits,
                                     const std::vector<int>& targets) {
  const Shape s = logits->value.shape;
  const int npix = s.h * s.w, k = s.c;
  if (static_cast<int>(targets.size()) != npix)
    throw std::invalid_argument("ag::softmax_cross_entropy: target size");
  for (int t : targets)
    if (t < 0 || t >= k)
      throw std::invalid_argument("ag::softmax_cross_entropy: target out of range");
  Tensor probs = softmax_channels(logits->value);
  double loss = 0.0;
  for (int i = 0; i < npix; ++i)
    loss -= std::log(std::max(probs.v[static_cast<size_t>(i) * k + targets[i]],
                              1e-300));
  loss /= npix;
  auto probs_ptr = std::make_shared<Tensor>(std::move(probs));
  auto tg = targets;
  return make_op(Tensor::scalar(loss), {logits},
                 [logits, probs_ptr, tg, npix, k](Node& n) {
                   logits->ensure_grad();
                   const double g = n.grad.v[0] / npix;
                   for (int i = 0; i < npix; ++i) {
                     double* gl = &logits->grad.v[static_cast<size_t>(i) * k];
                     const double* p = &probs_ptr->v[static_cast<size_t>(i) * k];
                     for (int j = 0; j < k; ++j) gl[j] += g * p[j];
                     gl[tg[i]] -= g;
                   }
                 });
}

// ---------------------------------------------------------------------------
// backward

inline void backward(const NodePtr& root) {
  // iterative topological sort over requires_grad subgraph
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->ensure_grad();
  root->grad.v.assign(root->grad.v.size(), 0.0);
  root->grad.v[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace oshp::ag
