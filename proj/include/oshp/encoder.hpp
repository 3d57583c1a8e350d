#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "oshp/autodiff.hpp"

// Siamese embedding network g(.;theta): a small strided convolutional stack
// with one low-level skip concatenation, plus the two per-pixel linear
// projection heads feeding the coarse- and fine-grained metric spaces.
// Output stride is fixed at 4 by the architecture.

namespace oshp {

enum class MetricSpace { cgs, fgs };

struct EncoderConfig {
  int input_h = 64;
  int input_w = 64;
  int c1 = 8;          // entry conv width (low-level skip source)
  int c2 = 16;         // second conv width
  int fuse = 24;       // fused feature width after the skip concat
  int proj_dim_cgs = 64;
  int proj_dim_fgs = 64;
  static constexpr int stride = 4;

  void validate() const {
    if (proj_dim_cgs < 2 || proj_dim_fgs < 2)
      throw std::runtime_error("encoder: projection dim must be >= 2");
    if (input_h % stride || input_w % stride)
      throw std::runtime_error("encoder: input size not divisible by stride");
  }
  int feat_h() const { return input_h / stride; }
  int feat_w() const { return input_w / stride; }
};

// named long-lived parameter leaves, in registration order
struct ParamStore {
  std::vector<std::pair<std::string, ag::NodePtr>> items;

  ag::NodePtr add(const std::string& name, Tensor init) {
    items.emplace_back(name, ag::param(std::move(init)));
    return items.back().second;
  }
  void zero_grads() {
    for (auto& [name, p] : items) p->zero_grad();
  }
  int count() const {
    int n = 0;
    for (const auto& [name, p] : items) n += p->value.size();
    return n;
  }
};

namespace detail {
inline Tensor he_init(Shape s, int fan_in, Rng& rng) {
  Tensor t(s);
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : t.v) v = rng.range(-bound, bound);
  return t;
}

// small random bias: keeps the projected feature vectors away from the zero
// vector (where cosine similarity degenerates) even on dead relu regions
inline Tensor bias_init(int dim, Rng& rng) {
  Tensor t{Shape{1, 1, dim}};
  for (auto& v : t.v) v = rng.range(-0.05, 0.05);
  return t;
}
}  // namespace detail

struct Embedding {
  EncoderConfig cfg;
  ag::NodePtr w1, b1, w2, b2, wf, bf;        // conv stack
  ag::NodePtr wp_cgs, bp_cgs, wp_fgs, bp_fgs;  // 1x1 projection heads

  Embedding() = default;
  Embedding(const EncoderConfig& c, ParamStore& params, Rng& rng) : cfg(c) {
    cfg.validate();
    w1 = params.add("enc.w1", detail::he_init({3, 3, 3 * c.c1}, 27, rng));
    b1 = params.add("enc.b1", Tensor{Shape{1, 1, c.c1}});
    w2 = params.add("enc.w2",
                    detail::he_init({3, 3, c.c1 * c.c2}, 9 * c.c1, rng));
    b2 = params.add("enc.b2", Tensor{Shape{1, 1, c.c2}});
    const int skip_in = c.c1 + c.c2;
    wf = params.add("enc.wf",
                    detail::he_init({1, 1, skip_in * c.fuse}, skip_in, rng));
    bf = params.add("enc.bf", Tensor{Shape{1, 1, c.fuse}});
    wp_cgs = params.add(
        "proj.cgs.w", detail::he_init({1, 1, c.fuse * c.proj_dim_cgs}, c.fuse, rng));
    bp_cgs = params.add("proj.cgs.b", detail::bias_init(c.proj_dim_cgs, rng));
    wp_fgs = params.add(
        "proj.fgs.w", detail::he_init({1, 1, c.fuse * c.proj_dim_fgs}, c.fuse, rng));
    bp_fgs = params.add("proj.fgs.b", detail::bias_init(c.proj_dim_fgs, rng));
  }

  // one forward pass per image; both projections read this output
  ag::NodePtr encode(const Tensor& image) const {
    if (image.shape.h != cfg.input_h || image.shape.w != cfg.input_w ||
        image.shape.c != 3)
      throw std::runtime_error("encode: image shape does not match config");
    auto x = ag::constant(image);
    auto low = ag::relu(ag::conv2d(x, w1, b1, 3, 3, 3, cfg.c1, 2));
    auto high = ag::relu(ag::conv2d(low, w2, b2, 3, 3, cfg.c1, cfg.c2, 2));
    auto skip = ag::avgpool2(low);  // low-level features at output stride
    auto cat = ag::concat_channels(skip, high);
    return ag::relu(
        ag::conv2d(cat, wf, bf, 1, 1, cfg.c1 + cfg.c2, cfg.fuse, 1));
  }

  ag::NodePtr project(const ag::NodePtr& features, MetricSpace space) const {
    switch (space) {
      case MetricSpace::cgs:
        return ag::conv2d(features, wp_cgs, bp_cgs, 1, 1, cfg.fuse,
                          cfg.proj_dim_cgs, 1);
      case MetricSpace::fgs:
        return ag::conv2d(features, wp_fgs, bp_fgs, 1, 1, cfg.fuse,
                          cfg.proj_dim_fgs, 1);
    }
    throw std::runtime_error("project: unknown metric space");
  }
};

}  // namespace oshp
