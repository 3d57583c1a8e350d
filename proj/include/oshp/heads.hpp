#pragma once

#include <stdexcept>
#include <vector>

#include "oshp/encoder.hpp"
#include "oshp/prototypes.hpp"

// Dual metric learning heads. AGM refines similarity-attended residual
// features with class-shared separable convolutions; NPM predicts directly
// from the similarity maps with per-pixel scalar affine maps. The weight
// shifting schedule moves the training focus from AGM to NPM.

namespace oshp {

inline ag::NodePtr similarity_map(const ag::NodePtr& query_features,
                                  const ag::NodePtr& prototype) {
  return ag::cosine_map(query_features, prototype);
}

// phi(.): two depthwise-separable 3x3 conv layers plus a 1x1 scalar-logit
// layer, applied identically to every class's residual features
struct SeparableStack {
  int dim = 0;
  ag::NodePtr dw1, dwb1, pw1, pwb1;
  ag::NodePtr dw2, dwb2, pw2, pwb2;
  ag::NodePtr wlog, blog;

  SeparableStack() = default;
  SeparableStack(const std::string& name, int d, ParamStore& params, Rng& rng)
      : dim(d) {
    dw1 = params.add(name + ".dw1", detail::he_init({3, 3, d}, 9, rng));
    dwb1 = params.add(name + ".dwb1", Tensor{Shape{1, 1, d}});
    pw1 = params.add(name + ".pw1", detail::he_init({1, 1, d * d}, d, rng));
    pwb1 = params.add(name + ".pwb1", Tensor{Shape{1, 1, d}});
    dw2 = params.add(name + ".dw2", detail::he_init({3, 3, d}, 9, rng));
    dwb2 = params.add(name + ".dwb2", Tensor{Shape{1, 1, d}});
    pw2 = params.add(name + ".pw2", detail::he_init({1, 1, d * d}, d, rng));
    pwb2 = params.add(name + ".pwb2", Tensor{Shape{1, 1, d}});
    wlog = params.add(name + ".wlog", detail::he_init({1, 1, d}, d, rng));
    blog = params.add(name + ".blog", Tensor{Shape{1, 1, 1}});
  }

  // h x w x D -> h x w x 1 logits
  ag::NodePtr operator()(const ag::NodePtr& x) const {
    auto a = ag::relu(ag::conv2d(ag::depthwise_conv2d(x, dw1, dwb1, 3, 3), pw1,
                                 pwb1, 1, 1, dim, dim, 1));
    auto b = ag::relu(ag::conv2d(ag::depthwise_conv2d(a, dw2, dwb2, 3, 3), pw2,
                                 pwb2, 1, 1, dim, dim, 1));
    return ag::conv2d(b, wlog, blog, 1, 1, dim, 1, 1);
  }
};

struct AGMHead {
  SeparableStack phi;     // foreground scores, class-shared
  SeparableStack phi_bg;  // "not this class" scores feeding the background

  AGMHead() = default;
  AGMHead(const std::string& name, int dim, ParamStore& params, Rng& rng)
      : phi(name + ".phi", dim, params, rng),
        phi_bg(name + ".phi_bg", dim, params, rng) {}
};

// per-pixel scalar affine maps on similarity values, shared across classes
struct NPMHead {
  ag::NodePtr w, b, w_bg, b_bg;

  NPMHead() = default;
  NPMHead(const std::string& name, ParamStore& params) {
    w = params.add(name + ".w", Tensor::scalar(1.0));
    b = params.add(name + ".b", Tensor{Shape{1, 1, 1}});
    w_bg = params.add(name + ".w_bg", Tensor::scalar(1.0));
    b_bg = params.add(name + ".b_bg", Tensor{Shape{1, 1, 1}});
  }
};

// attended residual features R_c = A_c (x) F + F
inline ag::NodePtr residual_attend(const ag::NodePtr& similarity,
                                   const ag::NodePtr& features) {
  return ag::add(ag::broadcast_mul(similarity, features), features);
}

// AGM logits, channel 0 = background (mean of phi_bg over foreground
// residuals), channels 1..K = foreground classes in prototype order
inline ag::NodePtr agm_logits_from_sims(
    const ag::NodePtr& query_features,
    const std::vector<ag::NodePtr>& similarity_maps, const AGMHead& head) {
  if (similarity_maps.empty())
    throw std::runtime_error("agm_forward: need >= 1 foreground prototype");
  std::vector<ag::NodePtr> fg_scores, bg_scores;
  for (const auto& a : similarity_maps) {
    auto r = residual_attend(a, query_features);
    fg_scores.push_back(head.phi(r));
    bg_scores.push_back(head.phi_bg(r));
  }
  std::vector<ag::NodePtr> maps{ag::mean_sym(bg_scores)};
  maps.insert(maps.end(), fg_scores.begin(), fg_scores.end());
  return ag::stack_maps(maps);
}

inline ag::NodePtr agm_logits(const ag::NodePtr& query_features,
                              const std::vector<ag::NodePtr>& fg_prototypes,
                              const AGMHead& head) {
  std::vector<ag::NodePtr> sims;
  for (const auto& p : fg_prototypes)
    sims.push_back(similarity_map(query_features, p));
  return agm_logits_from_sims(query_features, sims, head);
}

inline Tensor agm_forward(const ag::NodePtr& query_features,
                          const std::vector<ag::NodePtr>& fg_prototypes,
                          const AGMHead& head) {
  return ag::softmax_channels(
      agm_logits(query_features, fg_prototypes, head)->value);
}

// NPM: A_0 is the mean foreground dissimilarity, logits are scalar affine
// maps of the similarity values
inline ag::NodePtr npm_logits(const std::vector<ag::NodePtr>& similarity_maps,
                              const NPMHead& head) {
  if (similarity_maps.empty())
    throw std::runtime_error("npm_forward: need >= 1 similarity map");
  std::vector<ag::NodePtr> dissim;
  for (const auto& a : similarity_maps)
    dissim.push_back(ag::affine_const(a, -1.0, 1.0));
  auto a0 = ag::mean_sym(dissim);
  std::vector<ag::NodePtr> maps{ag::affine_map(a0, head.w_bg, head.b_bg)};
  for (const auto& a : similarity_maps)
    maps.push_back(ag::affine_map(a, head.w, head.b));
  return ag::stack_maps(maps);
}

inline Tensor npm_forward(const std::vector<ag::NodePtr>& similarity_maps,
                          const NPMHead& head) {
  return ag::softmax_channels(npm_logits(similarity_maps, head)->value);
}

// Coarse-grained head: both cgs prototypes produce residual features; the
// foreground logit reads phi(R_1) and the background logit phi_bg(R_0).
// With eq6_background set, the background logit instead reads phi_bg(R_1),
// mirroring the fine-grained background construction.
inline ag::NodePtr cgs_logits(const ag::NodePtr& query_cgs_features,
                              const ag::NodePtr& proto_bg,
                              const ag::NodePtr& proto_fg, const AGMHead& head,
                              bool eq6_background = false) {
  auto r_fg = residual_attend(similarity_map(query_cgs_features, proto_fg),
                              query_cgs_features);
  auto l_fg = head.phi(r_fg);
  ag::NodePtr l_bg;
  if (eq6_background) {
    l_bg = head.phi_bg(r_fg);
  } else {
    auto r_bg = residual_attend(similarity_map(query_cgs_features, proto_bg),
                                query_cgs_features);
    l_bg = head.phi_bg(r_bg);
  }
  return ag::stack_maps({l_bg, l_fg});
}

inline Tensor cgs_forward(const ag::NodePtr& query_cgs_features,
                          const ag::NodePtr& proto_bg,
                          const ag::NodePtr& proto_fg, const AGMHead& head,
                          bool eq6_background = false) {
  return ag::softmax_channels(
      cgs_logits(query_cgs_features, proto_bg, proto_fg, head, eq6_background)
          ->value);
}

// weight shifting schedule: beta = 1 - epoch/max_epoch
inline double beta_schedule(int epoch, int max_epoch) {
  if (max_epoch <= 0 || epoch < 0 || epoch > max_epoch)
    throw std::invalid_argument("beta_schedule: epoch out of range");
  return 1.0 - static_cast<double>(epoch) / max_epoch;
}

}  // namespace oshp
