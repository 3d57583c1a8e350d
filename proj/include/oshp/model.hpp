#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oshp/heads.hpp"
#include "oshp/losses.hpp"
#include "oshp/prototypes.hpp"

// The full network: shared embedding, cgs AGM head, fgs AGM+NPM heads and
// the prototype bank, plus the per-episode training and inference passes.

namespace oshp {

enum class InferenceHead { npm, agm };

struct ModelConfig {
  EncoderConfig enc;
  bool cgs_eq6_background = false;
  double alpha = 0.001;
  int warmup_epochs = 3;
};

struct EpisodeLosses {
  ag::NodePtr total;
  LossReport report;
};

struct EopNet {
  ModelConfig cfg;
  ParamStore params;
  Embedding emb;
  AGMHead agm_cgs, agm_fgs;
  NPMHead npm_fgs;
  PrototypeBank bank;

  EopNet(const ModelConfig& c, std::uint64_t init_seed) : cfg(c) {
    Rng rng(init_seed);
    emb = Embedding(c.enc, params, rng);
    agm_cgs = AGMHead("agm_cgs", c.enc.proj_dim_cgs, params, rng);
    agm_fgs = AGMHead("agm_fgs", c.enc.proj_dim_fgs, params, rng);
    npm_fgs = NPMHead("npm_fgs", params);
    bank.alpha = c.alpha;
    bank.warmup_epochs = c.warmup_epochs;
  }

  int agm_param_count() const {
    int n = 0;
    for (const auto& [name, p] : params.items)
      if (name.rfind("agm_", 0) == 0) n += p->value.size();
    return n;
  }
  static constexpr int npm_param_count() { return 4; }

  // foreground classes of the episode that survive downsampling to feature
  // resolution
  static std::vector<int> effective_classes(const Episode& ep,
                                            const LabelImage& support_down) {
    const auto idx = MaskIndexSet::from(support_down);
    std::vector<int> out;
    for (size_t i = 1; i < ep.class_set.size(); ++i)
      if (idx.count(ep.class_set[i]) > 0) out.push_back(ep.class_set[i]);
    return out;
  }

  // Full training pass for one episode. Encodes both images once, pools the
  // static prototypes, advances the momentum bank (detached), and assembles
  // Eq.-13-style total loss. Returns nothing when the episode degenerates
  // (no foreground left at feature resolution).
  std::optional<EpisodeLosses> train_forward(const Episode& ep, int epoch,
                                             double beta, const LossWeights& w,
                                             bool update_bank = true) {
    if (!ep.query_mask)
      throw std::runtime_error("train_forward: episode lacks a query mask");
    const int stride = EncoderConfig::stride;
    const LabelImage sup_down = downsample_labels(ep.support_mask, stride);
    const LabelImage qry_down = downsample_labels(*ep.query_mask, stride);
    const std::vector<int> fg = effective_classes(ep, sup_down);
    if (fg.empty()) return std::nullopt;

    auto g_s = emb.encode(ep.support_image);
    auto g_q = emb.encode(ep.query_image);
    auto cgs_s = emb.project(g_s, MetricSpace::cgs);
    auto cgs_q = emb.project(g_q, MetricSpace::cgs);
    auto fgs_s = emb.project(g_s, MetricSpace::fgs);
    auto fgs_q = emb.project(g_q, MetricSpace::fgs);

    const LabelImage sup_bi = derive_binary_mask(sup_down);
    const LabelImage qry_bi = derive_binary_mask(qry_down);
    const auto sup_bi_idx = MaskIndexSet::from(sup_bi);

    // --- coarse-grained space: AGM on the binary foreground -------------
    ag::NodePtr l_agm_cgs = ag::constant(0.0);
    if (sup_bi_idx.count(0) > 0 && sup_bi_idx.count(1) > 0) {
      auto p0 = masked_average_pool(cgs_s, sup_bi, 0);
      auto p1 = masked_average_pool(cgs_s, sup_bi, 1);
      PrototypeKind kind = PrototypeKind::static_proto;
      if (update_bank) {
        kind = bank.momentum_update(MetricSpace::cgs, 0, p0->value, epoch);
        bank.momentum_update(MetricSpace::cgs, 1, p1->value, epoch);
      }
      auto use0 = kind == PrototypeKind::momentum_proto
                      ? ag::constant(bank.get(MetricSpace::cgs, 0))
                      : p0;
      auto use1 = kind == PrototypeKind::momentum_proto
                      ? ag::constant(bank.get(MetricSpace::cgs, 1))
                      : p1;
      auto logits = cgs_logits(cgs_q, use0, use1, agm_cgs,
                               cfg.cgs_eq6_background);
      l_agm_cgs = cross_entropy(logits, qry_bi, {0, 1});
    }

    // --- fine-grained space: DML over AGM and NPM ------------------------
    std::vector<ag::NodePtr> static_protos;
    for (int c : fg) static_protos.push_back(masked_average_pool(fgs_s, sup_down, c));
    std::vector<ag::NodePtr> used;
    PrototypeKind kind = PrototypeKind::static_proto;
    for (size_t i = 0; i < fg.size(); ++i) {
      if (update_bank)
        kind = bank.momentum_update(MetricSpace::fgs, fg[i],
                                    static_protos[i]->value, epoch);
      used.push_back(kind == PrototypeKind::momentum_proto
                         ? ag::constant(bank.get(MetricSpace::fgs, fg[i]))
                         : static_protos[i]);
    }

    std::vector<ag::NodePtr> sims;
    for (const auto& p : used) sims.push_back(similarity_map(fgs_q, p));

    std::vector<int> class_set{0};
    class_set.insert(class_set.end(), fg.begin(), fg.end());
    const LabelImage qry_target = restrict_to(qry_down, class_set);

    auto l_agm_fgs = cross_entropy(agm_logits_from_sims(fgs_q, sims, agm_fgs),
                                   qry_target, class_set);
    auto l_npm_fgs =
        cross_entropy(npm_logits(sims, npm_fgs), qry_target, class_set);
    auto l_dml = dml_loss(l_agm_fgs, l_npm_fgs, beta);

    // --- prototype-level contrastive loss --------------------------------
    const auto qry_idx = MaskIndexSet::from(qry_down);
    std::vector<ag::NodePtr> q_protos, s_protos;
    for (size_t i = 0; i < fg.size(); ++i)
      if (qry_idx.count(fg[i]) > 0) {
        q_protos.push_back(query_prototype(fgs_q, qry_down, fg[i]));
        s_protos.push_back(static_protos[i]);
      }
    ag::NodePtr l_nca = q_protos.empty()
                            ? ag::constant(0.0)
                            : nca_contrastive(q_protos, s_protos, w.tau);

    auto total = total_objective(l_nca, l_agm_cgs, l_dml, w);

    EpisodeLosses out;
    out.total = total;
    out.report = {l_agm_fgs->scalar(), l_npm_fgs->scalar(), l_dml->scalar(),
                  l_agm_cgs->scalar(), l_nca->scalar(),   total->scalar(),
                  beta};
    return out;
  }

  // Inference: fine-grained prediction at image resolution. Prototype choice
  // follows the phase (meta-test reads the bank for base classes and pools
  // the support for novel ones).
  LabelImage predict_kway(const Episode& ep, Phase phase,
                          const std::set<int>& base_classes,
                          InferenceHead head = InferenceHead::npm,
                          int epoch = 1 << 20) {
    const int stride = EncoderConfig::stride;
    const LabelImage sup_down = downsample_labels(ep.support_mask, stride);
    const std::vector<int> fg = effective_classes(ep, sup_down);
    if (fg.empty())
      return LabelImage(ep.query_image.shape.h, ep.query_image.shape.w);

    auto g_s = emb.encode(ep.support_image);
    auto g_q = emb.encode(ep.query_image);
    auto fgs_s = emb.project(g_s, MetricSpace::fgs);
    auto fgs_q = emb.project(g_q, MetricSpace::fgs);

    std::vector<ag::NodePtr> static_protos;
    for (int c : fg) static_protos.push_back(masked_average_pool(fgs_s, sup_down, c));
    auto used = select_prototypes(bank, MetricSpace::fgs, fg, static_protos,
                                  epoch, phase, base_classes);

    std::vector<ag::NodePtr> sims;
    for (const auto& p : used) sims.push_back(similarity_map(fgs_q, p));

    Tensor probs = head == InferenceHead::npm
                       ? npm_forward(sims, npm_fgs)
                       : ag::softmax_channels(
                             agm_logits_from_sims(fgs_q, sims, agm_fgs)->value);

    std::vector<int> ids{0};
    ids.insert(ids.end(), fg.begin(), fg.end());
    return upsample_argmax(probs, ep.query_image.shape.h,
                           ep.query_image.shape.w, ids);
  }

  // binary human-foreground prediction from the coarse-grained AGM head
  LabelImage predict_cgs_binary(const Episode& ep, Phase phase,
                                int epoch = 1 << 20) {
    const int stride = EncoderConfig::stride;
    const LabelImage sup_bi =
        derive_binary_mask(downsample_labels(ep.support_mask, stride));
    const auto idx = MaskIndexSet::from(sup_bi);
    if (idx.count(0) == 0 || idx.count(1) == 0)
      return LabelImage(ep.query_image.shape.h, ep.query_image.shape.w);

    auto g_s = emb.encode(ep.support_image);
    auto g_q = emb.encode(ep.query_image);
    auto cgs_s = emb.project(g_s, MetricSpace::cgs);
    auto cgs_q = emb.project(g_q, MetricSpace::cgs);

    auto p0 = masked_average_pool(cgs_s, sup_bi, 0);
    auto p1 = masked_average_pool(cgs_s, sup_bi, 1);
    auto used = select_prototypes(bank, MetricSpace::cgs, {0, 1}, {p0, p1},
                                  epoch, phase, {});
    Tensor probs = cgs_forward(cgs_q, used[0], used[1], agm_cgs,
                               cfg.cgs_eq6_background);
    return upsample_argmax(probs, ep.query_image.shape.h,
                           ep.query_image.shape.w, {0, 1});
  }
};

}  // namespace oshp
