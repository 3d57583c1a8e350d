#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "oshp/autodiff.hpp"
#include "oshp/image.hpp"

// Training objectives: AGM/NPM cross entropies, the beta-weighted DML
// combination, the prototype-level NCA contrastive loss and the total.

namespace oshp {

struct LossWeights {
  double lambda_nca = 1.0;
  double lambda_agm_cgs = 1.0;
  double lambda_dml_fgs = 1.0;
  double tau = 0.1;

  void validate() const {
    if (tau <= 0.0) throw std::runtime_error("loss weights: tau must be > 0");
    if (lambda_nca < 0 || lambda_agm_cgs < 0 || lambda_dml_fgs < 0)
      throw std::runtime_error("loss weights: lambdas must be nonnegative");
  }
};

struct LossReport {
  double agm_fgs = 0.0;
  double npm_fgs = 0.0;
  double dml_fgs = 0.0;
  double agm_cgs = 0.0;
  double nca = 0.0;
  double total = 0.0;
  double beta = 0.0;
};

// mean per-pixel NLL of the target class; `class_set` maps mask label ids to
// logit channels (channel 0 = background = class_set[0])
inline ag::NodePtr cross_entropy(const ag::NodePtr& logits,
                                 const LabelImage& target,
                                 const std::vector<int>& class_set) {
  const Shape s = logits->value.shape;
  if (target.h != s.h || target.w != s.w)
    throw std::runtime_error("cross_entropy: target size mismatch");
  std::vector<int> channels(target.v.size());
  for (size_t i = 0; i < target.v.size(); ++i) {
    auto it = std::find(class_set.begin(), class_set.end(), int(target.v[i]));
    if (it == class_set.end())
      throw std::runtime_error("cross_entropy: target label " +
                               std::to_string(target.v[i]) +
                               " outside the episode class set");
    channels[i] = static_cast<int>(it - class_set.begin());
  }
  return ag::softmax_cross_entropy(logits, channels);
}

inline ag::NodePtr dml_loss(const ag::NodePtr& agm_loss,
                            const ag::NodePtr& npm_loss, double beta) {
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("dml_loss: beta outside [0,1]");
  return ag::weighted_sum({agm_loss, npm_loss}, {beta, 1.0 - beta});
}

// prototype-level NCA loss over aligned foreground prototype lists; <.,.>
// is cosine similarity
inline ag::NodePtr nca_contrastive(
    const std::vector<ag::NodePtr>& query_protos,
    const std::vector<ag::NodePtr>& support_protos, double tau) {
  if (query_protos.empty() || query_protos.size() != support_protos.size())
    throw std::invalid_argument("nca_contrastive: misaligned prototype lists");
  if (tau <= 0.0) throw std::invalid_argument("nca_contrastive: tau <= 0");
  const int k = static_cast<int>(query_protos.size());
  std::vector<ag::NodePtr> terms;
  for (int c = 0; c < k; ++c) {
    std::vector<ag::NodePtr> sims;
    for (int j = 0; j < k; ++j)
      sims.push_back(
          ag::scale(ag::cosine_vec(query_protos[c], support_protos[j]), 1.0 / tau));
    // -log softmax_c == logsumexp - own similarity
    terms.push_back(ag::weighted_sum({ag::logsumexp(sims), sims[c]}, {1.0, -1.0}));
  }
  return ag::mean_of(terms);
}

inline ag::NodePtr total_objective(const ag::NodePtr& nca,
                                   const ag::NodePtr& agm_cgs,
                                   const ag::NodePtr& dml_fgs,
                                   const LossWeights& w) {
  w.validate();
  return ag::weighted_sum({nca, agm_cgs, dml_fgs},
                          {w.lambda_nca, w.lambda_agm_cgs, w.lambda_dml_fgs});
}

}  // namespace oshp
