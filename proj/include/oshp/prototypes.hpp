#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "oshp/autodiff.hpp"
#include "oshp/encoder.hpp"
#include "oshp/episode.hpp"

// Static prototypes via masked average pooling and the persistent
// momentum-updated prototype bank. Bank entries are exponential moving
// averages of detached static prototypes; gradients only flow through the
// static pooling path.

namespace oshp {

enum class PrototypeKind { static_proto, momentum_proto };

struct Prototype {
  Tensor vector;  // 1x1xD
  int class_id = 0;
  MetricSpace space = MetricSpace::fgs;
  PrototypeKind kind = PrototypeKind::static_proto;
};

// pooled class mean as a graph node; mask must already be at feature
// resolution
inline ag::NodePtr masked_average_pool(const ag::NodePtr& features,
                                       const LabelImage& mask, int class_id) {
  const Shape s = features->value.shape;
  if (mask.h != s.h || mask.w != s.w)
    throw std::runtime_error("masked_average_pool: mask/feature size mismatch");
  std::vector<int> pixels;
  for (int i = 0; i < static_cast<int>(mask.v.size()); ++i)
    if (mask.v[i] == class_id) pixels.push_back(i);
  if (pixels.empty())
    throw std::runtime_error("masked_average_pool: empty class " +
                             std::to_string(class_id));
  return ag::masked_mean(features, pixels);
}

inline Prototype masked_average_pool(const Tensor& features,
                                     const LabelImage& mask, int class_id,
                                     MetricSpace space) {
  auto node = masked_average_pool(ag::constant(features), mask, class_id);
  return Prototype{node->value, class_id, space, PrototypeKind::static_proto};
}

// query-side static prototypes p~_c for the contrastive loss; classes whose
// query region is empty are skipped by the caller
inline ag::NodePtr query_prototype(const ag::NodePtr& query_features,
                                   const LabelImage& query_mask, int class_id) {
  return masked_average_pool(query_features, query_mask, class_id);
}

struct PrototypeBank {
  double alpha = 0.001;
  int warmup_epochs = 3;
  // (space, class_id) -> EMA vector
  std::map<std::pair<int, int>, Tensor> entries;

  static std::pair<int, int> key(MetricSpace space, int class_id) {
    return {static_cast<int>(space), class_id};
  }
  bool has(MetricSpace space, int class_id) const {
    return entries.count(key(space, class_id)) != 0;
  }
  const Tensor& get(MetricSpace space, int class_id) const {
    auto it = entries.find(key(space, class_id));
    if (it == entries.end())
      throw std::runtime_error("prototype bank: uninitialized class " +
                               std::to_string(class_id));
    return it->second;
  }

  // EMA step; returns which prototype downstream ops consume this episode
  PrototypeKind momentum_update(MetricSpace space, int class_id,
                                const Tensor& static_proto, int epoch) {
    if (alpha < 0.0 || alpha >= 1.0)
      throw std::runtime_error("prototype bank: alpha must be in [0,1)");
    auto k = key(space, class_id);
    auto it = entries.find(k);
    if (it == entries.end()) {
      entries[k] = static_proto;  // first observation initializes
    } else {
      Tensor& e = it->second;
      for (int i = 0; i < e.size(); ++i)
        e.v[i] = (1.0 - alpha) * e.v[i] + alpha * static_proto.v[i];
    }
    return epoch < warmup_epochs ? PrototypeKind::static_proto
                                 : PrototypeKind::momentum_proto;
  }
};

// Prototype choice per class, aligned with `class_ids`:
// meta-train uses momentum prototypes after warmup (detached constants),
// meta-test uses the bank for base classes and this support's static
// prototypes for novel classes.
inline std::vector<ag::NodePtr> select_prototypes(
    const PrototypeBank& bank, MetricSpace space,
    const std::vector<int>& class_ids,
    const std::vector<ag::NodePtr>& static_protos, int epoch, Phase phase,
    const std::set<int>& base_classes) {
  std::vector<ag::NodePtr> out;
  out.reserve(class_ids.size());
  for (size_t i = 0; i < class_ids.size(); ++i) {
    const int c = class_ids[i];
    if (phase == Phase::meta_train) {
      if (epoch < bank.warmup_epochs || !bank.has(space, c))
        out.push_back(static_protos[i]);
      else
        out.push_back(ag::constant(bank.get(space, c)));
    } else {
      if (base_classes.count(c) != 0) {
        out.push_back(ag::constant(bank.get(space, c)));  // throws if missing
      } else if (space == MetricSpace::cgs && bank.has(space, c)) {
        out.push_back(ag::constant(bank.get(space, c)));
      } else {
        out.push_back(static_protos[i]);  // novel: pooled from this support
      }
    }
  }
  return out;
}

}  // namespace oshp
