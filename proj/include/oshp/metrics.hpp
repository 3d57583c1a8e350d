#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "oshp/image.hpp"

// Segmentation metrics. Intersection/union counts are aggregated globally
// across all evaluated episodes before the per-class IoU division;
// Binary-IoU follows the per-episode-averaged convention.

namespace oshp {

struct ConfusionAccumulator {
  std::map<int, std::uint64_t> intersection;
  std::map<int, std::uint64_t> uni;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;

  void merge(const ConfusionAccumulator& o) {
    for (const auto& [c, n] : o.intersection) intersection[c] += n;
    for (const auto& [c, n] : o.uni) uni[c] += n;
    correct += o.correct;
    total += o.total;
  }

  double iou(int c) const {
    auto u = uni.find(c);
    if (u == uni.end() || u->second == 0) return 0.0;
    auto i = intersection.find(c);
    return (i == intersection.end() ? 0.0 : double(i->second)) / double(u->second);
  }
  // classes with an empty global union contribute no term to the mean
  bool observed(int c) const {
    auto it = uni.find(c);
    return it != uni.end() && it->second > 0;
  }

  // mean IoU (percent) over the observed subset of `classes`
  double miou(const std::set<int>& classes) const {
    double sum = 0.0;
    int n = 0;
    for (int c : classes)
      if (observed(c)) {
        sum += iou(c);
        ++n;
      }
    return n == 0 ? 0.0 : 100.0 * sum / n;
  }
  double accuracy() const {
    return total == 0 ? 0.0 : 100.0 * double(correct) / double(total);
  }
};

// accumulate I/U counts for the episode's class set plus pixel accuracy
inline void score_episode(const LabelImage& pred, const LabelImage& gt,
                          const std::vector<int>& class_set,
                          ConfusionAccumulator& acc) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::runtime_error("score_episode: shape mismatch");
  for (int c : class_set) {
    acc.intersection[c];  // mark class as evaluated even if counts stay 0
    acc.uni[c];
  }
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const int p = pred.v[i], g = gt.v[i];
    if (p == g) ++acc.correct;
    ++acc.total;
    for (int c : class_set) {
      const bool in_p = p == c, in_g = g == c;
      if (in_p && in_g) ++acc.intersection[c];
      if (in_p || in_g) ++acc.uni[c];
    }
  }
}

// mean of foreground and background IoU for binary masks, in percent
inline double binary_iou(const LabelImage& pred, const LabelImage& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::runtime_error("binary_iou: shape mismatch");
  std::uint64_t i_fg = 0, u_fg = 0, i_bg = 0, u_bg = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    if (p && g) ++i_fg;
    if (p || g) ++u_fg;
    if (!p && !g) ++i_bg;
    if (!p || !g) ++u_bg;
  }
  const double fg = u_fg ? double(i_fg) / u_fg : 1.0;
  const double bg = u_bg ? double(i_bg) / u_bg : 1.0;
  return 100.0 * 0.5 * (fg + bg);
}

struct EvalReport {
  std::string protocol;  // "k_way" or "one_way"
  double novel_miou = 0.0;
  double human_miou = 0.0;
  double overall_accuracy = 0.0;  // k-way
  double binary_miou = 0.0;       // 1-way
  int episodes = 0;
  std::map<int, double> per_class_iou;
};

}  // namespace oshp
