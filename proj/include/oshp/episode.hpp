#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "oshp/manifest.hpp"
#include "oshp/tailor.hpp"

// Episode sampling for meta-training and the coverage-driven meta-test pair
// list. All sampling is a pure function of (manifest, seed).

namespace oshp {

enum class Way { k_way, one_way };

struct Episode {
  Tensor support_image;   // H x W x 3 in [0,1]
  LabelImage support_mask;
  Tensor query_image;
  std::optional<LabelImage> query_mask;
  std::vector<int> class_set;  // C_s, class_set[0] == 0 (background)
  int support_index = -1;
  int query_index = -1;
};

// per-class pixel index sets at a given mask resolution
struct MaskIndexSet {
  std::map<int, std::vector<int>> pixels;  // class id -> flat pixel indices

  static MaskIndexSet from(const LabelImage& mask) {
    MaskIndexSet s;
    for (int i = 0; i < static_cast<int>(mask.v.size()); ++i)
      s.pixels[mask.v[i]].push_back(i);
    return s;
  }
  int count(int c) const {
    auto it = pixels.find(c);
    return it == pixels.end() ? 0 : static_cast<int>(it->second.size());
  }
};

inline std::vector<int> classes_in(const LabelImage& mask) {
  std::set<int> ids;
  for (auto v : mask.v) ids.insert(v);
  std::vector<int> out{0};
  for (int c : ids)
    if (c != 0) out.push_back(c);
  return out;
}

// keep only labels in class_set, everything else becomes background
inline LabelImage restrict_to(const LabelImage& mask,
                              const std::vector<int>& class_set) {
  std::set<int> keep(class_set.begin(), class_set.end());
  LabelImage out = mask;
  for (auto& v : out.v)
    if (!keep.count(v)) v = 0;
  return out;
}

inline LabelImage binarize_to_class(const LabelImage& mask, int target) {
  LabelImage out(mask.h, mask.w);
  for (size_t i = 0; i < mask.v.size(); ++i)
    out.v[i] = mask.v[i] == target ? static_cast<std::uint8_t>(target) : 0;
  return out;
}

// Assemble an episode from explicit support/query entry indices. Query
// labels outside C_s are treated as background.
inline Episode make_episode(const DatasetManifest& m, int support_idx,
                            int query_idx, Way way, int target_class,
                            bool load_query_mask) {
  Episode ep;
  ep.support_index = support_idx;
  ep.query_index = query_idx;
  ep.support_image = read_ppm(m.image_path(support_idx));
  ep.support_mask = read_pgm(m.mask_path(support_idx));
  ep.query_image = read_ppm(m.image_path(query_idx));
  if (way == Way::one_way) {
    ep.support_mask = binarize_to_class(ep.support_mask, target_class);
    if (MaskIndexSet::from(ep.support_mask).count(target_class) == 0)
      throw std::runtime_error("episode: support lacks target class " +
                               std::to_string(target_class));
    ep.class_set = {0, target_class};
  } else {
    ep.class_set = classes_in(ep.support_mask);
  }
  if (ep.class_set.size() < 2)
    throw std::runtime_error("episode: support mask has no foreground class");
  if (load_query_mask) {
    LabelImage qm = read_pgm(m.mask_path(query_idx));
    ep.query_mask = restrict_to(qm, ep.class_set);
  }
  return ep;
}

// Randomly sampled meta-training episode; deterministic per seed. Support
// and query are drawn from their respective splits and never the same image.
inline Episode sample_episode(const DatasetManifest& m, std::uint64_t seed,
                              Way way = Way::k_way, int target_class = -1) {
  Rng rng(seed);
  const auto sup = m.indices_of(Split::meta_train_support);
  const auto qry = m.indices_of(Split::meta_train_query);
  if (sup.empty() || qry.empty())
    throw std::runtime_error("sample_episode: empty meta-train split");
  for (int attempt = 0; attempt < 256; ++attempt) {
    const int si = sup[rng.below(static_cast<int>(sup.size()))];
    int qi = qry[rng.below(static_cast<int>(qry.size()))];
    if (m.entries[si].image_ref == m.entries[qi].image_ref) continue;
    if (way == Way::one_way) {
      const LabelImage sm = read_pgm(m.mask_path(si));
      if (MaskIndexSet::from(sm).count(target_class) == 0) continue;
    }
    return make_episode(m, si, qi, way, target_class, true);
  }
  throw std::runtime_error(
      way == Way::one_way
          ? "sample_episode: no support image contains class " +
                std::to_string(target_class)
          : "sample_episode: could not draw a valid pair");
}

struct TestPair {
  int support_index;
  int query_index;
  std::vector<int> class_set;
};

// Greedy coverage sampler: every class of C_human ends up in at least
// min_evals_per_class support class sets. Reproducible from the seed.
inline std::vector<TestPair> build_meta_test_list(const DatasetManifest& m,
                                                  const FoldSpec& fold,
                                                  int min_evals_per_class,
                                                  std::uint64_t seed) {
  const auto sup = m.indices_of(Split::meta_test_support);
  const auto qry = m.indices_of(Split::meta_test_query);
  if (min_evals_per_class > 0 && (sup.empty() || qry.empty()))
    throw std::runtime_error("meta-test list: empty meta-test split");

  std::vector<std::vector<int>> sup_classes;
  sup_classes.reserve(sup.size());
  for (int si : sup) sup_classes.push_back(classes_in(read_pgm(m.mask_path(si))));

  std::map<int, int> counts;
  for (int c : fold.human_classes()) counts[c] = 0;

  Rng rng(seed);
  std::vector<TestPair> list;
  while (true) {
    // most deficient class first
    int need = -1, deficit = 0;
    for (const auto& [c, n] : counts)
      if (min_evals_per_class - n > deficit) {
        deficit = min_evals_per_class - n;
        need = c;
      }
    if (need < 0) break;

    std::vector<int> candidates;
    for (int i = 0; i < static_cast<int>(sup.size()); ++i)
      if (std::count(sup_classes[i].begin(), sup_classes[i].end(), need))
        candidates.push_back(i);
    if (candidates.empty()) {
      const std::string name =
          need < static_cast<int>(m.class_names.size())
              ? " (" + m.class_names[need] + ")"
              : "";
      throw std::runtime_error("meta-test list: class " + std::to_string(need) +
                               name + " absent from all test support masks");
    }
    const int pick = candidates[rng.below(static_cast<int>(candidates.size()))];
    int qi = qry[rng.below(static_cast<int>(qry.size()))];
    for (int a = 0; a < 64 && m.entries[sup[pick]].image_ref ==
                                  m.entries[qi].image_ref; ++a)
      qi = qry[rng.below(static_cast<int>(qry.size()))];
    list.push_back({sup[pick], qi, sup_classes[pick]});
    for (int c : sup_classes[pick]) ++counts[c];
  }
  return list;
}

inline void save_test_list(const std::vector<TestPair>& list,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "oshp-testlist v1\n";
  for (const auto& p : list) {
    f << "pair: " << p.support_index << " " << p.query_index << " classes";
    for (int c : p.class_set) f << " " << c;
    f << "\n";
  }
}

inline std::vector<TestPair> load_test_list(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(f, line);
  if (line != "oshp-testlist v1")
    throw std::runtime_error(path + ": not an oshp test list");
  std::vector<TestPair> list;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag, kw;
    TestPair p;
    ss >> tag >> p.support_index >> p.query_index >> kw;
    int c;
    while (ss >> c) p.class_set.push_back(c);
    list.push_back(p);
  }
  return list;
}

}  // namespace oshp
