#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oshp/image.hpp"

namespace oshp {

enum class Split {
  meta_train_support,
  meta_train_query,
  meta_test_support,
  meta_test_query,
};

inline const char* to_string(Split s) {
  switch (s) {
    case Split::meta_train_support: return "meta_train_support";
    case Split::meta_train_query: return "meta_train_query";
    case Split::meta_test_support: return "meta_test_support";
    case Split::meta_test_query: return "meta_test_query";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "meta_train_support") return Split::meta_train_support;
  if (s == "meta_train_query") return Split::meta_train_query;
  if (s == "meta_test_support") return Split::meta_test_support;
  if (s == "meta_test_query") return Split::meta_test_query;
  throw std::runtime_error("unknown split: " + s);
}

struct ManifestEntry {
  std::string image_ref;
  std::string mask_ref;
  Split split;
};

// Declarative dataset description: label id 0 is always "background",
// mask label values index class_names.
struct DatasetManifest {
  std::vector<std::string> class_names;  // [0] == "background"
  std::vector<ManifestEntry> entries;
  std::string root;  // directory refs are relative to

  std::vector<int> indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(entries.size()); ++i)
      if (entries[i].split == s) out.push_back(i);
    return out;
  }

  std::string image_path(int i) const {
    return (std::filesystem::path(root) / entries[i].image_ref).string();
  }
  std::string mask_path(int i) const {
    return (std::filesystem::path(root) / entries[i].mask_ref).string();
  }

  void validate() const {
    if (class_names.empty() || class_names[0] != "background")
      throw std::runtime_error("manifest: class id 0 must be 'background'");
    std::set<std::string> seen;
    for (const auto& e : entries)
      if (!seen.insert(e.image_ref + "|" + to_string(e.split)).second)
        throw std::runtime_error("manifest: duplicate entry " + e.image_ref);
  }
};

// Class merging and base/novel fold membership. merge_map values are
// canonical label ids (a subset of the raw ids).
struct FoldSpec {
  std::map<int, int> merge_map;
  std::set<int> base_classes;
  std::set<int> novel_classes;

  void validate() const {
    for (int c : base_classes)
      if (c == 0 || novel_classes.count(c))
        throw std::runtime_error("fold: base/novel sets must be disjoint and "
                                 "exclude background");
    if (novel_classes.count(0))
      throw std::runtime_error("fold: background cannot be novel");
  }

  std::set<int> human_classes() const {
    std::set<int> all{0};
    all.insert(base_classes.begin(), base_classes.end());
    all.insert(novel_classes.begin(), novel_classes.end());
    return all;
  }
};

// --- serialization: line-oriented text, one record per entry ---------------

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "oshp-manifest v1\n";
  f << "classes:";
  for (const auto& n : m.class_names) f << " " << n;
  f << "\n";
  for (const auto& e : m.entries)
    f << "entry: " << to_string(e.split) << " " << e.image_ref << " "
      << e.mask_ref << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  DatasetManifest m;
  m.root = std::filesystem::path(path).parent_path().string();
  std::string line;
  std::getline(f, line);
  if (line != "oshp-manifest v1")
    throw std::runtime_error(path + ": not an oshp manifest");
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "classes:") {
      std::string name;
      while (ss >> name) m.class_names.push_back(name);
    } else if (tag == "entry:") {
      std::string split, img, msk;
      ss >> split >> img >> msk;
      m.entries.push_back({img, msk, split_from_string(split)});
    } else {
      throw std::runtime_error(path + ": unknown record '" + tag + "'");
    }
  }
  m.validate();
  return m;
}

inline void save_fold(const FoldSpec& fold, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "oshp-fold v1\n";
  for (const auto& [from, to] : fold.merge_map)
    f << "merge: " << from << " " << to << "\n";
  f << "base:";
  for (int c : fold.base_classes) f << " " << c;
  f << "\nnovel:";
  for (int c : fold.novel_classes) f << " " << c;
  f << "\n";
}

inline FoldSpec load_fold(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  FoldSpec fold;
  std::string line;
  std::getline(f, line);
  if (line != "oshp-fold v1")
    throw std::runtime_error(path + ": not an oshp fold spec");
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "merge:") {
      int from, to;
      ss >> from >> to;
      fold.merge_map[from] = to;
    } else if (tag == "base:") {
      int c;
      while (ss >> c) fold.base_classes.insert(c);
    } else if (tag == "novel:") {
      int c;
      while (ss >> c) fold.novel_classes.insert(c);
    } else {
      throw std::runtime_error(path + ": unknown record '" + tag + "'");
    }
  }
  fold.validate();
  return fold;
}

}  // namespace oshp
