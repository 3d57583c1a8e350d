#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "oshp/manifest.hpp"

// Dataset tailoring: rewrite raw masks through the fold's merge map and,
// for the meta-training phase, relabel novel-class pixels as background.

namespace oshp {

enum class Phase { meta_train, meta_test };

// Pure per-mask remap. Unknown raw ids are an error; `context` names the
// offending file in diagnostics.
inline LabelImage remap_mask(const LabelImage& mask, const FoldSpec& fold,
                             Phase phase, const std::string& context = "") {
  LabelImage out(mask.h, mask.w);
  for (size_t i = 0; i < mask.v.size(); ++i) {
    const int raw = mask.v[i];
    auto it = fold.merge_map.find(raw);
    if (it == fold.merge_map.end())
      throw std::runtime_error("remap: unknown raw label id " +
                               std::to_string(raw) +
                               (context.empty() ? "" : " in " + context));
    int id = it->second;
    if (phase == Phase::meta_train && fold.novel_classes.count(id)) id = 0;
    out.v[i] = static_cast<std::uint8_t>(id);
  }
  return out;
}

inline LabelImage derive_binary_mask(const LabelImage& mask) {
  LabelImage out(mask.h, mask.w);
  for (size_t i = 0; i < mask.v.size(); ++i) out.v[i] = mask.v[i] != 0 ? 1 : 0;
  return out;
}

// Rewrites every mask of `manifest` through the fold and emits the tailored
// copies (and a new manifest) under out_dir. Images are referenced in place.
inline DatasetManifest tailor_dataset(const DatasetManifest& manifest,
                                      const FoldSpec& fold, Phase phase,
                                      const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  DatasetManifest out;
  out.class_names = manifest.class_names;
  out.root = out_dir;
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    const auto& e = manifest.entries[i];
    const LabelImage mask = read_pgm(manifest.mask_path(i));
    const LabelImage remapped = remap_mask(mask, fold, phase, e.mask_ref);
    const std::string mask_name =
        fs::path(e.mask_ref).filename().string();
    write_pgm((fs::path(out_dir) / mask_name).string(), remapped);
    const fs::path img_abs = fs::absolute(manifest.image_path(i));
    out.entries.push_back({img_abs.string(), mask_name, e.split});
  }
  return out;
}

}  // namespace oshp
