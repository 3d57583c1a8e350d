#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "oshp/oshp.hpp"

namespace test_helpers {

inline oshp::Tensor random_tensor(oshp::Shape s, oshp::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  oshp::Tensor t(s);
  for (auto& v : t.v) v = rng.range(lo, hi);
  return t;
}

inline oshp::LabelImage random_mask(int h, int w, int n_classes,
                                    oshp::Rng& rng) {
  oshp::LabelImage m(h, w);
  for (auto& v : m.v) v = static_cast<std::uint8_t>(rng.below(n_classes));
  return m;
}

// Central-difference check of d(scalar expr)/d(leaves). `build` must
// reconstruct the expression from the current leaf values on every call.
// Returns the worst relative error over all leaf entries.
inline double gradient_check(
    std::vector<oshp::ag::NodePtr> leaves,
    const std::function<oshp::ag::NodePtr()>& build, double h = 1e-6) {
  using namespace oshp;
  for (auto& l : leaves) l->zero_grad();
  auto root = build();
  ag::backward(root);

  double worst = 0.0;
  for (auto& l : leaves) {
    for (int i = 0; i < l->value.size(); ++i) {
      const double x0 = l->value.v[i];
      const double step = h * std::max(1.0, std::abs(x0));
      l->value.v[i] = x0 + step;
      const double fp = build()->scalar();
      l->value.v[i] = x0 - step;
      const double fm = build()->scalar();
      l->value.v[i] = x0;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = l->grad.v[i];
      const double err =
          std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// fresh per-test scratch directory under the build tree
inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "oshp_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace test_helpers
