#include <catch_amalgamated.hpp>

#include <fstream>
#include <iterator>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::scratch_dir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

SyntheticConfig tiny_config(const std::string& dir) {
  SyntheticConfig cfg;
  cfg.image_size = 32;
  cfg.n_train_support = 3;
  cfg.n_train_query = 3;
  cfg.n_test_support = 2;
  cfg.n_test_query = 2;
  cfg.out_dir = dir;
  return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic per seed", "[synthetic]") {
  const std::string d1 = scratch_dir("syn_a");
  const std::string d2 = scratch_dir("syn_b");
  generate_synthetic_dataset(tiny_config(d1), 5);
  generate_synthetic_dataset(tiny_config(d2), 5);
  CHECK(slurp(d1 + "/trs_0.ppm") == slurp(d2 + "/trs_0.ppm"));
  CHECK(slurp(d1 + "/teq_1.pgm") == slurp(d2 + "/teq_1.pgm"));

  const std::string d3 = scratch_dir("syn_c");
  generate_synthetic_dataset(tiny_config(d3), 6);
  CHECK(slurp(d1 + "/trs_0.ppm") != slurp(d3 + "/trs_0.ppm"));
}

TEST_CASE("generated masks stay within the declared class ids", "[synthetic]") {
  const std::string dir = scratch_dir("syn_ids");
  const DatasetManifest m = generate_synthetic_dataset(tiny_config(dir), 11);
  m.validate();
  CHECK(m.entries.size() == 10);
  const int k = static_cast<int>(m.class_names.size());
  bool saw_fg = false;
  for (int i = 0; i < static_cast<int>(m.entries.size()); ++i) {
    const LabelImage mask = read_pgm(m.mask_path(i));
    for (auto v : mask.v) {
      CHECK(v < k);
      if (v != 0) saw_fg = true;
    }
    // every figure must at least have the core body parts
    const auto ids = classes_in(mask);
    for (int core : {1, 2, 3, 4})
      CHECK(std::count(ids.begin(), ids.end(), core) == 1);
  }
  CHECK(saw_fg);
}

TEST_CASE("the default fold marks the garment classes as novel", "[synthetic]") {
  const FoldSpec fold = default_synthetic_fold();
  fold.validate();
  CHECK(fold.base_classes == std::set<int>{1, 2, 3, 4});
  CHECK(fold.novel_classes == std::set<int>{5, 6});
  CHECK(fold.human_classes() == std::set<int>{0, 1, 2, 3, 4, 5, 6});
  // identity merge map over all declared ids
  for (int c = 0; c <= 6; ++c) CHECK(fold.merge_map.at(c) == c);
}

TEST_CASE("config validation rejects degenerate datasets", "[synthetic]") {
  SyntheticConfig cfg = tiny_config(scratch_dir("syn_bad"));
  cfg.image_size = 8;
  CHECK_THROWS(cfg.validate());
  cfg = tiny_config(scratch_dir("syn_bad2"));
  cfg.class_names = {"background", "a", "b"};
  CHECK_THROWS(cfg.validate());
}
