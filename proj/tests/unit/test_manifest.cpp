#include <catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::scratch_dir;

namespace {

DatasetManifest sample_manifest() {
  DatasetManifest m;
  m.class_names = {"background", "head", "torso"};
  m.entries = {
      {"a.ppm", "a.pgm", Split::meta_train_support},
      {"b.ppm", "b.pgm", Split::meta_train_query},
      {"c.ppm", "c.pgm", Split::meta_test_support},
      {"d.ppm", "d.pgm", Split::meta_test_query},
  };
  return m;
}

}  // namespace

TEST_CASE("manifest round-trips through its text format", "[manifest]") {
  const std::string dir = scratch_dir("manifest_rt");
  const DatasetManifest m = sample_manifest();
  save_manifest(m, dir + "/m.txt");
  const DatasetManifest back = load_manifest(dir + "/m.txt");
  CHECK(back.class_names == m.class_names);
  REQUIRE(back.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].image_ref == m.entries[i].image_ref);
    CHECK(back.entries[i].mask_ref == m.entries[i].mask_ref);
    CHECK(back.entries[i].split == m.entries[i].split);
  }
  CHECK(back.root == dir);
  CHECK(back.image_path(0) == dir + "/a.ppm");
}

TEST_CASE("manifest validation enforces the label conventions", "[manifest]") {
  DatasetManifest m = sample_manifest();
  m.class_names[0] = "bg";
  CHECK_THROWS_WITH(m.validate(),
                    Catch::Matchers::ContainsSubstring("background"));

  DatasetManifest dup = sample_manifest();
  dup.entries.push_back(dup.entries[0]);
  CHECK_THROWS_WITH(dup.validate(),
                    Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("indices_of partitions entries by split", "[manifest]") {
  const DatasetManifest m = sample_manifest();
  CHECK(m.indices_of(Split::meta_train_support) == std::vector<int>{0});
  CHECK(m.indices_of(Split::meta_test_query) == std::vector<int>{3});
}

TEST_CASE("fold specs round-trip and validate membership rules", "[manifest]") {
  const std::string dir = scratch_dir("fold_rt");
  FoldSpec fold;
  fold.merge_map = {{0, 0}, {1, 1}, {2, 1}, {3, 2}};
  fold.base_classes = {1};
  fold.novel_classes = {2};
  save_fold(fold, dir + "/f.txt");
  const FoldSpec back = load_fold(dir + "/f.txt");
  CHECK(back.merge_map == fold.merge_map);
  CHECK(back.base_classes == fold.base_classes);
  CHECK(back.novel_classes == fold.novel_classes);
  CHECK(back.human_classes() == std::set<int>{0, 1, 2});

  FoldSpec bad = fold;
  bad.novel_classes.insert(1);
  CHECK_THROWS(bad.validate());
  FoldSpec bg = fold;
  bg.novel_classes.insert(0);
  CHECK_THROWS(bg.validate());
}

TEST_CASE("loaders reject unknown file contents", "[manifest]") {
  const std::string dir = scratch_dir("manifest_bad");
  {
    std::ofstream f(dir + "/x.txt");
    f << "something else\n";
  }
  CHECK_THROWS(load_manifest(dir + "/x.txt"));
  CHECK_THROWS(load_fold(dir + "/x.txt"));
}
