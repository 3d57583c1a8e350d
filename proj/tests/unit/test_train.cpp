#include <catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::scratch_dir;

namespace {

TrainConfig small_train_config() {
  TrainConfig c;
  c.max_epoch = 2;
  c.batch_size = 2;
  c.episodes_per_epoch = 4;
  c.warmup_epochs = 1;
  c.aug.resize_to = 32;
  c.enc_c1 = 4;
  c.enc_c2 = 6;
  c.enc_fuse = 8;
  c.proj_dim_cgs = 8;
  c.proj_dim_fgs = 8;
  c.rng_seed = 5;
  return c;
}

const DatasetManifest& dataset() {
  static const DatasetManifest m = [] {
    SyntheticConfig cfg;
    cfg.image_size = 32;
    cfg.n_train_support = 5;
    cfg.n_train_query = 5;
    cfg.n_test_support = 3;
    cfg.n_test_query = 3;
    cfg.out_dir = scratch_dir("train_ds");
    return generate_synthetic_dataset(cfg, 31);
  }();
  return m;
}

}  // namespace

TEST_CASE("poly learning rate starts at the initial rate and decays to zero",
          "[train]") {
  Trainer t(small_train_config(), dataset());
  CHECK(t.steps_per_epoch() == 2);
  CHECK(t.max_iterations() == 4);
  CHECK(t.learning_rate(0) == t.cfg.initial_lr);
  CHECK(t.learning_rate(t.max_iterations()) == 0.0);
  // strictly decreasing in between
  CHECK(t.learning_rate(1) < t.learning_rate(0));
  CHECK(t.learning_rate(3) < t.learning_rate(2));
  CHECK(t.learning_rate(2) ==
        Catch::Approx(t.cfg.initial_lr * std::pow(0.5, 0.9)).epsilon(1e-12));
}

TEST_CASE("training runs are bitwise deterministic per seed", "[train]") {
  Trainer a(small_train_config(), dataset());
  Trainer b(small_train_config(), dataset());
  a.run();
  b.run();
  CHECK(a.log == b.log);
  REQUIRE(a.model->params.items.size() == b.model->params.items.size());
  for (size_t i = 0; i < a.model->params.items.size(); ++i)
    CHECK(a.model->params.items[i].second->value.v ==
          b.model->params.items[i].second->value.v);
  CHECK(a.model->bank.entries.size() == b.model->bank.entries.size());

  TrainConfig other = small_train_config();
  other.rng_seed = 6;
  Trainer c(other, dataset());
  c.run();
  CHECK(a.log != c.log);
}

TEST_CASE("training moves the parameters and logs every step", "[train]") {
  const TrainConfig cfg = small_train_config();
  Trainer t(cfg, dataset());
  const EopNet reference(cfg.model_config(), cfg.rng_seed);
  t.run();
  CHECK(t.iteration == t.max_iterations());
  CHECK(t.log.size() == t.max_iterations());
  CHECK(t.epoch_mean_loss.size() == static_cast<size_t>(cfg.max_epoch));
  bool moved = false;
  for (size_t i = 0; i < t.model->params.items.size(); ++i)
    if (t.model->params.items[i].second->value.v !=
        reference.params.items[i].second->value.v)
      moved = true;
  CHECK(moved);
  for (double l : t.epoch_mean_loss) CHECK(std::isfinite(l));
}

TEST_CASE("checkpoints round-trip the model bit for bit", "[train]") {
  const std::string dir = scratch_dir("ckpt_rt");
  Trainer t(small_train_config(), dataset());
  t.run();

  const Checkpoint ck = t.checkpoint();
  save_checkpoint(ck, dir + "/m.bin");
  const Checkpoint back = load_checkpoint(dir + "/m.bin");

  CHECK(serialize_config(back.config) == serialize_config(t.cfg));
  CHECK(back.iteration == t.iteration);
  REQUIRE(back.model->params.items.size() == t.model->params.items.size());
  for (size_t i = 0; i < t.model->params.items.size(); ++i) {
    CHECK(back.model->params.items[i].first == t.model->params.items[i].first);
    CHECK(back.model->params.items[i].second->value.v ==
          t.model->params.items[i].second->value.v);
  }
  REQUIRE(back.model->bank.entries.size() == t.model->bank.entries.size());
  for (const auto& [key, vec] : t.model->bank.entries)
    CHECK(back.model->bank.entries.at(key).v == vec.v);

  CHECK_THROWS(load_checkpoint(dir + "/missing.bin"));
  {
    std::ofstream f(dir + "/junk.bin", std::ios::binary);
    f << "not a checkpoint at all";
  }
  CHECK_THROWS(load_checkpoint(dir + "/junk.bin"));
}

TEST_CASE("the smoothed loss is a sliding 5-epoch mean", "[train]") {
  const std::vector<double> losses{5, 4, 3, 2, 1, 0, 1};
  const auto sm = smoothed_loss(losses);
  REQUIRE(sm.size() == 3);
  CHECK(sm[0] == Catch::Approx(3.0));
  CHECK(sm[1] == Catch::Approx(2.0));
  CHECK(sm[2] == Catch::Approx(1.4));
  CHECK(smoothed_loss({1.0, 2.0}).empty());
}
