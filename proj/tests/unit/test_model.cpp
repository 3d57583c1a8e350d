#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "helpers.hpp"

using namespace oshp;
using test_helpers::scratch_dir;

namespace {

ModelConfig small_model_config() {
  ModelConfig mc;
  mc.enc = EncoderConfig{32, 32, 4, 6, 8, 8, 8};
  mc.warmup_epochs = 2;
  mc.alpha = 0.5;
  return mc;
}

const DatasetManifest& dataset() {
  static const DatasetManifest m = [] {
    SyntheticConfig cfg;
    cfg.image_size = 32;
    cfg.n_train_support = 4;
    cfg.n_train_query = 4;
    cfg.n_test_support = 3;
    cfg.n_test_query = 3;
    cfg.out_dir = scratch_dir("model_ds");
    return generate_synthetic_dataset(cfg, 21);
  }();
  return m;
}

}  // namespace

TEST_CASE("embedding produces stride-4 features in both metric spaces",
          "[model]") {
  EopNet net(small_model_config(), 7);
  Rng rng(3);
  const Tensor image = test_helpers::random_tensor({32, 32, 3}, rng, 0.0, 1.0);
  auto g = net.emb.encode(image);
  CHECK(g->value.shape == Shape{8, 8, 8});
  CHECK(net.emb.project(g, MetricSpace::cgs)->value.shape == Shape{8, 8, 8});
  CHECK(net.emb.project(g, MetricSpace::fgs)->value.shape == Shape{8, 8, 8});

  Tensor wrong(Shape{16, 16, 3});
  CHECK_THROWS(net.emb.encode(wrong));
}

TEST_CASE("same seed builds identical parameters", "[model]") {
  EopNet a(small_model_config(), 42);
  EopNet b(small_model_config(), 42);
  EopNet c(small_model_config(), 43);
  REQUIRE(a.params.items.size() == b.params.items.size());
  bool all_equal = true, any_diff_c = false;
  for (size_t i = 0; i < a.params.items.size(); ++i) {
    if (a.params.items[i].second->value.v != b.params.items[i].second->value.v)
      all_equal = false;
    if (a.params.items[i].second->value.v != c.params.items[i].second->value.v)
      any_diff_c = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("the training pass yields finite losses and fills the bank",
          "[model]") {
  EopNet net(small_model_config(), 11);
  const Episode ep = sample_episode(dataset(), 4);
  LossWeights w;

  auto out = net.train_forward(ep, /*epoch=*/0, /*beta=*/0.75, w);
  REQUIRE(out.has_value());
  const LossReport& r = out->report;
  for (double v : {r.agm_fgs, r.npm_fgs, r.dml_fgs, r.agm_cgs, r.nca, r.total})
    CHECK(std::isfinite(v));
  CHECK(r.dml_fgs ==
        Catch::Approx(0.75 * r.agm_fgs + 0.25 * r.npm_fgs).epsilon(1e-12));
  CHECK(r.total ==
        Catch::Approx(r.nca + r.agm_cgs + r.dml_fgs).epsilon(1e-12));

  // every effective class now has a momentum entry in both spaces
  CHECK(net.bank.has(MetricSpace::cgs, 0));
  CHECK(net.bank.has(MetricSpace::cgs, 1));
  const LabelImage sup_down =
      downsample_labels(ep.support_mask, EncoderConfig::stride);
  for (int c : EopNet::effective_classes(ep, sup_down))
    CHECK(net.bank.has(MetricSpace::fgs, c));

  // gradients flow to the parameters
  net.params.zero_grads();
  ag::backward(out->total);
  double gnorm = 0.0;
  for (const auto& [name, p] : net.params.items)
    for (double g : p->grad.v) gnorm += g * g;
  CHECK(gnorm > 0.0);
}

TEST_CASE("episodes that lose all foreground at feature resolution are skipped",
          "[model]") {
  EopNet net(small_model_config(), 13);
  Episode ep = sample_episode(dataset(), 4);
  // one foreground pixel off the nearest-neighbour sampling grid
  ep.support_mask = LabelImage(32, 32);
  ep.support_mask.at(0, 0) = 5;
  ep.class_set = {0, 5};
  LossWeights w;
  CHECK(!net.train_forward(ep, 0, 0.5, w).has_value());
}

TEST_CASE("k-way prediction labels come from the episode class set", "[model]") {
  EopNet net(small_model_config(), 17);
  const auto& m = dataset();
  const auto test_sup = m.indices_of(Split::meta_test_support);
  const auto test_qry = m.indices_of(Split::meta_test_query);
  Episode ep = make_episode(m, test_sup[0], test_qry[0], Way::k_way, -1, true);

  // untrained model at meta-test: no base classes in the bank, pool all
  const LabelImage pred =
      net.predict_kway(ep, Phase::meta_test, /*base_classes=*/{});
  CHECK(pred.h == 32);
  CHECK(pred.w == 32);
  const std::set<int> allowed(ep.class_set.begin(), ep.class_set.end());
  for (auto v : pred.v) CHECK(allowed.count(v) == 1);

  // asking for bank-backed base classes before training is an error
  CHECK_THROWS(net.predict_kway(ep, Phase::meta_test, {1}));

  const LabelImage bi = net.predict_cgs_binary(ep, Phase::meta_test);
  for (auto v : bi.v) CHECK((v == 0 || v == 1));
}

TEST_CASE("agm and npm inference heads disagree on an untrained model",
          "[model]") {
  EopNet net(small_model_config(), 19);
  const auto& m = dataset();
  const auto test_sup = m.indices_of(Split::meta_test_support);
  const auto test_qry = m.indices_of(Split::meta_test_query);
  Episode ep = make_episode(m, test_sup[1], test_qry[1], Way::k_way, -1, true);
  const LabelImage a =
      net.predict_kway(ep, Phase::meta_test, {}, InferenceHead::npm);
  const LabelImage b =
      net.predict_kway(ep, Phase::meta_test, {}, InferenceHead::agm);
  CHECK(!(a == b));  // different heads, different decision surfaces
}
