#pragma once

#include <cmath>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "oshp/checkpoint.hpp"
#include "oshp/episode.hpp"

// Episodic meta-training: SGD with the poly learning rate policy over the
// whole-run iteration count, per-epoch beta from the weight shifting
// schedule, batched episodes averaged before each step. Fully deterministic
// per (config, manifest, seed).

namespace oshp {

struct Trainer {
  TrainConfig cfg;
  DatasetManifest data;
  std::unique_ptr<EopNet> model;
  std::uint64_t iteration = 0;
  std::uint64_t episode_counter = 0;
  std::vector<std::string> log;
  std::vector<double> epoch_mean_loss;
  std::ostream* log_stream = nullptr;

  Trainer(const TrainConfig& c, DatasetManifest manifest)
      : cfg(c), data(std::move(manifest)) {
    cfg.validate();
    model = std::make_unique<EopNet>(cfg.model_config(), cfg.rng_seed);
  }

  int episodes_per_epoch() const {
    if (cfg.episodes_per_epoch > 0) return cfg.episodes_per_epoch;
    return static_cast<int>(data.indices_of(Split::meta_train_query).size());
  }
  int steps_per_epoch() const {
    return (episodes_per_epoch() + cfg.batch_size - 1) / cfg.batch_size;
  }
  std::uint64_t max_iterations() const {
    return static_cast<std::uint64_t>(cfg.max_epoch) * steps_per_epoch();
  }

  double learning_rate(std::uint64_t iter) const {
    const double frac = double(iter) / double(max_iterations());
    return cfg.initial_lr * std::pow(1.0 - frac, cfg.poly_power);
  }

  // decorrelated per-episode streams, independent of call interleaving
  std::uint64_t stream_seed(std::uint64_t idx, std::uint64_t salt) const {
    return cfg.rng_seed ^ (0x5851f42d4c957f2dULL * (idx + 1) + salt);
  }

  Episode draw_training_episode() {
    std::uint64_t idx = episode_counter++;
    if (cfg.fixed_episodes)
      idx %= static_cast<std::uint64_t>(episodes_per_epoch());
    Episode ep = sample_episode(data, stream_seed(idx, 0));
    Rng aug_rng(stream_seed(idx, 0xa5a5a5a5ULL));
    auto [si, sm] = augment(ep.support_image, ep.support_mask, cfg.aug, aug_rng);
    auto [qi, qm] = augment(ep.query_image, *ep.query_mask, cfg.aug, aug_rng);
    ep.support_image = std::move(si);
    ep.support_mask = std::move(sm);
    ep.query_image = std::move(qi);
    ep.query_mask = std::move(qm);
    // augmentation may crop classes away entirely
    ep.class_set = classes_in(ep.support_mask);
    ep.query_mask = restrict_to(*ep.query_mask, ep.class_set);
    return ep;
  }

  void run_epoch(int epoch) {
    const double beta = cfg.beta_for(epoch);
    const LossWeights w = cfg.weights();
    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (int step = 0; step < steps_per_epoch(); ++step) {
      model->params.zero_grads();
      std::vector<ag::NodePtr> totals;
      LossReport mean{};
      std::vector<std::pair<int, int>> batch_ids;
      for (int b = 0; b < cfg.batch_size; ++b) {
        Episode ep = draw_training_episode();
        auto losses = model->train_forward(ep, epoch, beta, w);
        if (!losses) continue;  // degenerate after augmentation, skip
        batch_ids.emplace_back(ep.support_index, ep.query_index);
        totals.push_back(losses->total);
        mean.agm_fgs += losses->report.agm_fgs;
        mean.npm_fgs += losses->report.npm_fgs;
        mean.dml_fgs += losses->report.dml_fgs;
        mean.agm_cgs += losses->report.agm_cgs;
        mean.nca += losses->report.nca;
        mean.total += losses->report.total;
      }
      const double lr = learning_rate(iteration);
      if (!totals.empty()) {
        const double inv = 1.0 / double(totals.size());
        mean.agm_fgs *= inv;
        mean.npm_fgs *= inv;
        mean.dml_fgs *= inv;
        mean.agm_cgs *= inv;
        mean.nca *= inv;
        mean.total *= inv;
        mean.beta = beta;
        if (!std::isfinite(mean.total)) {
          std::ostringstream os;
          os << "non-finite loss at epoch " << epoch << " step " << step
             << "; episodes:";
          for (auto [s, q] : batch_ids) os << " (" << s << "," << q << ")";
          throw std::runtime_error(os.str());
        }
        ag::backward(ag::mean_of(totals));
        for (auto& [name, p] : model->params.items)
          for (int i = 0; i < p->value.size(); ++i)
            p->value.v[i] -= lr * p->grad.v[i];
        epoch_loss += mean.total;
        ++epoch_count;
      }
      log_step(epoch, step, lr, mean);
      ++iteration;
    }
    epoch_mean_loss.push_back(epoch_count ? epoch_loss / epoch_count : 0.0);
  }

  void run() {
    for (int epoch = 0; epoch < cfg.max_epoch; ++epoch) run_epoch(epoch);
  }

  void log_step(int epoch, int step, double lr, const LossReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "iter=" << iteration << " epoch=" << epoch << " step=" << step
       << " lr=" << lr << " beta=" << r.beta << " agm_fgs=" << r.agm_fgs
       << " npm_fgs=" << r.npm_fgs << " dml_fgs=" << r.dml_fgs
       << " agm_cgs=" << r.agm_cgs << " nca=" << r.nca
       << " total=" << r.total;
    log.push_back(os.str());
    if (log_stream) (*log_stream) << log.back() << "\n";
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.config = cfg;
    ck.epoch = cfg.max_epoch;
    ck.iteration = iteration;
    ck.rng_state = cfg.rng_seed;
    ck.model = std::make_unique<EopNet>(cfg.model_config(), cfg.rng_seed);
    for (size_t i = 0; i < model->params.items.size(); ++i)
      ck.model->params.items[i].second->value = model->params.items[i].second->value;
    ck.model->bank = model->bank;
    return ck;
  }
};

// 5-epoch moving average of the per-epoch training loss
inline std::vector<double> smoothed_loss(const std::vector<double>& losses,
                                         int window = 5) {
  std::vector<double> out;
  for (size_t i = 0; i + window <= losses.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < window; ++j) s += losses[i + j];
    out.push_back(s / window);
  }
  return out;
}

}  // namespace oshp
