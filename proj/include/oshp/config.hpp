#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "oshp/augment.hpp"
#include "oshp/model.hpp"

// Training configuration. Files are flat `key = value` text with `#`
// comments; every key can also be overridden from the command line.

namespace oshp {

enum class BetaPolicy { schedule, constant };

struct TrainConfig {
  int max_epoch = 50;
  int batch_size = 2;
  double initial_lr = 0.001;
  double poly_power = 0.9;
  double alpha = 0.001;
  double tau = 0.1;
  int warmup_epochs = 3;
  double lambda_nca = 1.0;
  double lambda_agm_cgs = 1.0;
  double lambda_dml_fgs = 1.0;
  std::uint64_t rng_seed = 1;
  int episodes_per_epoch = 0;  // 0: one per meta-train query image
  // true: every epoch is one pass over the same fixed episode set (sampled
  // once per run seed), so per-epoch losses are directly comparable;
  // false: a fresh episode stream is drawn continuously
  bool fixed_episodes = false;

  AugmentConfig aug;
  int enc_c1 = 8;
  int enc_c2 = 16;
  int enc_fuse = 24;
  int proj_dim_cgs = 64;
  int proj_dim_fgs = 64;
  bool cgs_eq6_background = false;

  BetaPolicy beta_policy = BetaPolicy::schedule;
  double beta_constant = 0.5;

  void validate() const {
    if (max_epoch <= 0 || batch_size <= 0 || initial_lr <= 0 ||
        poly_power <= 0 || tau <= 0 || warmup_epochs < 0)
      throw std::runtime_error("train config: values must be positive");
    if (alpha < 0 || alpha >= 1)
      throw std::runtime_error("train config: alpha must be in [0,1)");
  }

  LossWeights weights() const {
    return {lambda_nca, lambda_agm_cgs, lambda_dml_fgs, tau};
  }
  ModelConfig model_config() const {
    ModelConfig mc;
    mc.enc = EncoderConfig{aug.resize_to, aug.resize_to, enc_c1,
                           enc_c2,        enc_fuse,      proj_dim_cgs,
                           proj_dim_fgs};
    mc.cgs_eq6_background = cgs_eq6_background;
    mc.alpha = alpha;
    mc.warmup_epochs = warmup_epochs;
    return mc;
  }

  double beta_for(int epoch) const {
    return beta_policy == BetaPolicy::schedule
               ? 1.0 - double(epoch) / max_epoch
               : beta_constant;
  }
};

namespace detail {
inline std::map<std::string, std::string> parse_kv(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}
}  // namespace detail

inline void apply_config_key(TrainConfig& c, const std::string& key,
                             const std::string& val) {
  auto as_int = [&] { return std::stoi(val); };
  auto as_f = [&] { return std::stod(val); };
  auto as_bool = [&] { return val == "true" || val == "1"; };
  if (key == "max_epoch") c.max_epoch = as_int();
  else if (key == "batch_size") c.batch_size = as_int();
  else if (key == "initial_lr") c.initial_lr = as_f();
  else if (key == "poly_power") c.poly_power = as_f();
  else if (key == "alpha") c.alpha = as_f();
  else if (key == "tau") c.tau = as_f();
  else if (key == "warmup_epochs") c.warmup_epochs = as_int();
  else if (key == "lambda_nca") c.lambda_nca = as_f();
  else if (key == "lambda_agm_cgs") c.lambda_agm_cgs = as_f();
  else if (key == "lambda_dml_fgs") c.lambda_dml_fgs = as_f();
  else if (key == "rng_seed") c.rng_seed = std::stoull(val);
  else if (key == "episodes_per_epoch") c.episodes_per_epoch = as_int();
  else if (key == "fixed_episodes") c.fixed_episodes = as_bool();
  else if (key == "resize_to") c.aug.resize_to = as_int();
  else if (key == "scale_min") c.aug.scale_min = as_f();
  else if (key == "scale_max") c.aug.scale_max = as_f();
  else if (key == "crop") c.aug.crop = as_bool();
  else if (key == "flip") c.aug.flip = as_bool();
  else if (key == "enc_c1") c.enc_c1 = as_int();
  else if (key == "enc_c2") c.enc_c2 = as_int();
  else if (key == "enc_fuse") c.enc_fuse = as_int();
  else if (key == "proj_dim_cgs") c.proj_dim_cgs = as_int();
  else if (key == "proj_dim_fgs") c.proj_dim_fgs = as_int();
  else if (key == "cgs_eq6_background") c.cgs_eq6_background = as_bool();
  else if (key == "beta_policy")
    c.beta_policy = val == "constant" ? BetaPolicy::constant : BetaPolicy::schedule;
  else if (key == "beta_constant") c.beta_constant = as_f();
  else
    throw std::runtime_error("unknown config key: " + key);
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  TrainConfig c;
  for (const auto& [k, v] : detail::parse_kv(f)) apply_config_key(c, k, v);
  c.validate();
  return c;
}

inline std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "max_epoch = " << c.max_epoch << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "initial_lr = " << c.initial_lr << "\n"
     << "poly_power = " << c.poly_power << "\n"
     << "alpha = " << c.alpha << "\n"
     << "tau = " << c.tau << "\n"
     << "warmup_epochs = " << c.warmup_epochs << "\n"
     << "lambda_nca = " << c.lambda_nca << "\n"
     << "lambda_agm_cgs = " << c.lambda_agm_cgs << "\n"
     << "lambda_dml_fgs = " << c.lambda_dml_fgs << "\n"
     << "rng_seed = " << c.rng_seed << "\n"
     << "episodes_per_epoch = " << c.episodes_per_epoch << "\n"
     << "fixed_episodes = " << (c.fixed_episodes ? "true" : "false") << "\n"
     << "resize_to = " << c.aug.resize_to << "\n"
     << "scale_min = " << c.aug.scale_min << "\n"
     << "scale_max = " << c.aug.scale_max << "\n"
     << "crop = " << (c.aug.crop ? "true" : "false") << "\n"
     << "flip = " << (c.aug.flip ? "true" : "false") << "\n"
     << "enc_c1 = " << c.enc_c1 << "\n"
     << "enc_c2 = " << c.enc_c2 << "\n"
     << "enc_fuse = " << c.enc_fuse << "\n"
     << "proj_dim_cgs = " << c.proj_dim_cgs << "\n"
     << "proj_dim_fgs = " << c.proj_dim_fgs << "\n"
     << "cgs_eq6_background = " << (c.cgs_eq6_background ? "true" : "false")
     << "\n"
     << "beta_policy = "
     << (c.beta_policy == BetaPolicy::constant ? "constant" : "schedule")
     << "\n"
     << "beta_constant = " << c.beta_constant << "\n";
  return os.str();
}

inline TrainConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  TrainConfig c;
  for (const auto& [k, v] : detail::parse_kv(is)) apply_config_key(c, k, v);
  return c;
}

}  // namespace oshp
