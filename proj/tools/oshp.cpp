// oshp: command line front end for the one-shot human parsing toolkit.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "oshp/oshp.hpp"

namespace fs = std::filesystem;

namespace {

// all outputs may be redirected through one environment variable
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("OSHP_OUTPUT_ROOT");
  if (!root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

oshp::Phase phase_from(const std::string& s) {
  if (s == "meta_train") return oshp::Phase::meta_train;
  if (s == "meta_test") return oshp::Phase::meta_test;
  throw CLI::ValidationError("phase must be meta_train or meta_test");
}

void write_run_manifest(const std::string& dir, const oshp::TrainConfig& cfg) {
  std::ofstream f(fs::path(dir) / "resolved_config.txt");
  f << oshp::serialize_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-shot human parsing toolkit"};
  app.require_subcommand(1);

  // --- gen-synthetic -------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "generate the procedural desk-scale dataset");
  oshp::SyntheticConfig syn;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", syn.out_dir, "output directory")->required();
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--size", syn.image_size, "image side length");
  gen->add_option("--train-support", syn.n_train_support);
  gen->add_option("--train-query", syn.n_train_query);
  gen->add_option("--test-support", syn.n_test_support);
  gen->add_option("--test-query", syn.n_test_query);

  // --- tailor --------------------------------------------------------------
  auto* tailor = app.add_subcommand(
      "tailor", "rewrite a dataset through a fold's class merge map");
  std::string t_manifest, t_fold, t_phase = "meta_train", t_out;
  tailor->add_option("--manifest", t_manifest)->required();
  tailor->add_option("--fold", t_fold)->required();
  tailor->add_option("--phase", t_phase, "meta_train or meta_test");
  tailor->add_option("--out", t_out, "output directory")->required();

  // --- make-testlist -------------------------------------------------------
  auto* mtl = app.add_subcommand("make-testlist",
                                 "build the coverage-driven meta-test list");
  std::string l_manifest, l_fold, l_out;
  int l_min = 150;
  std::uint64_t l_seed = 1;
  mtl->add_option("--manifest", l_manifest)->required();
  mtl->add_option("--fold", l_fold)->required();
  mtl->add_option("--min-evals", l_min, "minimum evaluations per class");
  mtl->add_option("--seed", l_seed);
  mtl->add_option("--out", l_out)->required();

  // --- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "run episodic meta-training");
  std::string tr_manifest, tr_config, tr_out;
  std::vector<std::string> tr_set;
  std::uint64_t tr_seed = 0;
  bool tr_have_seed = false;
  train->add_option("--manifest", tr_manifest)->required();
  train->add_option("--config", tr_config, "key = value config file");
  train->add_option("--seed", tr_seed)->each([&](const std::string&) {
    tr_have_seed = true;
  });
  train->add_option("--set", tr_set, "config override key=value")
      ->take_all();
  train->add_option("--out", tr_out, "output directory")->required();

  // --- eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "run a meta-testing protocol");
  std::string e_ckpt, e_manifest, e_list, e_fold, e_proto = "k_way";
  std::string e_out, e_head = "npm", e_dump;
  bool e_untrained_protocol = false;
  ev->add_option("--checkpoint", e_ckpt)->required();
  ev->add_option("--manifest", e_manifest)->required();
  ev->add_option("--testlist", e_list)->required();
  ev->add_option("--fold", e_fold)->required();
  ev->add_option("--protocol", e_proto, "k_way or one_way");
  ev->add_option("--head", e_head, "npm or agm");
  ev->add_option("--out", e_out, "report file");
  ev->add_option("--dump-dir", e_dump, "dump prediction masks here");
  ev->add_flag("--static-prototypes", e_untrained_protocol,
               "pool every prototype from the support (ignore the bank)");

  // --- report --------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "render per-fold eval reports");
  std::vector<std::string> r_inputs;
  rep->add_option("--inputs", r_inputs, "per-fold report files")
      ->required()
      ->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      syn.out_dir = resolve_out(syn.out_dir);
      oshp::generate_synthetic_dataset(syn, gen_seed);
      oshp::save_fold(oshp::default_synthetic_fold(),
                      (fs::path(syn.out_dir) / "fold1.txt").string());
      std::cout << "wrote dataset to " << syn.out_dir << "\n";
    } else if (*tailor) {
      const auto m = oshp::load_manifest(t_manifest);
      const auto fold = oshp::load_fold(t_fold);
      t_out = resolve_out(t_out);
      const auto out = oshp::tailor_dataset(m, fold, phase_from(t_phase), t_out);
      oshp::save_manifest(out, (fs::path(t_out) / "manifest.txt").string());
      std::cout << "wrote tailored manifest to " << t_out << "\n";
    } else if (*mtl) {
      const auto m = oshp::load_manifest(l_manifest);
      const auto fold = oshp::load_fold(l_fold);
      const auto list = oshp::build_meta_test_list(m, fold, l_min, l_seed);
      l_out = resolve_out(l_out);
      oshp::save_test_list(list, l_out);
      std::cout << "wrote " << list.size() << " pairs to " << l_out << "\n";
    } else if (*train) {
      oshp::TrainConfig cfg;
      if (!tr_config.empty()) cfg = oshp::load_train_config(tr_config);
      for (const auto& kv : tr_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::runtime_error("--set expects key=value, got " + kv);
        oshp::apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (tr_have_seed) cfg.rng_seed = tr_seed;
      cfg.validate();
      tr_out = resolve_out(tr_out);
      fs::create_directories(tr_out);
      write_run_manifest(tr_out, cfg);

      oshp::Trainer trainer(cfg, oshp::load_manifest(tr_manifest));
      std::ofstream log_file(fs::path(tr_out) / "train_log.txt");
      trainer.log_stream = &log_file;
      trainer.run();
      oshp::save_checkpoint(trainer.checkpoint(),
                            (fs::path(tr_out) / "checkpoint.bin").string());
      std::cout << "trained " << trainer.iteration << " iterations; checkpoint in "
                << tr_out << "\n";
    } else if (*ev) {
      auto ck = oshp::load_checkpoint(e_ckpt);
      const auto m = oshp::load_manifest(e_manifest);
      const auto fold = oshp::load_fold(e_fold);
      const auto list = oshp::load_test_list(e_list);
      oshp::MetaTestOptions opts;
      opts.head = e_head == "agm" ? oshp::InferenceHead::agm
                                  : oshp::InferenceHead::npm;
      opts.use_bank = !e_untrained_protocol;
      if (!e_dump.empty()) {
        opts.dump_dir = resolve_out(e_dump);
        fs::create_directories(opts.dump_dir);
      }
      const auto way = e_proto == "one_way" ? oshp::Way::one_way : oshp::Way::k_way;
      const auto report = oshp::run_meta_test(*ck.model, m, list, fold, way, opts);
      if (!e_out.empty()) oshp::save_eval_report(report, resolve_out(e_out));
      std::cout << oshp::render_report_table({report});
    } else if (*rep) {
      std::vector<oshp::EvalReport> reports;
      for (const auto& p : r_inputs) reports.push_back(oshp::load_eval_report(p));
      std::cout << oshp::render_report_table(reports);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
