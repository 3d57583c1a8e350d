#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>

#include "oshp/metrics.hpp"
#include "oshp/model.hpp"

// Meta-testing protocols. The fine-grained prediction comes from NPM by
// default (the post-training inference path); the head is overridable for
// ablation runs trained with a fixed beta.

namespace oshp {

struct MetaTestOptions {
  InferenceHead head = InferenceHead::npm;
  // when false, every prototype is pooled from the support (used to score
  // untrained reference models whose bank is empty)
  bool use_bank = true;
  std::string dump_dir;  // optional per-episode prediction mask dump
};

inline EvalReport run_meta_test(EopNet& model, const DatasetManifest& m,
                                const std::vector<TestPair>& list,
                                const FoldSpec& fold, Way protocol,
                                const MetaTestOptions& opts = {}) {
  const std::set<int> base = opts.use_bank ? fold.base_classes : std::set<int>{};
  ConfusionAccumulator acc;
  EvalReport rep;
  rep.protocol = protocol == Way::k_way ? "k_way" : "one_way";
  double bi_sum = 0.0;
  int bi_n = 0;

  auto dump = [&](const LabelImage& pred, int n) {
    if (!opts.dump_dir.empty())
      write_pgm(opts.dump_dir + "/pred_" + std::to_string(n) + ".pgm", pred);
  };

  for (const auto& pair : list) {
    if (protocol == Way::k_way) {
      Episode ep = make_episode(m, pair.support_index, pair.query_index,
                                Way::k_way, -1, true);
      const LabelImage pred =
          model.predict_kway(ep, Phase::meta_test, base, opts.head);
      score_episode(pred, *ep.query_mask, ep.class_set, acc);
      dump(pred, rep.episodes);
      ++rep.episodes;
    } else {
      for (int c : pair.class_set) {
        if (c == 0) continue;
        Episode ep = make_episode(m, pair.support_index, pair.query_index,
                                  Way::one_way, c, true);
        const LabelImage pred =
            model.predict_kway(ep, Phase::meta_test, base, opts.head);
        score_episode(pred, *ep.query_mask, ep.class_set, acc);
        bi_sum += binary_iou(derive_binary_mask(pred),
                             derive_binary_mask(*ep.query_mask));
        ++bi_n;
        dump(pred, rep.episodes);
        ++rep.episodes;
      }
    }
  }

  rep.novel_miou = acc.miou(fold.novel_classes);
  rep.human_miou = acc.miou(fold.human_classes());
  rep.overall_accuracy = acc.accuracy();
  rep.binary_miou = bi_n ? bi_sum / bi_n : 0.0;
  for (int c : fold.human_classes())
    if (acc.observed(c)) rep.per_class_iou[c] = 100.0 * acc.iou(c);
  return rep;
}

// --- report files: flat key = value text -----------------------------------

inline void save_eval_report(const EvalReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(17);
  f << "protocol = " << r.protocol << "\n";
  f << "episodes = " << r.episodes << "\n";
  f << "novel_miou = " << r.novel_miou << "\n";
  f << "human_miou = " << r.human_miou << "\n";
  f << "overall_accuracy = " << r.overall_accuracy << "\n";
  f << "binary_miou = " << r.binary_miou << "\n";
  for (const auto& [c, v] : r.per_class_iou)
    f << "class_iou_" << c << " = " << v << "\n";
}

inline EvalReport load_eval_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  EvalReport r;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key, eq;
    ss >> key >> eq;
    if (key == "protocol") ss >> r.protocol;
    else if (key == "episodes") ss >> r.episodes;
    else if (key == "novel_miou") ss >> r.novel_miou;
    else if (key == "human_miou") ss >> r.human_miou;
    else if (key == "overall_accuracy") ss >> r.overall_accuracy;
    else if (key == "binary_miou") ss >> r.binary_miou;
    else if (key.rfind("class_iou_", 0) == 0) {
      double v;
      ss >> v;
      r.per_class_iou[std::stoi(key.substr(10))] = v;
    }
  }
  return r;
}

// table mirroring the per-fold / averaged layout of the benchmark reports
inline std::string render_report_table(const std::vector<EvalReport>& folds) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  const bool kway = !folds.empty() && folds[0].protocol == "k_way";
  os << (kway ? "k-way OSHP" : "1-way OSHP")
     << "  (global-aggregate mIoU; per-episode Binary-IoU)\n";
  os << std::left << std::setw(10) << "fold" << std::right << std::setw(14)
     << "novel mIoU" << std::setw(14) << "human mIoU" << std::setw(14)
     << (kway ? "overall acc" : "Bi-mIoU") << "\n";
  double n = 0, h = 0, x = 0;
  for (size_t i = 0; i < folds.size(); ++i) {
    const double extra =
        kway ? folds[i].overall_accuracy : folds[i].binary_miou;
    os << std::left << std::setw(10) << ("Fold " + std::to_string(i + 1))
       << std::right << std::setw(14) << folds[i].novel_miou << std::setw(14)
       << folds[i].human_miou << std::setw(14) << extra << "\n";
    n += folds[i].novel_miou;
    h += folds[i].human_miou;
    x += extra;
  }
  if (folds.size() > 1) {
    const double k = double(folds.size());
    os << std::left << std::setw(10) << "Ave" << std::right << std::setw(14)
       << n / k << std::setw(14) << h / k << std::setw(14) << x / k << "\n";
  }
  return os.str();
}

}  // namespace oshp
