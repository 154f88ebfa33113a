#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stereoisp/training.hpp"

namespace stereoisp {

struct AblationRow {
  Variant variant;
  std::string dataset;
  double mean_psnr = 0;      // dB
  double delta_percent = 0;  // 100 (v - baseline) / baseline
};

struct AblationOptions {
  ExperimentConfig base;  // stage / variant / epochs / ports are set per run
  std::string dataset = "toy";
  int stage1_epochs = 40;
  int stage2_epochs = 20;
  std::uint64_t test_seed = 2000;  // noise for the final table, distinct from validation
};

/// The ablation's trained models and reports, kept for follow-up analysis.
struct AblationRuns {
  TrainState<float> baseline;
  TrainState<float> stage1;
  std::map<Variant, TrainState<float>> stage2;  // unwarped-pair, warped-gt, same-noise
};

struct AblationReport {
  std::vector<AblationRow> rows;
  nlohmann::json metadata;
};

inline double delta_percent(double value, double baseline) { return 100.0 * (value - baseline) / baseline; }

inline ExperimentConfig variant_config(const ExperimentConfig& base, Variant variant, int stage, int epochs) {
  ExperimentConfig c = base;
  c.variant = variant;
  c.stage = stage;
  c.epochs = epochs;
  c.model.ports = variant == Variant::baseline_single ? 1 : 2;
  return c;
}

/// Stage-2 fine-tunes pick up the schedule where stage 1 left it, so they start
/// at the stage-1 learning rate after `stage1_epochs` decays.
inline ExperimentConfig finetune_config(const AblationOptions& opt, Variant variant) {
  ExperimentConfig c = variant_config(opt.base, variant, 2, opt.stage2_epochs);
  c.lr = opt.base.learning_rate(opt.stage1_epochs);
  return c;
}

using StageLogger = std::function<void(const std::string& run, const EpochProgress&)>;

/// Trains the single-port baseline for stage1 + stage2 epochs, a stage-1 model,
/// and from it stage-2 fine-tunes for unwarped-pair, warped-gt and same-noise.
/// Rows hold the best-validation parameters scored on `test` with test_seed.
inline AblationReport run_ablation(const AblationOptions& opt, const std::vector<StereoSample>& train_set,
                                   const std::vector<StereoSample>& test, AblationRuns* runs_out = nullptr,
                                   const StageLogger& log = {}) {
  AblationRuns runs;
  auto progress_for = [&](const std::string& name) {
    return [&, name](const EpochProgress& p) {
      if (log) log(name, p);
    };
  };

  const auto base_cfg = variant_config(opt.base, Variant::baseline_single, 1, opt.stage1_epochs + opt.stage2_epochs);
  runs.baseline = init_training<float>(base_cfg, test);
  train(base_cfg, train_set, test, runs.baseline, progress_for("baseline-single"));

  const auto s1_cfg = variant_config(opt.base, Variant::warped_gt, 1, opt.stage1_epochs);
  runs.stage1 = init_training<float>(s1_cfg, test);
  train(s1_cfg, train_set, test, runs.stage1, progress_for("stage-1"));

  const std::vector<Variant> order{Variant::baseline_single, Variant::unwarped_pair, Variant::warped_gt,
                                   Variant::same_noise};
  std::map<Variant, ExperimentConfig> configs{{Variant::baseline_single, base_cfg}};
  for (auto v : {Variant::unwarped_pair, Variant::warped_gt, Variant::same_noise}) {
    auto cfg = finetune_config(opt, v);
    auto st = init_training<float>(cfg, test, std::optional(runs.stage1.best));
    train(cfg, train_set, test, st, progress_for(to_string(v)));
    runs.stage2.emplace(v, std::move(st));
    configs.emplace(v, cfg);
  }

  AblationReport report;
  double baseline_psnr = 0;
  for (auto v : order) {
    auto& params = v == Variant::baseline_single ? runs.baseline.best : runs.stage2.at(v).best;
    const double value = evaluate(params, test, configs.at(v), opt.test_seed).mean_psnr;
    if (v == Variant::baseline_single) baseline_psnr = value;
    report.rows.push_back({v, opt.dataset, value, delta_percent(value, baseline_psnr)});
  }

  nlohmann::json cfgs = nlohmann::json::object();
  for (const auto& [v, c] : configs) cfgs[to_string(v)] = to_json(c);
  cfgs["stage-1"] = to_json(s1_cfg);
  nlohmann::json reports = nlohmann::json::object();
  reports["baseline-single"] = to_json(runs.baseline.report);
  reports["stage-1"] = to_json(runs.stage1.report);
  for (const auto& [v, st] : runs.stage2) reports[to_string(v)] = to_json(st.report);
  report.metadata = {{"dataset", opt.dataset},
                     {"seed", opt.base.seed},
                     {"validation_seed", opt.base.validation_seed},
                     {"test_seed", opt.test_seed},
                     {"stage1_epochs", opt.stage1_epochs},
                     {"stage2_epochs", opt.stage2_epochs},
                     {"configs", cfgs},
                     {"train_reports", reports}};
  if (runs_out) *runs_out = std::move(runs);
  return report;
}

inline std::string ablation_csv(const AblationReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,dataset,mean_psnr_db,delta_percent\n";
  for (const auto& row : r.rows)
    os << to_string(row.variant) << ',' << row.dataset << ',' << row.mean_psnr << ',' << row.delta_percent << '\n';
  return os.str();
}

inline nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"variant", to_string(row.variant)},
                    {"dataset", row.dataset},
                    {"mean_psnr_db", row.mean_psnr},
                    {"delta_percent", row.delta_percent}});
  return {{"rows", rows}, {"metadata", r.metadata}};
}

}  // namespace stereoisp
