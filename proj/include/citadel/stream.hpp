#pragma once

// Month-by-month replay of a labeled stream with budgeted label acquisition.
//
// For every month, in order:
//   1. evaluate the current model on the month (before any of it is labeled),
//   2. add the month to the unlabeled pool,
//   3. score the pool and select up to `budget` samples,
//   4. label them through the oracle and move them to the labeled set,
//   5. retrain on (labeled, unlabeled) with the semi-supervised trainer.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "citadel/dataset.hpp"
#include "citadel/metrics.hpp"
#include "citadel/net.hpp"
#include "citadel/selection.hpp"
#include "citadel/trainer.hpp"

namespace citadel {

struct StreamConfig {
  std::size_t budget = 50;
  SelectorConfig selector;
  TrainConfig retrain = default_retrain();
  bool warm_start = true;
  // Algorithm-faithful retraining even when a month added no labels. Off so
  // that a zero budget leaves the deployed model untouched.
  bool retrain_without_new_labels = false;
  // Optional cap on the unlabeled pool; oldest entries are dropped first.
  std::optional<std::size_t> pool_window;
  std::vector<std::uint64_t> seeds = {0};

  static TrainConfig default_retrain() {
    TrainConfig t;
    t.epochs = 10;
    return t;
  }
  void validate() const;
};

// Ground-truth lookup by sample id.
using Oracle = std::unordered_map<std::string, int>;
Oracle make_oracle(std::span<const FeatureRecord> records);

using MonthBatch = std::pair<YearMonth, std::vector<FeatureRecord>>;

struct SelectedSample {
  std::string month;  // month in which it was selected
  std::string id;
  SelectionScore score;
};

struct InvariantLog {
  std::size_t checks = 0;
  std::vector<std::string> violations;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) violations.push_back(what);
  }
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<MonthlyMetrics> months;
  std::vector<std::vector<std::string>> selected_ids;  // per month
  std::vector<SelectedSample> audit;
  std::vector<std::size_t> labeled_sizes;    // after each month
  std::vector<std::size_t> unlabeled_sizes;  // after each month
  InvariantLog invariants;
};

struct MetricSummary {
  MeanStd f1;
  MeanStd fnr;
  MeanStd fpr;
};

struct StreamResult {
  std::string config_hash;
  std::vector<RunResult> runs;
  // Each run's mean over months, then mean and std across runs.
  MetricSummary aggregate;
  // Across runs, per month.
  std::vector<MetricSummary> per_month;

  std::size_t violation_count() const;
  // Mean over months and runs of the defined F1 values.
  double mean_f1() const { return aggregate.f1.mean; }
};

StreamResult summarize(std::vector<RunResult> runs, std::string config_hash = {});

// One seeded replay. `labeled` carries the labels the model may learn from
// (possibly noisy); labels on `unlabeled` and month records are never read
// except to score the month and to answer oracle queries.
RunResult run_stream(Classifier model, const std::vector<FeatureRecord>& labeled,
                     const std::vector<FeatureRecord>& unlabeled, const std::vector<MonthBatch>& months,
                     const Oracle& oracle, const StreamConfig& cfg, std::uint64_t seed);

// Everything the pipeline needs from a temporal split.
struct ExperimentData {
  std::vector<FeatureRecord> train;
  std::vector<MonthBatch> stream;
  std::size_t feature_dim = 0;
};

struct PipelineConfig {
  double label_ratio = 0.4;
  double noise_rate = 0.0;
  std::vector<std::size_t> hidden = {512, 128};
  TrainConfig initial_train;
  StreamConfig stream;

  void validate() const;
};

// State after the semi-supervised initial training for one seed.
struct InitialState {
  Classifier model;
  std::vector<FeatureRecord> labeled;
  std::vector<FeatureRecord> unlabeled;
  TrainReport report;
};

InitialState prepare_initial_state(const ExperimentData& data, const PipelineConfig& cfg,
                                   std::uint64_t seed);

// Initial training and stream replay for every seed in cfg.stream.seeds.
StreamResult run_pipeline(const ExperimentData& data, const PipelineConfig& cfg);

struct AblationCell {
  SelectorConfig selector;
  std::size_t budget = 0;
  StreamResult result;
};

// Cross product of selectors and budgets over shared seeds. Initial training
// is done once per seed and reused by every cell.
std::vector<AblationCell> run_ablation_suite(const ExperimentData& data, const PipelineConfig& base,
                                             const std::vector<SelectorConfig>& selectors,
                                             const std::vector<std::size_t>& budgets);

}  // namespace citadel
