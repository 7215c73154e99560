#pragma once

// Experiment configuration: a JSON document whose fields all have defaults.
// Parsing rejects unknown keys and ill-typed or out-of-range values with a
// ConfigError that names the offending path (e.g. "stream.selector.p_norm").

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "citadel/bench.hpp"
#include "citadel/dataset.hpp"
#include "citadel/stream.hpp"
#include "citadel/synth.hpp"

namespace citadel {

struct SplitSpec {
  Period train{{2012, 1}, {2012, 1}};
  std::optional<Period> validation;
  Period test{{2012, 2}, {2013, 1}};
};

struct ExperimentConfig {
  std::optional<std::string> dataset_path;
  std::optional<DriftGeneratorConfig> generator;
  SplitSpec split;
  PipelineConfig pipeline;
  std::vector<SelectorKind> ablate_selectors = {SelectorKind::kMultiCriteria, SelectorKind::kMarginOnly,
                                                SelectorKind::kLpOnly, SelectorKind::kLowConfidenceOnly,
                                                SelectorKind::kRandom};
  std::vector<std::size_t> ablate_budgets = {50, 100, 200, 400};
  std::vector<double> noise_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  BenchConfig bench;
  std::vector<std::size_t> bench_sizes = {100, 1000, 5000, 10000};
  std::string out_dir = "runs";

  // Exactly one data source; nested configs valid.
  void validate() const;
};

// Loads or generates the records and applies the temporal split. The
// validation period, if any, is held out of both training and the stream.
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const SelectorConfig& c);
nlohmann::json to_json(const StreamConfig& c);
nlohmann::json to_json(const PipelineConfig& c);
nlohmann::json to_json(const DriftGeneratorConfig& c);
nlohmann::json to_json(const BenchConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

// SHA-256 of the compact JSON dump (keys are sorted by nlohmann::json).
std::string config_hash(const nlohmann::json& j);

}  // namespace citadel
