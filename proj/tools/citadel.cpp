// citadel: command-line front end for dataset generation, training, stream
// replay, ablations, label-noise sweeps, benchmarks and report conversion.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "citadel/bench.hpp"
#include "citadel/checkpoint.hpp"
#include "citadel/config.hpp"
#include "citadel/errors.hpp"
#include "citadel/hash.hpp"
#include "citadel/report.hpp"
#include "citadel/stream.hpp"
#include "citadel/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace citadel;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> budgets;
  std::vector<std::string> selectors;
  std::optional<double> label_ratio;
  std::string out;
  std::string format = "binary";
  std::string input;
};

ExperimentConfig resolve_config(const Options& o, const std::string& command) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = load_experiment_config(o.config_path);
  } else {
    cfg.generator = DriftGeneratorConfig{};
  }
  if (o.seed) {
    cfg.pipeline.stream.seeds = {*o.seed};
    cfg.bench.seed = *o.seed;
  }
  if (o.label_ratio) {
    if (!(*o.label_ratio > 0.0 && *o.label_ratio <= 1.0)) throw ConfigError("--label-ratio must be in (0,1]");
    cfg.pipeline.label_ratio = *o.label_ratio;
  }
  if (!o.budgets.empty()) {
    cfg.ablate_budgets = o.budgets;
    cfg.pipeline.stream.budget = o.budgets.front();
    cfg.bench.budget = o.budgets.front();
  }
  if (!o.selectors.empty()) {
    std::vector<SelectorKind> kinds;
    for (const auto& s : o.selectors) {
      try {
        kinds.push_back(selector_from_string(s));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--selector: ") + e.what());
      }
    }
    if (command == "stream" && kinds.size() != 1) throw ConfigError("--selector takes one value for stream");
    cfg.ablate_selectors = kinds;
    cfg.pipeline.stream.selector.kind = kinds.front();
  }
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Options& o, const ExperimentConfig& cfg, const std::string& command) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("CITADEL_OUT"); env && *env) return fs::path(env) / command;
  return fs::path(cfg.out_dir) / command;
}

std::vector<std::size_t> stream_budgets(const Options& o, const ExperimentConfig& cfg) {
  return o.budgets.empty() ? std::vector<std::size_t>{cfg.pipeline.stream.budget} : o.budgets;
}

void print_summary(const std::string& label, const MetricSummary& s) {
  auto pct = [](const MeanStd& m) {
    if (!m.defined()) return std::string("n/a");
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.1f+-%.1f", to_percent_1dp(m.mean), to_percent_1dp(m.std));
    return std::string(buf);
  };
  std::cout << label << "  F1 " << pct(s.f1) << "  FNR " << pct(s.fnr) << "  FPR " << pct(s.fpr) << '\n';
}

int cmd_synth(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "synth");
  if (!cfg.generator) throw ConfigError("synth needs a generator section");
  if (o.format != "binary" && o.format != "csv") throw ConfigError("--format must be binary or csv");
  DriftGeneratorConfig gen = *cfg.generator;
  if (o.seed) gen.seed = *o.seed;
  const Dataset ds = synth_drift_generate(gen);
  const fs::path dir = output_dir(o, cfg, "synth");
  const DatasetManifest m = save_dataset(dir, ds, o.format == "csv" ? ShardFormat::kCsv : ShardFormat::kBinary);
  std::vector<fs::path> artifacts = {"manifest.json"};
  for (const auto& e : m.months) artifacts.push_back(e.shard);
  json resolved = to_json(cfg);
  resolved["generator"] = to_json(gen);
  write_run_manifest(dir, "synth", resolved, {gen.seed}, artifacts);
  std::cout << "wrote " << ds.records.size() << " records in " << m.months.size() << " months to " << dir.string()
            << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "train");
  const ExperimentData data = load_experiment_data(cfg);
  const std::uint64_t seed = cfg.pipeline.stream.seeds.front();
  InitialState st = prepare_initial_state(data, cfg.pipeline, seed);
  const fs::path dir = output_dir(o, cfg, "train");
  fs::create_directories(dir);
  save_checkpoint(dir / "checkpoint.json", {st.model, std::nullopt, seed});
  write_json(dir / "train_report.json", to_json(st.report));
  write_run_manifest(dir, "train", to_json(cfg), {seed}, {"checkpoint.json", "train_report.json"});
  const LossBreakdown& last = st.report.epoch_losses.back();
  std::printf("trained %zu epochs on %zu labeled / %zu unlabeled; final loss %.6f\n", st.report.epoch_losses.size(),
              st.labeled.size(), st.unlabeled.size(), last.total);
  return 0;
}

int cmd_stream(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "stream");
  const ExperimentData data = load_experiment_data(cfg);
  const std::vector<std::size_t> budgets = stream_budgets(o, cfg);
  const std::vector<AblationCell> cells =
      run_ablation_suite(data, cfg.pipeline, {cfg.pipeline.stream.selector}, budgets);
  const fs::path dir = output_dir(o, cfg, "stream");
  fs::create_directories(dir);
  std::vector<fs::path> artifacts;
  std::vector<SummaryRow> rows;
  std::size_t violations = 0;
  for (const auto& c : cells) {
    const std::string tag = "k" + std::to_string(c.budget);
    emit_report(dir / ("report_" + tag + ".json"), c.result, ReportFormat::kJson);
    emit_report(dir / ("metrics_" + tag + ".csv"), c.result, ReportFormat::kCsv);
    write_audit_csv(dir / ("audit_" + tag + ".csv"), c.result);
    artifacts.insert(artifacts.end(), {"report_" + tag + ".json", "metrics_" + tag + ".csv", "audit_" + tag + ".csv"});
    rows.push_back({{std::to_string(c.budget)}, c.result.runs.size(), c.result.aggregate});
    violations += c.result.violation_count();
    print_summary("budget " + std::to_string(c.budget), c.result.aggregate);
  }
  write_summary_csv(dir / "summary.csv", {"budget"}, rows);
  artifacts.push_back("summary.csv");
  json resolved = to_json(cfg);
  resolved["budgets"] = budgets;
  write_run_manifest(dir, "stream", resolved, cfg.pipeline.stream.seeds, artifacts);
  if (violations > 0) throw StateError("stream invariants violated " + std::to_string(violations) + " times");
  return 0;
}

int cmd_ablate(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "ablate");
  const ExperimentData data = load_experiment_data(cfg);
  std::vector<SelectorConfig> selectors;
  for (SelectorKind k : cfg.ablate_selectors) {
    SelectorConfig s = cfg.pipeline.stream.selector;
    s.kind = k;
    selectors.push_back(s);
  }
  const std::vector<AblationCell> cells = run_ablation_suite(data, cfg.pipeline, selectors, cfg.ablate_budgets);
  const fs::path dir = output_dir(o, cfg, "ablate");
  fs::create_directories(dir);
  std::vector<SummaryRow> rows;
  json all = json::array();
  for (const auto& c : cells) {
    rows.push_back({{to_string(c.selector.kind), std::to_string(c.budget)}, c.result.runs.size(), c.result.aggregate});
    all.push_back({{"selector", to_string(c.selector.kind)}, {"budget", c.budget}, {"report", to_json(c.result)}});
    print_summary(to_string(c.selector.kind) + " k=" + std::to_string(c.budget), c.result.aggregate);
  }
  write_summary_csv(dir / "ablation.csv", {"selector", "budget"}, rows);
  write_json(dir / "ablation.json", all);
  write_run_manifest(dir, "ablate", to_json(cfg), cfg.pipeline.stream.seeds, {"ablation.csv", "ablation.json"});
  return 0;
}

int cmd_noise(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "noise");
  const ExperimentData data = load_experiment_data(cfg);
  std::vector<SummaryRow> rows;
  json all = json::array();
  for (double rate : cfg.noise_rates) {
    PipelineConfig p = cfg.pipeline;
    p.noise_rate = rate;
    const StreamResult r = run_pipeline(data, p);
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", rate);
    rows.push_back({{key}, r.runs.size(), r.aggregate});
    all.push_back({{"noise_rate", rate}, {"report", to_json(r)}});
    print_summary(std::string("noise ") + key, r.aggregate);
  }
  const fs::path dir = output_dir(o, cfg, "noise");
  fs::create_directories(dir);
  write_summary_csv(dir / "noise.csv", {"noise_rate"}, rows);
  write_json(dir / "noise.json", all);
  write_run_manifest(dir, "noise", to_json(cfg), cfg.pipeline.stream.seeds, {"noise.csv", "noise.json"});
  return 0;
}

int cmd_bench(const Options& o) {
  const ExperimentConfig cfg = resolve_config(o, "bench");
  const std::vector<BenchRecord> records = bench(cfg.bench, cfg.bench_sizes);
  const fs::path dir = output_dir(o, cfg, "bench");
  fs::create_directories(dir);
  write_bench_csv(dir / "bench.csv", records);
  write_run_manifest(dir, "bench", to_json(cfg), {cfg.bench.seed}, {"bench.csv"});
  for (const auto& r : records) std::printf("n=%zu  %.3f s  %llu ops\n", r.n, r.seconds,
                                            static_cast<unsigned long long>(r.operations));
  return 0;
}

int cmd_report(const Options& o) {
  if (o.input.empty()) throw ConfigError("report needs --input <report.json>");
  const json report = read_json(o.input);
  const std::vector<MetricsRow> rows = metrics_rows(report);
  const fs::path dir = o.out.empty() ? fs::path(o.input).parent_path() : fs::path(o.out);
  fs::create_directories(dir.empty() ? fs::path(".") : dir);
  const fs::path csv = (dir.empty() ? fs::path(".") : dir) / (fs::path(o.input).stem().string() + ".csv");
  json_report_to_csv(report, csv);
  const fs::path root = dir.empty() ? fs::path(".") : dir;
  write_run_manifest(root, "report", {{"input", o.input}, {"input_sha256", sha256_file(o.input)}}, {},
                     {csv.filename()});
  std::cout << "wrote " << rows.size() << " rows to " << csv.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citadel: semi-supervised active learning for drifting binary-feature streams"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "single seed overriding the config's seed list");
    sub->add_option("--label-ratio", o.label_ratio, "fraction of the training period that is labeled");
    sub->add_option("--out", o.out, "output directory (default: $CITADEL_OUT/<command> or <config out>/<command>)");
  };
  auto budgets = [&](CLI::App* sub) {
    sub->add_option("--budget", o.budgets, "labels per month, e.g. --budget 50,100,200,400")->delimiter(',');
  };
  auto selectors = [&](CLI::App* sub) {
    sub->add_option("--selector", o.selectors, "multi | margin | lp | lowconf | random")->delimiter(',');
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic drifting dataset");
  common(synth);
  synth->add_option("--format", o.format, "shard format: binary | csv");
  CLI::App* train = app.add_subcommand("train", "semi-supervised initial training; writes a checkpoint");
  common(train);
  CLI::App* stream = app.add_subcommand("stream", "monthly stream replay with active learning");
  common(stream);
  budgets(stream);
  selectors(stream);
  CLI::App* ablate = app.add_subcommand("ablate", "selector x budget ablation matrix");
  common(ablate);
  budgets(ablate);
  selectors(ablate);
  CLI::App* bench_cmd = app.add_subcommand("bench", "runtime and operation-count benchmark");
  common(bench_cmd);
  budgets(bench_cmd);
  selectors(bench_cmd);
  CLI::App* noise = app.add_subcommand("noise", "label-noise sweep");
  common(noise);
  budgets(noise);
  selectors(noise);
  CLI::App* report = app.add_subcommand("report", "convert a JSON stream report to CSV");
  report->add_option("--input", o.input, "report JSON written by stream")->required();
  report->add_option("--out", o.out, "output directory (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (train->parsed()) return cmd_train(o);
    if (stream->parsed()) return cmd_stream(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (bench_cmd->parsed()) return cmd_bench(o);
    if (noise->parsed()) return cmd_noise(o);
    if (report->parsed()) return cmd_report(o);
  } catch (...) {
    const ExitCode code = exit_code_for_current_exception();
    try {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
    } catch (...) {
      std::cerr << "error: unknown failure\n";
    }
    return static_cast<int>(code);
  }
  return 1;
}
