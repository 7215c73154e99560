#include "citadel/stream.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "citadel/config.hpp"
#include "citadel/errors.hpp"
#include "citadel/hash.hpp"

namespace citadel {
namespace {

struct PoolEntry {
  std::string id;
  FeatureVector features;
  int month_ordinal = 0;
};

std::vector<int> predict_labels(const Classifier& model, std::span<const FeatureRecord> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const Probabilities p = forward(model, r.features).probabilities;
    out.push_back(p[1] > p[0] ? 1 : 0);
  }
  return out;
}

MetricSummary summarize_metrics(std::span<const std::optional<double>> f1,
                                std::span<const std::optional<double>> fnr,
                                std::span<const std::optional<double>> fpr) {
  return {aggregate(f1), aggregate(fnr), aggregate(fpr)};
}

// Every sample that can reach the unlabeled pool: the unlabeled part of the
// training period and the whole stream.
Oracle ground_truth_oracle(const ExperimentData& data) {
  Oracle o = make_oracle(data.train);
  for (const auto& [m, rows] : data.stream) {
    for (const auto& r : rows) o[r.id] = r.label;
  }
  return o;
}

}  // namespace

void StreamConfig::validate() const {
  selector.validate();
  retrain.validate();
  if (seeds.empty()) throw ConfigError("stream.seeds must not be empty");
  if (pool_window && *pool_window == 0) throw ConfigError("stream.pool_window must be positive when set");
}

void PipelineConfig::validate() const {
  if (!(label_ratio > 0.0 && label_ratio <= 1.0)) throw ConfigError("label_ratio must be in (0,1]");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must be in [0,1]");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model.hidden sizes must be positive");
  }
  initial_train.validate();
  stream.validate();
}

Oracle make_oracle(std::span<const FeatureRecord> records) {
  Oracle o;
  o.reserve(records.size());
  for (const auto& r : records) o[r.id] = r.label;
  return o;
}

std::size_t StreamResult::violation_count() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.invariants.violations.size();
  return n;
}

StreamResult summarize(std::vector<RunResult> runs, std::string config_hash) {
  StreamResult out;
  out.config_hash = std::move(config_hash);
  out.runs = std::move(runs);
  std::vector<std::optional<double>> run_f1, run_fnr, run_fpr;
  std::size_t months = 0;
  for (const auto& r : out.runs) {
    std::vector<std::optional<double>> f1, fnr, fpr;
    for (const auto& m : r.months) {
      f1.push_back(m.f1);
      fnr.push_back(m.fnr);
      fpr.push_back(m.fpr);
    }
    auto mean_of = [](const std::vector<std::optional<double>>& v) -> std::optional<double> {
      const MeanStd s = aggregate(std::span<const std::optional<double>>(v));
      return s.defined() ? std::optional<double>(s.mean) : std::nullopt;
    };
    run_f1.push_back(mean_of(f1));
    run_fnr.push_back(mean_of(fnr));
    run_fpr.push_back(mean_of(fpr));
    months = std::max(months, r.months.size());
  }
  out.aggregate = summarize_metrics(run_f1, run_fnr, run_fpr);
  for (std::size_t m = 0; m < months; ++m) {
    std::vector<std::optional<double>> f1, fnr, fpr;
    for (const auto& r : out.runs) {
      if (m < r.months.size()) {
        f1.push_back(r.months[m].f1);
        fnr.push_back(r.months[m].fnr);
        fpr.push_back(r.months[m].fpr);
      }
    }
    out.per_month.push_back(summarize_metrics(f1, fnr, fpr));
  }
  return out;
}

RunResult run_stream(Classifier model, const std::vector<FeatureRecord>& labeled,
                     const std::vector<FeatureRecord>& unlabeled, const std::vector<MonthBatch>& months,
                     const Oracle& oracle, const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (labeled.empty()) throw PreconditionError("run_stream: initial labeled set is empty");
  for (std::size_t i = 1; i < months.size(); ++i) {
    if (!(months[i - 1].first < months[i].first)) {
      throw PreconditionError("run_stream: months are not in chronological order");
    }
  }

  RunResult run;
  run.seed = seed;
  RandomSource select_rng = RandomSource(seed).fork(7);
  const std::vector<LayerSpec> arch = model.architecture();

  std::vector<FeatureRecord> dl = labeled;
  std::vector<PoolEntry> du;
  du.reserve(unlabeled.size());
  for (const auto& r : unlabeled) du.push_back({r.id, r.features, r.month.ordinal()});

  std::unordered_set<std::string> labeled_ids;
  for (const auto& r : dl) labeled_ids.insert(r.id);

  const std::size_t initial_total = dl.size() + du.size();
  std::size_t streamed = 0;
  std::size_t dropped = 0;
  // Logical clock: month evaluation and sample labeling each take a tick.
  std::uint64_t clock = 0;
  std::map<int, std::uint64_t> evaluated_at;

  for (std::size_t mi = 0; mi < months.size(); ++mi) {
    const auto& [month, rows] = months[mi];
    const std::string tag = month.str();

    // 1. test-then-train: score the month before any of it can be labeled.
    for (const auto& r : rows) {
      run.invariants.expect(!labeled_ids.contains(r.id),
                            "month " + tag + ": sample " + r.id + " labeled before evaluation");
    }
    std::vector<int> truths;
    truths.reserve(rows.size());
    for (const auto& r : rows) truths.push_back(r.label);
    run.months.push_back(compute_metrics(predict_labels(model, rows), truths, tag));
    evaluated_at[month.ordinal()] = ++clock;

    // 2. grow the unlabeled pool.
    for (const auto& r : rows) du.push_back({r.id, r.features, month.ordinal()});
    streamed += rows.size();
    if (cfg.pool_window && du.size() > *cfg.pool_window) {
      const std::size_t excess = du.size() - *cfg.pool_window;
      du.erase(du.begin(), du.begin() + static_cast<std::ptrdiff_t>(excess));
      dropped += excess;
    }

    // 3. score and select.
    std::vector<std::size_t> picked;
    std::vector<SelectionScore> scores;
    if (cfg.budget > 0 && !du.empty()) {
      std::vector<FeatureVector> pool;
      pool.reserve(du.size());
      for (const auto& e : du) pool.push_back(e.features);
      const std::vector<FeatureVector> labeled_x = to_features(dl);
      const RowMatrix labeled_emb = embed_batch(model, labeled_x);
      Selection sel = select(pool, model, labeled_emb, cfg.selector, cfg.budget, select_rng);
      picked = std::move(sel.indices);
      scores = std::move(sel.scores);
    }

    // 4. oracle labels, move from pool to labeled set.
    std::vector<std::string> ids;
    std::vector<char> taken(du.size(), 0);
    for (std::size_t idx : picked) {
      const PoolEntry& e = du[idx];
      const auto it = oracle.find(e.id);
      if (it == oracle.end()) throw DataError("oracle has no label for sample " + e.id);
      const std::uint64_t label_time = ++clock;
      const auto ev = evaluated_at.find(e.month_ordinal);
      run.invariants.expect(ev == evaluated_at.end() || ev->second < label_time,
                            "sample " + e.id + " labeled before its month was evaluated");
      FeatureRecord rec;
      rec.id = e.id;
      rec.label = it->second;
      rec.features = e.features;
      rec.month = YearMonth{e.month_ordinal / 12, e.month_ordinal % 12 + 1};
      dl.push_back(std::move(rec));
      labeled_ids.insert(e.id);
      taken[idx] = 1;
      ids.push_back(e.id);
      run.audit.push_back({tag, e.id, scores[idx]});
    }
    const std::size_t before_labeled = dl.size() - picked.size();
    if (!picked.empty()) {
      std::vector<PoolEntry> kept;
      kept.reserve(du.size() - picked.size());
      for (std::size_t i = 0; i < du.size(); ++i) {
        if (!taken[i]) kept.push_back(std::move(du[i]));
      }
      du = std::move(kept);
    }

    std::size_t eligible = scores.size();
    if (cfg.selector.kind == SelectorKind::kLowConfidenceOnly) {
      eligible = static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [&](const SelectionScore& s) {
        return s.confidence < cfg.selector.low_confidence_cutoff;
      }));
    } else if (cfg.selector.kind == SelectorKind::kMultiCriteria && cfg.selector.intersection_quantile) {
      eligible = picked.size();
    }
    const std::size_t expected_growth = cfg.budget == 0 ? 0 : std::min(cfg.budget, eligible);
    run.invariants.expect(dl.size() == before_labeled + expected_growth,
                          "month " + tag + ": labeled set grew by " + std::to_string(dl.size() - before_labeled) +
                              ", expected " + std::to_string(expected_growth));
    run.invariants.expect(dl.size() + du.size() + dropped == initial_total + streamed,
                          "month " + tag + ": pool conservation violated");
    bool disjoint = true;
    for (const auto& e : du) disjoint = disjoint && !labeled_ids.contains(e.id);
    run.invariants.expect(disjoint && labeled_ids.size() == dl.size(),
                          "month " + tag + ": labeled and unlabeled sets overlap");

    // 5. retrain.
    if (!picked.empty() || cfg.retrain_without_new_labels) {
      TrainConfig tc = cfg.retrain;
      tc.seed = mix_seed(seed, 1000 + mi);
      if (!cfg.warm_start) model = Classifier::initialize(arch, mix_seed(seed, 2000 + mi));
      std::vector<FeatureVector> pool;
      pool.reserve(du.size());
      for (const auto& e : du) pool.push_back(e.features);
      train(model, to_labeled_set(dl), pool, tc);
    }

    run.selected_ids.push_back(std::move(ids));
    run.labeled_sizes.push_back(dl.size());
    run.unlabeled_sizes.push_back(du.size());
  }
  return run;
}

InitialState prepare_initial_state(const ExperimentData& data, const PipelineConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  if (data.train.empty()) throw DataError("training period contains no samples");
  LabelSplit split = label_ratio_split(data.train, cfg.label_ratio, mix_seed(seed, 11));
  if (split.labeled.empty()) throw DataError("label ratio leaves the labeled set empty");
  InitialState st;
  st.labeled = inject_label_noise(split.labeled, cfg.noise_rate, mix_seed(seed, 12));
  st.unlabeled = std::move(split.unlabeled);
  st.model = Classifier::initialize(mlp_architecture(data.feature_dim, cfg.hidden), mix_seed(seed, 13));
  TrainConfig tc = cfg.initial_train;
  tc.seed = mix_seed(seed, 14);
  st.report = train(st.model, to_labeled_set(st.labeled), to_features(st.unlabeled), tc);
  return st;
}

StreamResult run_pipeline(const ExperimentData& data, const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> runs;
  const Oracle oracle = ground_truth_oracle(data);
  for (std::uint64_t seed : cfg.stream.seeds) {
    InitialState st = prepare_initial_state(data, cfg, seed);
    runs.push_back(run_stream(std::move(st.model), st.labeled, st.unlabeled, data.stream, oracle,
                              cfg.stream, seed));
  }
  return summarize(std::move(runs), config_hash(to_json(cfg)));
}

std::vector<AblationCell> run_ablation_suite(const ExperimentData& data, const PipelineConfig& base,
                                             const std::vector<SelectorConfig>& selectors,
                                             const std::vector<std::size_t>& budgets) {
  base.validate();
  std::vector<AblationCell> cells;
  if (selectors.empty() || budgets.empty()) return cells;
  const Oracle oracle = ground_truth_oracle(data);

  std::vector<InitialState> initial;
  for (std::uint64_t seed : base.stream.seeds) initial.push_back(prepare_initial_state(data, base, seed));

  for (const auto& sel : selectors) {
    for (std::size_t budget : budgets) {
      PipelineConfig cfg = base;
      cfg.stream.selector = sel;
      cfg.stream.budget = budget;
      std::vector<RunResult> runs;
      for (std::size_t s = 0; s < base.stream.seeds.size(); ++s) {
        const InitialState& st = initial[s];
        runs.push_back(run_stream(st.model, st.labeled, st.unlabeled, data.stream, oracle, cfg.stream,
                                  base.stream.seeds[s]));
      }
      cells.push_back({sel, budget, summarize(std::move(runs), config_hash(to_json(cfg)))});
    }
  }
  return cells;
}

}  // namespace citadel
