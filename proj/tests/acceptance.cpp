// Acceptance suite. Prints one PASS/FAIL line per criterion and writes the
// measured numbers to <out>/acceptance.json (default ./acceptance_out).
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "citadel/augment.hpp"
#include "citadel/bench.hpp"
#include "citadel/hash.hpp"
#include "citadel/losses.hpp"
#include "citadel/report.hpp"
#include "citadel/stream.hpp"
#include "citadel/synth.hpp"
#include "citadel/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace citadel;
using namespace testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  int id = 0;
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pts(double fraction) { return fmt("%.2f", 100.0 * fraction); }

// ---------------------------------------------------------------- criterion 1

Matrix random_inputs(std::size_t rows, std::size_t cols, RandomSource& rng) {
  return random_matrix(rows, cols, rng, 0, 1);
}

std::vector<int> random_labels(std::size_t n, RandomSource& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(2));
  y[0] = 0;
  y[1] = 1;
  if (n > 3) y[2] = y[0];
  return y;
}

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  RandomSource rng(2024);
  double worst[4] = {0, 0, 0, 0};
  std::size_t checked = 0;
  std::size_t confident = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 5 + rng.below(4);
    const std::size_t n = 4 + rng.below(5);
    const Classifier model = random_net(d, {6, 4}, 500 + trial, 1.5);
    const Matrix lx = random_inputs(n, d, rng);
    const std::vector<int> y = random_labels(n, rng);
    const Matrix wx = random_inputs(n + 2, d, rng);
    const Matrix sx = random_inputs(n + 2, d, rng);
    const double tau = 0.55;

    auto record = [&](int which, const Gradients& g, const std::function<double(const Classifier&)>& f) {
      const GradCheck c = check_parameter_gradients(model, g, f);
      worst[which] = std::max(worst[which], c.max_rel_error);
      checked += c.checked;
    };

    // Cross-entropy.
    {
      Gradients g = zeros_like(model.layers());
      const BatchTrace t = forward_batch(model, lx);
      backward_batch(model, t, supervised_ce(t.probabilities, y).grad, nullptr, g);
      record(0, g, [&](const Classifier& m) { return supervised_ce(forward_batch(m, lx).probabilities, y).value; });
    }
    // Thresholded consistency; the pseudo-label carries no gradient.
    {
      Gradients g = zeros_like(model.layers());
      const BatchTrace w = forward_batch(model, wx);
      const BatchTrace s = forward_batch(model, sx);
      const ConsistencyResult c = consistency_loss(w.probabilities, s.logits, tau);
      confident += c.confident_count;
      backward_batch(model, s, c.grad, nullptr, g);
      record(1, g, [&](const Classifier& m) {
        return consistency_loss(forward_batch(m, wx).probabilities, forward_batch(m, sx).logits, tau).value;
      });
    }
    // Supervised contrastive on the embedding layer.
    {
      Gradients g = zeros_like(model.layers());
      const BatchTrace t = forward_batch(model, lx);
      const LossResult c = supervised_contrastive(t.embeddings(model), y, 0.07);
      backward_batch(model, t, Matrix::Zero(t.logits.rows(), 2), &c.grad, g);
      record(2, g, [&](const Classifier& m) {
        return supervised_contrastive(forward_batch(m, lx).embeddings(m), y, 0.07).value;
      });
    }
    // Combined objective.
    {
      LossConfig cfg;
      cfg.confidence_threshold = tau;
      const StepResult r = compute_step(model, lx, y, wx, sx, cfg);
      record(3, r.grads, [&](const Classifier& m) { return compute_step(m, lx, y, wx, sx, cfg).loss.total; });
    }
  }
  const double secs = seconds_since(t0);
  const double all = std::max({worst[0], worst[1], worst[2], worst[3]});
  Verdict v{1, all < 1e-4 && secs < 30.0 && confident > 0, {}};
  v.detail = "max rel error ce " + fmt("%.2e", worst[0]) + ", consistency " + fmt("%.2e", worst[1]) +
             ", contrastive " + fmt("%.2e", worst[2]) + ", combined " + fmt("%.2e", worst[3]) + " over " +
             std::to_string(checked) + " partials (limit 1e-4); " + fmt("%.1f s", secs) + " (limit 30 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 2

Verdict augmentation_calibration() {
  const auto t0 = Clock::now();
  const std::size_t n = 100000;
  bool ok = true;
  double worst_sigma = 0.0;
  const FeatureVector zeros(n, 0), ones(n, 1);
  auto count = [](const FeatureVector& x) {
    std::size_t c = 0;
    for (auto b : x) c += b;
    return static_cast<double>(c);
  };
  std::uint64_t seed = 1;
  for (double p : {0.01, 0.05, 0.5}) {
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    RandomSource r1(seed++), r2(seed++);
    const double flip = count(bernoulli_bit_flip(zeros, p, r1)) / n;
    const double mask = 1.0 - count(bernoulli_mask(ones, p, r2)) / n;
    for (double rate : {flip, mask}) {
      worst_sigma = std::max(worst_sigma, std::abs(rate - p) / sigma);
      ok = ok && std::abs(rate - p) <= 3.0 * sigma;
    }
  }
  RandomSource rng(99);
  const FeatureVector x = random_bits(1, 4096, rng).front();
  ok = ok && bernoulli_bit_flip(x, 0.0, rng) == x && bernoulli_mask(x, 0.0, rng) == x;
  const FeatureVector c = bernoulli_bit_flip(x, 1.0, rng);
  for (std::size_t i = 0; i < x.size(); ++i) ok = ok && c[i] == 1 - x[i];
  const double secs = seconds_since(t0);
  Verdict v{2, ok && secs < 5.0, {}};
  v.detail = "worst deviation " + fmt("%.2f", worst_sigma) + " sigma (limit 3); identity and complement exact: " +
             (ok ? "yes" : "no") + "; " + fmt("%.2f s", secs) + " (limit 5 s)";
  return v;
}

// ---------------------------------------------------------------- criterion 3

Verdict selection_oracles() {
  const auto t0 = Clock::now();
  RandomSource rng(77);
  std::size_t mismatches = 0, lp_mismatches = 0, selections = 0;
  for (int pool = 0; pool < 200; ++pool) {
    const std::size_t n = 10 + rng.below(491);
    const std::size_t d = 16;
    const std::size_t k = rng.below(n + 10);
    std::vector<Probabilities> probs;
    RowMatrix pe, le;
    std::optional<Classifier> model;
    std::vector<FeatureVector> xs;
    if (pool % 2 == 0) {
      // Scores from a network, the way the stream uses them.
      model = random_net(d, {12, 6}, 9000 + pool, 1.0);
      xs = random_bits(n, d, rng, 0.3);
      const auto ls = random_bits(1 + rng.below(40), d, rng, 0.3);
      const PoolView v = predict_and_embed(*model, xs);
      probs = v.probabilities;
      pe = v.embeddings;
      le = embed_batch(*model, ls);
    } else {
      // Coarse values to force ties in every criterion.
      const std::size_t levels = 2 + rng.below(5);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = 0.5 + 0.5 * static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
        probs.push_back({p, 1.0 - p});
      }
      pe = RowMatrix(static_cast<Eigen::Index>(n), 3);
      le = RowMatrix(static_cast<Eigen::Index>(1 + rng.below(20)), 3);
      for (Eigen::Index i = 0; i < pe.size(); ++i) pe.data()[i] = static_cast<double>(rng.below(3));
      for (Eigen::Index i = 0; i < le.size(); ++i) le.data()[i] = static_cast<double>(rng.below(3));
    }
    for (double p : {1.0, 2.0}) lp_mismatches += lp_distances(pe, le, p) != brute_force_lp(pe, le, p);

    for (auto kind : {SelectorKind::kMultiCriteria, SelectorKind::kMarginOnly, SelectorKind::kLpOnly,
                      SelectorKind::kLowConfidenceOnly, SelectorKind::kRandom}) {
      SelectorConfig cfg;
      cfg.kind = kind;
      cfg.p_norm = pool % 3 == 0 ? 1.0 : 2.0;
      if (pool % 5 == 0) {
        cfg.alpha = rng.uniform(0, 2);
        cfg.beta = rng.uniform(0, 2);
        cfg.gamma = rng.uniform(0.1, 2);
      }
      RandomSource a(pool), b(pool);
      const auto got = model ? select(xs, *model, le, cfg, k, a).indices
                             : select_from_scores(score_pool(probs, pe, le, cfg), cfg, k, a);
      const auto want = kind == SelectorKind::kRandom ? oracle_random(n, k, b) : oracle_select(probs, pe, le, cfg, k);
      mismatches += got != want;
      ++selections;
    }
  }
  const double secs = seconds_since(t0);
  Verdict v{3, mismatches == 0 && lp_mismatches == 0 && secs < 60.0, {}};
  v.detail = std::to_string(mismatches) + "/" + std::to_string(selections) + " selections differ from the oracle, " +
             std::to_string(lp_mismatches) + "/400 Lp vectors differ bitwise (p=1,2); " + fmt("%.1f s", secs) +
             " (limit 60 s)";
  return v;
}

// ------------------------------------------------------------- stream setup

// A 13-month stream: the first month trains, the next twelve are replayed.
ExperimentData acceptance_stream() {
  DriftGeneratorConfig g;
  g.dim = 200;
  g.months = 13;
  g.samples_per_class = 500;
  g.drift_rate = 0.15;
  g.seed = 1;
  g.overlap = 0.85;
  g.active_low = 0.05;
  g.active_high = 0.4;
  g.background_high = 0.01;
  g.shared_high = 0.05;
  const Dataset ds = synth_drift_generate(g);
  ExperimentData data;
  data.feature_dim = g.dim;
  auto groups = group_by_month(ds.records);
  data.train = groups.front().second;
  data.stream.assign(groups.begin() + 1, groups.end());
  return data;
}

PipelineConfig acceptance_pipeline() {
  PipelineConfig p;
  p.hidden = {64, 32};
  p.initial_train.epochs = 30;
  p.stream.retrain.epochs = 10;
  p.stream.seeds = {0, 1, 2, 3, 4};
  return p;
}

struct Ledger {
  std::size_t runs = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;

  void add(const StreamResult& r) {
    for (const auto& run : r.runs) {
      ++runs;
      checks += run.invariants.checks;
      violations += run.invariants.violations.size();
    }
  }
};

double month_mean(const StreamResult& r, std::size_t m) {
  double s = 0.0;
  for (const auto& run : r.runs) s += run.months[m].f1.value_or(0.0);
  return s / static_cast<double>(r.runs.size());
}

const StreamResult& cell(const std::vector<AblationCell>& cells, SelectorKind kind, std::size_t budget) {
  for (const auto& c : cells) {
    if (c.selector.kind == kind && c.budget == budget) return c.result;
  }
  throw std::logic_error("missing ablation cell");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);
  std::vector<Verdict> verdicts;
  json record;
  auto report = [&](Verdict v) {
    std::printf("criterion %d %s: %s\n", v.id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    record["criteria"][std::to_string(v.id)] = {{"pass", v.pass}, {"detail", v.detail}};
    verdicts.push_back(std::move(v));
  };

  report(gradient_suite());
  report(augmentation_calibration());
  report(selection_oracles());

  const ExperimentData data = acceptance_stream();
  const PipelineConfig base = acceptance_pipeline();
  const std::size_t last = data.stream.size() - 1;
  Ledger ledger;

  // Criterion 4: budget sweep with the multi-criteria selector.
  auto t0 = Clock::now();
  const auto budget_cells = run_ablation_suite(data, base, {SelectorConfig{}}, {0, 50, 200, 400});
  const double secs4 = seconds_since(t0);
  for (const auto& c : budget_cells) ledger.add(c.result);
  const StreamResult& fixed = cell(budget_cells, SelectorKind::kMultiCriteria, 0);
  const double f1_0 = fixed.mean_f1();
  const double f1_50 = cell(budget_cells, SelectorKind::kMultiCriteria, 50).mean_f1();
  const double f1_200 = cell(budget_cells, SelectorKind::kMultiCriteria, 200).mean_f1();
  const double f1_400 = cell(budget_cells, SelectorKind::kMultiCriteria, 400).mean_f1();
  const double decay = month_mean(fixed, 0) - month_mean(fixed, last);
  {
    const bool a = decay >= 0.15, b = f1_50 - f1_0 >= 0.10;
    const bool c = f1_400 >= f1_200 - 0.01 && f1_200 >= f1_50 - 0.01;
    Verdict v{4, a && b && c && secs4 < 600.0, {}};
    v.detail = "static F1 month 1 " + pts(month_mean(fixed, 0)) + " -> month 12 " + pts(month_mean(fixed, last)) +
               " (drop " + pts(decay) + ", need >= 15); k=50 " + pts(f1_50) + " vs static " + pts(f1_0) +
               " (gain " + pts(f1_50 - f1_0) + ", need >= 10); F1(400) " + pts(f1_400) + ", F1(200) " +
               pts(f1_200) + ", F1(50) " + pts(f1_50) + " (1-point tolerance); " + fmt("%.0f s", secs4) +
               " (limit 600 s)";
    report(std::move(v));
    record["budgets"] = {{"0", to_json(fixed)},
                         {"50", to_json(cell(budget_cells, SelectorKind::kMultiCriteria, 50))},
                         {"200", to_json(cell(budget_cells, SelectorKind::kMultiCriteria, 200))},
                         {"400", to_json(cell(budget_cells, SelectorKind::kMultiCriteria, 400))}};
  }

  // Criterion 5: selector ablation at k=50 on the same stream and seeds.
  t0 = Clock::now();
  std::vector<SelectorConfig> selectors;
  for (auto kind : {SelectorKind::kMultiCriteria, SelectorKind::kMarginOnly, SelectorKind::kLpOnly,
                    SelectorKind::kLowConfidenceOnly, SelectorKind::kRandom}) {
    SelectorConfig s;
    s.kind = kind;
    selectors.push_back(s);
  }
  const auto ablation = run_ablation_suite(data, base, selectors, {50});
  PipelineConfig no_con = base;
  no_con.initial_train.loss.lambda_con = 0.0;
  no_con.stream.retrain.loss.lambda_con = 0.0;
  const auto no_con_cells = run_ablation_suite(data, no_con, {SelectorConfig{}}, {50});
  const double secs5 = seconds_since(t0);
  for (const auto& c : ablation) ledger.add(c.result);
  ledger.add(no_con_cells.front().result);
  {
    const double multi = cell(ablation, SelectorKind::kMultiCriteria, 50).mean_f1();
    const double random = cell(ablation, SelectorKind::kRandom, 50).mean_f1();
    bool ordered = multi - random >= 0.03;
    std::string singles;
    json cells = json::object();
    for (const auto& c : ablation) {
      const double f = c.result.mean_f1();
      cells[to_string(c.selector.kind)] = f;
      if (c.selector.kind == SelectorKind::kMultiCriteria || c.selector.kind == SelectorKind::kRandom) continue;
      ordered = ordered && multi >= f && f >= random;
      singles += to_string(c.selector.kind) + " " + pts(f) + ", ";
    }
    const double with_con = multi, without_con = no_con_cells.front().result.mean_f1();
    const bool con_ok = with_con >= without_con - 0.01;
    Verdict v{5, ordered && con_ok && secs5 < 900.0, {}};
    v.detail = "multi " + pts(multi) + ", " + singles + "random " + pts(random) + " (need multi >= each single >= random, multi - random >= 3); lambda_con 0.5 " +
               pts(with_con) + " vs 0 " + pts(without_con) + " (1-point noise allowance); " + fmt("%.0f s", secs5) +
               " (limit 900 s)";
    report(std::move(v));
    cells["multi_lambda_con_0"] = without_con;
    record["selectors_k50"] = cells;
  }

  // Criterion 6: semi-supervised vs supervised-only initial training, scored
  // as the static model's mean F1 over the twelve replayed months.
  {
    PipelineConfig sup = base;
    sup.initial_train.loss.lambda_u = 0.0;
    sup.initial_train.loss.lambda_con = 0.0;
    PipelineConfig low = base;
    low.label_ratio = 0.1;
    const auto sup_cells = run_ablation_suite(data, sup, {SelectorConfig{}}, {0});
    const auto low_cells = run_ablation_suite(data, low, {SelectorConfig{}}, {0});
    ledger.add(sup_cells.front().result);
    ledger.add(low_cells.front().result);
    const double ssl = f1_0, supervised = sup_cells.front().result.mean_f1();
    const double ten = low_cells.front().result.mean_f1();
    Verdict v{6, ssl >= supervised && ssl >= ten, {}};
    v.detail = "40% labels: SSL " + pts(ssl) + " vs supervised-only " + pts(supervised) + "; SSL at 10% labels " +
               pts(ten);
    report(std::move(v));
    record["ssl"] = {{"ssl_40", ssl}, {"supervised_40", supervised}, {"ssl_10", ten}};
  }

  // Criterion 7: label noise on the initial labeled set, k=50 multi.
  {
    std::vector<double> f1s = {f1_50};
    std::string line = "0% " + pts(f1_50);
    for (int step = 1; step <= 5; ++step) {
      PipelineConfig p = base;
      p.noise_rate = 0.1 * step;
      p.stream.budget = 50;
      const StreamResult r = run_pipeline(data, p);
      ledger.add(r);
      f1s.push_back(r.mean_f1());
      line += ", " + std::to_string(10 * step) + "% " + pts(r.mean_f1());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < f1s.size(); ++i) monotone = monotone && f1s[i] <= f1s[i - 1] + 0.02;
    const double retained = f1s.back() / f1s.front();
    Verdict v{7, monotone && retained >= 0.6, {}};
    v.detail = line + " (2-point step tolerance); retained at 50%: " + fmt("%.1f%%", 100.0 * retained) +
               " (need >= 60%)";
    report(std::move(v));
    record["noise_f1"] = f1s;
  }

  // Criterion 8: every stream run above asserted its invariants in process.
  {
    Verdict v{8, ledger.violations == 0 && ledger.checks > 0, {}};
    v.detail = std::to_string(ledger.violations) + " violations in " + std::to_string(ledger.checks) +
               " checks across " + std::to_string(ledger.runs) + " runs";
    report(std::move(v));
  }

  // Criterion 9: counted operations of one train + retrain epoch.
  {
    BenchConfig bc;
    bc.hidden = base.hidden;
    const std::vector<std::size_t> sizes = {1000, 10000, 100000};
    const auto recs = bench(bc, sizes);
    write_bench_csv(out / "bench.csv", recs);
    std::ifstream csv(out / "bench.csv");
    std::string header;
    std::getline(csv, header);
    std::size_t lines = 0;
    for (std::string l; std::getline(csv, l);) lines += !l.empty();
    bool linear = header == "n,seconds,operations" && lines == sizes.size();
    std::string line;
    for (std::size_t i = 1; i < recs.size(); ++i) {
      const double ratio = static_cast<double>(recs[i].operations) / static_cast<double>(recs[i - 1].operations);
      const double expect = static_cast<double>(recs[i].n) / static_cast<double>(recs[i - 1].n);
      linear = linear && std::abs(ratio / expect - 1.0) <= 0.2;
      line += (i > 1 ? ", " : "") + std::string("ops ratio ") + std::to_string(recs[i].n) + "/" +
              std::to_string(recs[i - 1].n) + " = " + fmt("%.3f", ratio) + " (expect " + fmt("%.0f", expect) + ")";
    }
    Verdict v{9, linear, {}};
    v.detail = line + "; csv " + (out / "bench.csv").string();
    report(std::move(v));
  }

  write_json(out / "acceptance.json", record);
  std::size_t failed = 0;
  for (const auto& v : verdicts) failed += !v.pass;
  std::printf("%zu/%zu criteria passed\n", verdicts.size() - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
