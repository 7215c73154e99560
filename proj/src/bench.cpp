#include "citadel/bench.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "citadel/errors.hpp"
#include "citadel/synth.hpp"

namespace citadel {

void BenchConfig::validate() const {
  if (dim == 0) throw ConfigError("bench.dim must be positive");
  if (labeled_size < 2) throw ConfigError("bench.labeled_size must be at least 2");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("bench.hidden sizes must be positive");
  }
  selector.validate();
  train.validate();
}

std::vector<BenchRecord> bench(const BenchConfig& cfg, std::span<const std::size_t> sizes) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (std::size_t n : sizes) {
    DriftGeneratorConfig gen;
    gen.dim = cfg.dim;
    gen.months = 1;
    gen.samples_per_class = (n + cfg.labeled_size + 1) / 2;
    gen.drift_rate = 0.0;
    gen.seed = mix_seed(cfg.seed, n);
    const Dataset ds = synth_drift_generate(gen);

    LabeledSet labeled;
    std::vector<FeatureVector> pool;
    for (std::size_t i = 0; i < cfg.labeled_size + n; ++i) {
      if (i < cfg.labeled_size) {
        labeled.features.push_back(ds.records[i].features);
        labeled.labels.push_back(ds.records[i].label);
      } else {
        pool.push_back(ds.records[i].features);
      }
    }
    std::vector<int> pool_labels;
    for (std::size_t i = cfg.labeled_size; i < cfg.labeled_size + n; ++i) pool_labels.push_back(ds.records[i].label);

    Classifier model = Classifier::initialize(mlp_architecture(cfg.dim, cfg.hidden), mix_seed(cfg.seed, 1));
    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, 2);

    ops::reset();
    const auto t0 = std::chrono::steady_clock::now();
    train(model, labeled, pool, tc);

    RandomSource rng(mix_seed(cfg.seed, 3));
    const RowMatrix labeled_emb = embed_batch(model, labeled.features);
    const Selection sel = select(pool, model, labeled_emb, cfg.selector, cfg.budget, rng);
    std::vector<char> taken(pool.size(), 0);
    for (std::size_t idx : sel.indices) {
      labeled.features.push_back(pool[idx]);
      labeled.labels.push_back(pool_labels[idx]);
      taken[idx] = 1;
    }
    std::vector<FeatureVector> remaining;
    remaining.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i]) remaining.push_back(std::move(pool[i]));
    }
    tc.seed = mix_seed(cfg.seed, 4);
    train(model, labeled, remaining, tc);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back({n, seconds, ops::count()});
  }
  return out;
}

void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "n,seconds,operations\n";
  for (const auto& r : records) {
    out << r.n << ',' << std::fixed << std::setprecision(6) << r.seconds << ',' << r.operations << '\n';
  }
}

}  // namespace citadel
