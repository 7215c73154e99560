#include "citadel/synth.hpp"

#include <cmath>
#include <cstdio>

#include "citadel/errors.hpp"

namespace citadel {
namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("generator.") + name + " must be in [0,1]");
}

void redraw_feature(const DriftGeneratorConfig& cfg, MonthProfile& prof, std::size_t i, RandomSource& rng) {
  if (cfg.ambiguous_fraction > 0.0) prof.ambiguous[i] = rng.uniform(0.0, cfg.active_high);
  if (rng.bernoulli(cfg.overlap)) {
    const double p = rng.uniform(0.0, cfg.shared_high);
    for (auto& cls : prof.theta) {
      for (auto& fam : cls) fam[i] = p;
    }
    return;
  }
  const std::size_t owner = rng.bernoulli(0.5) ? 1 : 0;
  const std::size_t owner_family = rng.below(cfg.families);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t f = 0; f < cfg.families; ++f) {
      prof.theta[c][f][i] = (c == owner && f == owner_family) ? rng.uniform(cfg.active_low, cfg.active_high)
                                                              : rng.uniform(0.0, cfg.background_high);
    }
  }
}

double draw_weight(const DriftGeneratorConfig& cfg, RandomSource& rng) {
  if (cfg.family_weight_spread == 0.0) return 1.0;
  return std::exp(rng.uniform(-cfg.family_weight_spread, cfg.family_weight_spread));
}

std::size_t draw_family(const std::vector<double>& weights, RandomSource& rng) {
  if (weights.size() == 1) return 0;
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t f = 0; f + 1 < weights.size(); ++f) {
    if (u < weights[f]) return f;
    u -= weights[f];
  }
  return weights.size() - 1;
}

}  // namespace

double MonthProfile::marginal(int label, std::size_t i) const {
  const auto& fams = theta[static_cast<std::size_t>(label)];
  const auto& w = weights[static_cast<std::size_t>(label)];
  double total = 0.0, acc = 0.0;
  for (std::size_t f = 0; f < fams.size(); ++f) {
    total += w[f];
    acc += w[f] * fams[f][i];
  }
  return acc / total;
}

void DriftGeneratorConfig::validate() const {
  if (dim == 0) throw ConfigError("generator.dim must be positive");
  if (months == 0) throw ConfigError("generator.months must be positive");
  if (families == 0) throw ConfigError("generator.families must be positive");
  if (!(family_weight_spread >= 0.0 && family_weight_spread <= 20.0)) {
    throw ConfigError("generator.family_weight_spread must be in [0,20]");
  }
  check_unit(drift_rate, "drift_rate");
  check_unit(ambiguous_fraction, "ambiguous_fraction");
  check_unit(overlap, "overlap");
  check_unit(active_low, "active_low");
  check_unit(active_high, "active_high");
  check_unit(background_high, "background_high");
  check_unit(shared_high, "shared_high");
  if (active_low > active_high) throw ConfigError("generator.active_low must not exceed active_high");
  if (initial_probabilities[0].empty() != initial_probabilities[1].empty()) {
    throw ConfigError("generator.initial_probabilities needs both classes or neither");
  }
  if (!initial_probabilities[0].empty() && families != 1) {
    throw ConfigError("generator.initial_probabilities requires families = 1");
  }
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& p = initial_probabilities[c];
    if (p.empty()) continue;
    if (p.size() != dim) throw ConfigError("generator.initial_probabilities rows must have dim entries");
    for (double v : p) check_unit(v, "initial_probabilities");
  }
}

std::vector<MonthProfile> drift_trajectory(const DriftGeneratorConfig& cfg) {
  cfg.validate();
  RandomSource rng = RandomSource(cfg.seed).fork(1);
  MonthProfile prof;
  if (cfg.ambiguous_fraction > 0.0) prof.ambiguous.assign(cfg.dim, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    prof.theta[c].assign(cfg.families, std::vector<double>(cfg.dim, 0.0));
    prof.weights[c].assign(cfg.families, 1.0);
  }
  if (!cfg.initial_probabilities[0].empty()) {
    prof.theta[0][0] = cfg.initial_probabilities[0];
    prof.theta[1][0] = cfg.initial_probabilities[1];
  } else {
    for (std::size_t i = 0; i < cfg.dim; ++i) redraw_feature(cfg, prof, i, rng);
  }
  for (auto& w : prof.weights) {
    for (double& x : w) x = draw_weight(cfg, rng);
  }
  std::vector<MonthProfile> out;
  out.reserve(cfg.months);
  out.push_back(prof);
  for (std::size_t t = 1; t < cfg.months; ++t) {
    for (std::size_t i = 0; i < cfg.dim; ++i) {
      if (rng.bernoulli(cfg.drift_rate)) redraw_feature(cfg, prof, i, rng);
    }
    if (cfg.families > 1) {
      for (auto& w : prof.weights) {
        for (double& x : w) {
          if (rng.bernoulli(cfg.drift_rate)) x = draw_weight(cfg, rng);
        }
      }
    }
    out.push_back(prof);
  }
  return out;
}

Dataset synth_drift_generate(const DriftGeneratorConfig& cfg) {
  const std::vector<MonthProfile> traj = drift_trajectory(cfg);
  RandomSource rng = RandomSource(cfg.seed).fork(2);
  Dataset ds;
  ds.name = cfg.name;
  ds.feature_dim = cfg.dim;
  const std::array<std::size_t, 2> counts = {cfg.samples_per_class,
                                             cfg.malware_per_month.value_or(cfg.samples_per_class)};
  ds.records.reserve(cfg.months * (counts[0] + counts[1]));
  YearMonth month = cfg.start;
  for (std::size_t t = 0; t < cfg.months; ++t, month = month.next()) {
    std::vector<FeatureRecord> rows;
    rows.reserve(counts[0] + counts[1]);
    for (int label = 0; label < 2; ++label) {
      const auto c = static_cast<std::size_t>(label);
      for (std::size_t s = 0; s < counts[c]; ++s) {
        const bool gray = cfg.ambiguous_fraction > 0.0 && rng.bernoulli(cfg.ambiguous_fraction);
        const std::size_t fam = gray ? 0 : draw_family(traj[t].weights[c], rng);
        const auto& theta = gray ? traj[t].ambiguous : traj[t].theta[c][fam];
        FeatureRecord r;
        r.month = month;
        r.label = label;
        if (gray) {
          r.family = "gray";
        } else if (cfg.families > 1) {
          r.family = (label == kMalware ? "m" : "b") + std::to_string(fam);
        }
        r.features.resize(cfg.dim);
        for (std::size_t i = 0; i < cfg.dim; ++i) r.features[i] = rng.bernoulli(theta[i]) ? 1 : 0;
        rows.push_back(std::move(r));
      }
    }
    rng.shuffle(rows);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05zu", month.str().c_str(), k);
      rows[k].id = id;
      ds.records.push_back(std::move(rows[k]));
    }
  }
  return ds;
}

}  // namespace citadel
