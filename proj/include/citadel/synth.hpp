#pragma once

// Synthetic month-by-month stream of binary feature vectors with covariate
// drift. Each feature has a per-class Bernoulli probability; a feature is
// either class-indicative (high probability for its owning class, near zero
// for the other) or shared (equal probability for both classes). Between
// consecutive months every feature is independently redrawn from that prior
// with probability drift_rate, so indicative features appear, vanish, and
// change owner over time.
//
// With families > 1 each class is a mixture of families. An indicative
// feature then belongs to one family of its owning class, and every family
// carries a mixing weight exp(U[-spread, spread]) that is itself redrawn
// with probability drift_rate each month, so small families emerge and fade.
//
// A fraction `ambiguous_fraction` of each class is drawn from one profile
// shared by both classes (gray samples whose label the features cannot
// determine). Its probabilities are U[0, active_high] and drift with the
// other features.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "citadel/dataset.hpp"

namespace citadel {

struct DriftGeneratorConfig {
  std::string name = "synthetic";
  std::size_t dim = 200;
  std::size_t months = 13;
  std::size_t samples_per_class = 500;
  // Malware records per month when the stream should be imbalanced;
  // unset means samples_per_class.
  std::optional<std::size_t> malware_per_month;
  double drift_rate = 0.15;
  // Fraction of features that are shared (non-indicative) when drawn.
  double overlap = 0.5;
  YearMonth start{2012, 1};
  std::uint64_t seed = 0;

  // Prior for indicative features: owner ~ U[active_low, active_high],
  // other class ~ U[0, background_high]. Shared: both ~ U[0, shared_high].
  double active_low = 0.05;
  double active_high = 0.5;
  double background_high = 0.02;
  double shared_high = 0.3;

  std::size_t families = 1;
  double family_weight_spread = 0.0;
  double ambiguous_fraction = 0.0;

  // Optional month-0 probabilities, [class][feature]; single-family only.
  // Empty = draw from prior.
  std::array<std::vector<double>, 2> initial_probabilities;

  void validate() const;
};

struct MonthProfile {
  // [class][family][feature]
  std::array<std::vector<std::vector<double>>, 2> theta;
  // [class][family], unnormalized
  std::array<std::vector<double>, 2> weights;
  std::vector<double> ambiguous;

  // Mixture probability of feature i for a class, gray samples excluded.
  double marginal(int label, std::size_t i) const;
};

// One profile per month.
std::vector<MonthProfile> drift_trajectory(const DriftGeneratorConfig& cfg);

// Deterministic per seed. Each month holds exactly samples_per_class benign
// and malware_per_month (default samples_per_class) malware records, shuffled.
Dataset synth_drift_generate(const DriftGeneratorConfig& cfg);

}  // namespace citadel
