#pragma once

// Informativeness scoring for budgeted label acquisition.
//
//   margin      M = p1 - p2 (top two class probabilities)
//   distance    D = min over labeled embeddings of ||f(x) - f(l)||_p
//   confidence  C = max class probability
//   hybrid      alpha (1 - M^) + beta D^ + gamma (1 - C^)
//
// where ^ is min-max normalisation across the scored pool.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citadel/net.hpp"
#include "citadel/random.hpp"
#include "citadel/types.hpp"

namespace citadel {

enum class SelectorKind { kMultiCriteria, kMarginOnly, kLpOnly, kLowConfidenceOnly, kRandom };

std::string to_string(SelectorKind kind);
SelectorKind selector_from_string(const std::string& name);

struct SelectorConfig {
  SelectorKind kind = SelectorKind::kMultiCriteria;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double p_norm = 2.0;
  double low_confidence_cutoff = 0.75;
  // When set (in (0,1]), MultiCriteria only considers samples that fall in
  // the most-informative q-quantile of all three criteria simultaneously.
  std::optional<double> intersection_quantile;

  void validate() const;
};

struct SelectionScore {
  double margin = 0.0;
  double lp_distance = 0.0;
  double confidence = 0.0;
  double margin_norm = 0.0;
  double distance_norm = 0.0;
  double confidence_norm = 0.0;
  double hybrid = 0.0;
};

std::vector<double> margin_scores(std::span<const Probabilities> probs);
std::vector<double> confidence_scores(std::span<const Probabilities> probs);

// Exact brute-force minimum L_p distance from each unlabeled row to any
// labeled row. Per pair, coordinates are accumulated in index order, so the
// result equals a naive double loop bit for bit.
std::vector<double> lp_distances(const RowMatrix& unlabeled, const RowMatrix& labeled,
                                 double p_norm);

// (v - min) / (max - min); all 0.5 when every value is equal.
std::vector<double> minmax_normalize(std::span<const double> values);

std::vector<double> hybrid_scores(std::span<const double> margin_norm,
                                  std::span<const double> distance_norm,
                                  std::span<const double> confidence_norm, double alpha,
                                  double beta, double gamma);

// Raw and normalised criteria for every pool entry. Distances are only
// computed when the selector needs them.
std::vector<SelectionScore> score_pool(std::span<const Probabilities> pool_probs,
                                       const RowMatrix& pool_embeddings,
                                       const RowMatrix& labeled_embeddings,
                                       const SelectorConfig& cfg);

// Ranks pre-computed scores and returns at most k pool indices in selection
// order. Ties always go to the lower pool index.
std::vector<std::size_t> select_from_scores(std::span<const SelectionScore> scores,
                                            const SelectorConfig& cfg, std::size_t k,
                                            RandomSource& rng);

struct Selection {
  std::vector<std::size_t> indices;
  std::vector<SelectionScore> scores;
};

// Scores `pool` with `model` and picks up to k samples.
Selection select(std::span<const FeatureVector> pool, const Classifier& model,
                 const RowMatrix& labeled_embeddings, const SelectorConfig& cfg, std::size_t k,
                 RandomSource& rng);

// Audit CSV: index,margin,lp_distance,confidence,hybrid,selected
void write_scores_csv(const std::filesystem::path& path, std::span<const SelectionScore> scores,
                      std::span<const std::size_t> selected);

}  // namespace citadel
