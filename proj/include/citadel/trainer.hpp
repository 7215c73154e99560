#pragma once

// Semi-supervised training loop: labeled cross-entropy, pseudo-label
// consistency between weak and strong views of unlabeled samples, and
// supervised contrastive loss on labeled embeddings, combined into one
// optimizer step per minibatch pair.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "citadel/augment.hpp"
#include "citadel/losses.hpp"
#include "citadel/net.hpp"
#include "citadel/random.hpp"

namespace citadel {

// Which set defines an epoch. kLabeled: every labeled sample once, unlabeled
// drawn cyclically. kUnlabeled: every unlabeled sample once, labeled drawn
// cyclically (used by the benchmark so work scales with pool size).
enum class EpochBasis { kLabeled, kUnlabeled };

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t labeled_batch = 64;
  std::size_t unlabeled_batch = 64;
  LossConfig loss;
  AugmentConfig augment;
  OptimizerSettings optimizer;
  LrSchedule schedule = LrSchedule::kConstant;
  EpochBasis epoch_basis = EpochBasis::kLabeled;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<LossBreakdown> epoch_losses;        // step-averaged per epoch
  std::vector<double> confident_fraction;          // confident / unlabeled seen
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
};

struct LabeledSet {
  std::vector<FeatureVector> features;
  std::vector<int> labels;

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
};

struct BatchPair {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

// Deterministic minibatch schedule over index ranges [0, n_labeled) and
// [0, n_unlabeled). The secondary set is consumed cyclically through a
// reshuffled permutation and its batch is capped at the set size.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t n_labeled, std::size_t n_unlabeled, const TrainConfig& cfg,
                   RandomSource rng);

  std::vector<BatchPair> next_epoch();

 private:
  std::vector<std::size_t> take_cyclic(std::vector<std::size_t>& order, std::size_t& cursor,
                                       std::size_t count);

  std::size_t n_labeled_;
  std::size_t n_unlabeled_;
  std::size_t labeled_batch_;
  std::size_t unlabeled_batch_;
  EpochBasis basis_;
  RandomSource rng_;
  std::vector<std::size_t> labeled_order_;
  std::vector<std::size_t> unlabeled_order_;
  std::size_t labeled_cursor_ = 0;
  std::size_t unlabeled_cursor_ = 0;
};

// Trains `model` in place. The optimizer state is created fresh for the
// call. Batching and augmentation draw from independent streams forked from
// cfg.seed, so an empty unlabeled set reproduces plain supervised training.
TrainReport train(Classifier& model, const LabeledSet& labeled,
                  const std::vector<FeatureVector>& unlabeled, const TrainConfig& cfg);

// Loss and gradient of one combined step; exposed for gradient checks.
struct StepResult {
  LossBreakdown loss;
  Gradients grads;
  std::size_t unlabeled_count = 0;
};

StepResult compute_step(const Classifier& model, const Matrix& labeled_x,
                        std::span<const int> labels, const Matrix& weak_x, const Matrix& strong_x,
                        const LossConfig& loss_cfg);

}  // namespace citadel
