#pragma once

// Stochastic perturbations of binary feature vectors used as the weak and
// strong views for consistency training.

#include <optional>

#include "citadel/random.hpp"
#include "citadel/types.hpp"

namespace citadel {

enum class AugmentMode { kBernoulliBitFlip, kBernoulliMask, kFlipPlusMask, kUniformBitFlip };

struct AugmentConfig {
  AugmentMode mode = AugmentMode::kBernoulliBitFlip;
  double weak_prob = 0.01;
  double strong_prob = 0.05;
  // FlipPlusMask only. When unset the mask reuses the flip probability.
  std::optional<double> weak_mask_prob;
  std::optional<double> strong_mask_prob;

  void validate() const;
};

// x XOR n with n_i ~ Bernoulli(p).
FeatureVector bernoulli_bit_flip(const FeatureVector& x, double p, RandomSource& rng);

// x_i * m_i where m_i = 0 with probability q.
FeatureVector bernoulli_mask(const FeatureVector& x, double q, RandomSource& rng);

// x XOR n with n_i uniform on {0, 1}.
FeatureVector uniform_bit_flip(const FeatureVector& x, RandomSource& rng);

// Bernoulli(p) noise vector; bernoulli_bit_flip(x) == xor_bits(x, bernoulli_noise(...))
// for the same generator state.
FeatureVector bernoulli_noise(std::size_t d, double p, RandomSource& rng);
FeatureVector xor_bits(const FeatureVector& x, const FeatureVector& noise);

FeatureVector weak_view(const FeatureVector& x, const AugmentConfig& cfg, RandomSource& rng);
FeatureVector strong_view(const FeatureVector& x, const AugmentConfig& cfg, RandomSource& rng);

}  // namespace citadel
