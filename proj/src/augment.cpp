#include "citadel/augment.hpp"

#include <cmath>
#include <string>

#include "citadel/errors.hpp"

namespace citadel {
namespace {

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must be in [0,1], got " + std::to_string(p));
  }
}

FeatureVector apply(const FeatureVector& x, const AugmentConfig& cfg, double prob,
                    std::optional<double> mask_prob, RandomSource& rng) {
  switch (cfg.mode) {
    case AugmentMode::kBernoulliBitFlip:
      return bernoulli_bit_flip(x, prob, rng);
    case AugmentMode::kBernoulliMask:
      return bernoulli_mask(x, prob, rng);
    case AugmentMode::kFlipPlusMask:
      return bernoulli_mask(bernoulli_bit_flip(x, prob, rng), mask_prob.value_or(prob), rng);
    case AugmentMode::kUniformBitFlip:
      return uniform_bit_flip(x, rng);
  }
  throw ConfigError("unknown augmentation mode");
}

}  // namespace

void AugmentConfig::validate() const {
  check_prob(weak_prob, "augment.weak_prob");
  check_prob(strong_prob, "augment.strong_prob");
  if (weak_prob > strong_prob) throw ConfigError("augment.weak_prob must not exceed augment.strong_prob");
  if (weak_mask_prob) check_prob(*weak_mask_prob, "augment.weak_mask_prob");
  if (strong_mask_prob) check_prob(*strong_mask_prob, "augment.strong_mask_prob");
  if (weak_mask_prob && strong_mask_prob && *weak_mask_prob > *strong_mask_prob) {
    throw ConfigError("augment.weak_mask_prob must not exceed augment.strong_mask_prob");
  }
}

FeatureVector bernoulli_noise(std::size_t d, double p, RandomSource& rng) {
  check_prob(p, "flip probability");
  FeatureVector n(d);
  for (auto& b : n) b = rng.bernoulli(p) ? 1 : 0;
  return n;
}

FeatureVector xor_bits(const FeatureVector& x, const FeatureVector& noise) {
  if (x.size() != noise.size()) throw ShapeError("noise length differs from feature length");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<std::uint8_t>((x[i] ^ noise[i]) & 1U);
  return out;
}

FeatureVector bernoulli_bit_flip(const FeatureVector& x, double p, RandomSource& rng) {
  return xor_bits(x, bernoulli_noise(x.size(), p, rng));
}

FeatureVector bernoulli_mask(const FeatureVector& x, double q, RandomSource& rng) {
  check_prob(q, "mask probability");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool zeroed = rng.bernoulli(q);
    out[i] = zeroed ? 0 : x[i];
  }
  return out;
}

FeatureVector uniform_bit_flip(const FeatureVector& x, RandomSource& rng) {
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(x[i] ^ (rng.next_u64() >> 63));
  }
  return out;
}

FeatureVector weak_view(const FeatureVector& x, const AugmentConfig& cfg, RandomSource& rng) {
  return apply(x, cfg, cfg.weak_prob, cfg.weak_mask_prob, rng);
}

FeatureVector strong_view(const FeatureVector& x, const AugmentConfig& cfg, RandomSource& rng) {
  return apply(x, cfg, cfg.strong_prob, cfg.strong_mask_prob, rng);
}

}  // namespace citadel
