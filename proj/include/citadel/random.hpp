#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace citadel {

// Seeded deterministic generator shared by augmentation, batching,
// splitting and selection. Built on std::mt19937_64, whose output sequence
// is fixed by the standard; every derived draw below is implemented here
// rather than through <random> distributions so that sequences do not
// depend on the standard library vendor.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // True with probability p. p <= 0 never fires, p >= 1 always fires.
  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Independent child stream; the same (seed, stream_id) always yields the
  // same child.
  RandomSource fork(std::uint64_t stream_id) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

// splitmix64 finalizer, used to derive well-separated seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// 0..n-1
std::vector<std::size_t> iota_indices(std::size_t n);

}  // namespace citadel
