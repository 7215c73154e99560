#pragma once

// Runtime and operation-count benchmark: for each pool size n, one epoch of
// semi-supervised training over the pool followed by one selection round
// and one retraining epoch. The labeled reference set has a fixed size, so
// the work is linear in n.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "citadel/selection.hpp"
#include "citadel/trainer.hpp"

namespace citadel {

struct BenchConfig {
  std::size_t dim = 200;
  std::vector<std::size_t> hidden = {512, 128};
  std::size_t labeled_size = 1000;
  std::size_t budget = 50;
  SelectorConfig selector;
  TrainConfig train = default_train();
  std::uint64_t seed = 0;

  static TrainConfig default_train() {
    TrainConfig t;
    t.epochs = 1;
    t.epoch_basis = EpochBasis::kUnlabeled;
    return t;
  }
  void validate() const;
};

struct BenchRecord {
  std::size_t n = 0;
  double seconds = 0.0;
  std::uint64_t operations = 0;
};

std::vector<BenchRecord> bench(const BenchConfig& cfg, std::span<const std::size_t> sizes);

// Columns: n,seconds,operations
void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRecord> records);

}  // namespace citadel
