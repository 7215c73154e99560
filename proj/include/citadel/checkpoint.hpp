#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "citadel/net.hpp"

namespace citadel {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Classifier model;
  std::optional<OptimizerState> optimizer;
  std::uint64_t seed = 0;
};

// JSON container. Doubles are written in shortest round-trip form, so
// save -> load reproduces every parameter bit for bit.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace citadel
