#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "udg/model.hpp"

namespace udg {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

// Serialized run state. The document is JSON with sorted keys; every array is
// stored as a string of space-separated decimals with 17 significant digits,
// which round-trips IEEE doubles exactly.
struct Checkpoint {
  int version = kCheckpointVersion;
  std::map<std::string, std::string> config;
  std::vector<NamedTensor> params;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;
  std::int64_t iteration = 0;

  const Tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace udg
