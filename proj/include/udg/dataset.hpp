#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "udg/batch.hpp"
#include "udg/tensor.hpp"

namespace udg {

enum class ShiftFamily { kRotation, kTranslation, kNoise, kBlur, kContrast, kOcclusion };

const char* family_name(ShiftFamily family) noexcept;
ShiftFamily parse_family(const std::string& name);

struct ShiftSpec {
  ShiftFamily family = ShiftFamily::kNoise;
  int severity = 1;  // 1..5
};

// Labeled examples from one domain.
struct DomainDataset {
  Tensor inputs;  // (n, d)
  std::vector<int> labels;
  Index classes = 0;
  std::string domain_id;
  std::optional<ShiftSpec> shift;

  Index size() const { return inputs.shape()[0]; }
  Index dim() const { return inputs.shape()[1]; }
  void validate() const;
};

Batch make_batch(const DomainDataset& data, std::span<const Index> indices);
Batch full_batch(const DomainDataset& data);
DomainDataset subset(const DomainDataset& data, std::span<const Index> indices);

// Row indices of the minibatch for `iteration`. Examples are visited in
// per-epoch permutations drawn from the seed; a batch may straddle two epochs.
// batch_size >= n yields the whole dataset in order.
std::vector<Index> batch_indices(Index n, Index batch_size, std::uint64_t seed, std::int64_t iteration);

// Text format: first line "n d classes", then n lines of d reals followed by
// an integer label, whitespace-separated.
void write_dataset(std::ostream& os, const DomainDataset& data);
DomainDataset read_dataset(std::istream& is, const std::string& domain_id = "file");
void save_dataset(const DomainDataset& data, const std::filesystem::path& path);
DomainDataset load_dataset(const std::filesystem::path& path);

}  // namespace udg
