#include "udg/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "udg/rng.hpp"

namespace udg {

const char* family_name(ShiftFamily family) noexcept {
  switch (family) {
    case ShiftFamily::kRotation: return "rotation";
    case ShiftFamily::kTranslation: return "translation";
    case ShiftFamily::kNoise: return "noise";
    case ShiftFamily::kBlur: return "blur";
    case ShiftFamily::kContrast: return "contrast";
    case ShiftFamily::kOcclusion: return "occlusion";
  }
  return "unknown";
}

ShiftFamily parse_family(const std::string& name) {
  for (ShiftFamily f : {ShiftFamily::kRotation, ShiftFamily::kTranslation, ShiftFamily::kNoise, ShiftFamily::kBlur,
                        ShiftFamily::kContrast, ShiftFamily::kOcclusion}) {
    if (name == family_name(f)) return f;
  }
  throw std::invalid_argument("unknown shift family '" + name + "'");
}

void DomainDataset::validate() const {
  if (inputs.rank() != 2) throw ShapeError("DomainDataset: inputs must be (n, d)");
  if (static_cast<Index>(labels.size()) != inputs.shape()[0]) {
    throw std::invalid_argument("DomainDataset: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(inputs.shape()[0]) + " examples");
  }
  if (classes < 1) throw std::invalid_argument("DomainDataset: classes must be positive");
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw std::invalid_argument("DomainDataset: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
  if (!inputs.value().allFinite()) throw std::invalid_argument("DomainDataset: non-finite input");
  if (shift && (shift->severity < 1 || shift->severity > 5)) {
    throw std::invalid_argument("DomainDataset: severity must be in [1, 5]");
  }
}

Batch make_batch(const DomainDataset& data, std::span<const Index> indices) {
  Matrix x(static_cast<Index>(indices.size()), data.dim());
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    x.row(static_cast<Index>(i)) = data.inputs.value().row(indices[i]);
    labels.push_back(data.labels[indices[i]]);
  }
  Tensor targets = one_hot(labels, data.classes);
  return Batch{Tensor::matrix(std::move(x)), std::move(targets), std::move(labels)};
}

Batch full_batch(const DomainDataset& data) {
  return Batch{data.inputs.detach(), one_hot(data.labels, data.classes), data.labels};
}

DomainDataset subset(const DomainDataset& data, std::span<const Index> indices) {
  Batch b = make_batch(data, indices);
  DomainDataset out;
  out.inputs = b.inputs;
  out.labels = std::move(b.labels);
  out.classes = data.classes;
  out.domain_id = data.domain_id;
  out.shift = data.shift;
  return out;
}

namespace {

std::vector<Index> epoch_permutation(Index n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = Rng(seed).split(stream_key("batches")).split(static_cast<std::uint64_t>(epoch));
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace

std::vector<Index> batch_indices(Index n, Index batch_size, std::uint64_t seed, std::int64_t iteration) {
  if (n <= 0) throw std::invalid_argument("batch_indices: empty dataset");
  if (batch_size <= 0) throw std::invalid_argument("batch_indices: batch size must be positive");
  std::vector<Index> out;
  if (batch_size >= n) {
    out.resize(static_cast<std::size_t>(n));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
  }
  const std::int64_t start = iteration * batch_size;
  std::int64_t cached_epoch = -1;
  std::vector<Index> perm;
  for (Index j = 0; j < batch_size; ++j) {
    const std::int64_t pos = start + j;
    const std::int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      perm = epoch_permutation(n, seed, epoch);
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

void write_dataset(std::ostream& os, const DomainDataset& data) {
  os << data.size() << ' ' << data.dim() << ' ' << data.classes << '\n';
  char buf[32];
  const Matrix& x = data.inputs.value();
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", x(r, c));
      os << buf << ' ';
    }
    os << data.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

DomainDataset read_dataset(std::istream& is, const std::string& domain_id) {
  long long n = 0, d = 0, classes = 0;
  if (!(is >> n >> d >> classes) || n < 1 || d < 1 || classes < 1) {
    throw std::runtime_error("dataset: malformed header (expected 'n d classes')");
  }
  Matrix x(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (long long r = 0; r < n; ++r) {
    for (long long c = 0; c < d; ++c) {
      if (!(is >> x(r, c))) throw std::runtime_error("dataset: row " + std::to_string(r + 1) + " is truncated");
    }
    if (!(is >> labels[static_cast<std::size_t>(r)])) {
      throw std::runtime_error("dataset: row " + std::to_string(r + 1) + " has no label");
    }
  }
  DomainDataset out;
  out.inputs = Tensor::matrix(std::move(x));
  out.labels = std::move(labels);
  out.classes = classes;
  out.domain_id = domain_id;
  out.validate();
  return out;
}

void save_dataset(const DomainDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot write " + path.string());
  write_dataset(os, data);
  if (!os.flush()) throw std::runtime_error("dataset: write failed for " + path.string());
}

DomainDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("dataset: cannot read " + path.string());
  return read_dataset(is, path.stem().string());
}

}  // namespace udg
