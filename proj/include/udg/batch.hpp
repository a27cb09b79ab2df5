#pragma once

#include <span>
#include <vector>

#include "udg/tensor.hpp"

namespace udg {

struct Batch {
  Tensor inputs;   // (b, d)
  Tensor targets;  // (b, classes), one-hot
  std::vector<int> labels;
};

Tensor one_hot(std::span<const int> labels, Index classes);

}  // namespace udg
