#pragma once

#include <span>
#include <string>
#include <vector>

#include "udg/model.hpp"
#include "udg/tensor.hpp"

namespace udg {

enum class OptimizerKind { kSgd, kAdam };

// Plain SGD or Adam over a fixed, ordered parameter list. Steps return new
// parameter values; tensors are never updated in place.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  OptimizerKind kind() const noexcept { return kind_; }
  double lr() const noexcept { return lr_; }
  long long steps() const noexcept { return steps_; }

  std::vector<Tensor> step(std::span<const Tensor> params, std::span<const Tensor> grads);

  // Moment buffers, prefixed per parameter name ("opt.m.<name>", "opt.v.<name>")
  // plus "opt.step". Empty for SGD.
  std::vector<NamedTensor> state(std::span<const std::string> names) const;
  void restore(std::span<const std::string> names, std::span<const NamedTensor> state);

 private:
  OptimizerKind kind_ = OptimizerKind::kSgd;
  double lr_ = 0.1;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long long steps_ = 0;
  std::vector<Shape> shapes_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace udg
