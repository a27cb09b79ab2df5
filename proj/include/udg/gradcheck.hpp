#pragma once

#include <functional>
#include <span>
#include <vector>

#include "udg/tensor.hpp"

namespace udg {

// A scalar objective of the watched parameters. It may use the tape itself,
// e.g. to take an inner gradient step.
using ScalarObjective = std::function<Tensor(Tape&, std::span<const Tensor>)>;

// Max over all coordinates of |analytic - central| / (|central| + 1e-12),
// where the analytic gradient comes from a tape in `mode` and the central
// difference uses +/- `step` on one coordinate at a time.
double finite_diff_check(const ScalarObjective& f, std::span<const Tensor> params, double step,
                         TapeMode mode = TapeMode::kFirstOrder);

}  // namespace udg
