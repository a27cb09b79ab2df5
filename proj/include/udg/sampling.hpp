#pragma once

#include "udg/rng.hpp"
#include "udg/tensor.hpp"

namespace udg {

// Tensor of standard normal draws.
Tensor standard_normal(const Shape& shape, Rng& rng);

// e = mu + sigma * eps with eps ~ N(0, 1) of mu's shape. eps is a constant,
// so gradients reach mu and sigma. Throws std::domain_error if any sigma <= 0.
Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& sigma, Rng& rng);

// Same with caller-supplied noise; eps may be (b, n) against rank-1 mu, sigma.
Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, const Tensor& eps);

}  // namespace udg
