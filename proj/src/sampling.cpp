#include "udg/sampling.hpp"

#include <stdexcept>

namespace udg {

Tensor standard_normal(const Shape& shape, Rng& rng) {
  Tensor proto = Tensor::zeros(shape);
  Matrix m(proto.rows(), proto.cols());
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return Tensor(shape, std::move(m));
}

Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, const Tensor& eps) {
  if (mu.shape() != sigma.shape()) {
    throw ShapeError("gaussian_reparam: mu " + to_string(mu.shape()) + " and sigma " +
                     to_string(sigma.shape()) + " differ");
  }
  if ((sigma.value().array() <= 0.0).any()) {
    throw std::domain_error("gaussian_reparam: sigma must be strictly positive");
  }
  return mu + sigma * eps;
}

Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& sigma, Rng& rng) {
  return gaussian_reparam(mu, sigma, standard_normal(mu.shape(), rng));
}

}  // namespace udg
