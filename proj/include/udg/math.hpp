#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

// Closed-form scalar helpers shared by the tape kernels, the samplers and the
// reporting code. Everything here is generic over the scalar type.
namespace udg::math {

template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

// Inverse CDF of Kumaraswamy(a, b): (1 - (1 - u)^(1/b))^(1/a).
template <typename Scalar>
Scalar kumaraswamy_quantile(Scalar u, Scalar a, Scalar b) {
  using std::expm1;
  using std::log1p;
  using std::pow;
  if (!(a > Scalar(0)) || !(b > Scalar(0))) {
    throw std::domain_error("kumaraswamy_quantile: shape parameters must be positive");
  }
  // 1 - (1-u)^(1/b) == -expm1(log1p(-u) / b), accurate for small u.
  return pow(-expm1(log1p(-u) / b), Scalar(1) / a);
}

// KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) summed over coordinates.
template <typename DerivedA, typename DerivedB, typename DerivedC, typename DerivedD>
typename DerivedA::Scalar kl_diag_gaussian(const Eigen::MatrixBase<DerivedA>& mu_q,
                                           const Eigen::MatrixBase<DerivedB>& sigma_q,
                                           const Eigen::MatrixBase<DerivedC>& mu_p,
                                           const Eigen::MatrixBase<DerivedD>& sigma_p) {
  using Scalar = typename DerivedA::Scalar;
  if ((sigma_q.array() <= Scalar(0)).any() || (sigma_p.array() <= Scalar(0)).any()) {
    throw std::domain_error("kl_diag_gaussian: standard deviations must be positive");
  }
  const auto ratio = sigma_q.array() / sigma_p.array();
  const auto diff = (mu_q.array() - mu_p.array()) / sigma_p.array();
  return (Scalar(0.5) * (ratio.square() + diff.square() - Scalar(1)) - ratio.log()).sum();
}

// |(sigma_target - sigma_source) / sigma_source|
template <typename Scalar>
Scalar domain_uncertainty_score(Scalar sigma_target, Scalar sigma_source) {
  using std::abs;
  if (!(sigma_source > Scalar(0))) {
    throw std::domain_error("domain_uncertainty_score: source sigma must be positive");
  }
  return abs((sigma_target - sigma_source) / sigma_source);
}

}  // namespace udg::math
