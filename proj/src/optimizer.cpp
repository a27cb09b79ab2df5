#include "udg/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace udg {

Optimizer::Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("Optimizer: learning rate must be positive");
}

std::vector<Tensor> Optimizer::step(std::span<const Tensor> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Optimizer::step: params/grads size mismatch");
  ++steps_;
  std::vector<Tensor> out;
  out.reserve(params.size());
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.emplace_back(params[i].shape(), params[i].value() - lr_ * grads[i].value());
    }
    return out;
  }
  if (m_.empty()) {
    for (const Tensor& p : params) {
      shapes_.push_back(p.shape());
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Optimizer::step: parameter list changed");
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i].value();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix update =
        (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    out.emplace_back(params[i].shape(), params[i].value() - lr_ * update);
  }
  return out;
}

std::vector<NamedTensor> Optimizer::state(std::span<const std::string> names) const {
  std::vector<NamedTensor> out;
  out.push_back({"opt.step", Tensor::scalar(static_cast<double>(steps_))});
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const Shape& shape = shapes_[i];
    out.push_back({"opt.m." + names[i], Tensor(shape, m_[i])});
    out.push_back({"opt.v." + names[i], Tensor(shape, v_[i])});
  }
  return out;
}

void Optimizer::restore(std::span<const std::string> names, std::span<const NamedTensor> state) {
  m_.clear();
  v_.clear();
  shapes_.clear();
  steps_ = 0;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    for (const NamedTensor& t : state) {
      if (t.name == name) return &t.value;
    }
    return nullptr;
  };
  if (const Tensor* s = lookup("opt.step")) steps_ = static_cast<long long>(s->item());
  if (kind_ != OptimizerKind::kAdam || steps_ == 0) return;
  for (const std::string& name : names) {
    const Tensor* m = lookup("opt.m." + name);
    const Tensor* v = lookup("opt.v." + name);
    if (!m || !v) throw std::invalid_argument("Optimizer::restore: missing moments for " + name);
    shapes_.push_back(m->shape());
    m_.push_back(m->value());
    v_.push_back(v->value());
  }
}

}  // namespace udg
