#include "udg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "udg/math.hpp"
#include "udg/sampling.hpp"

namespace udg {

Tensor one_hot(std::span<const int> labels, Index classes) {
  if (labels.empty()) throw std::invalid_argument("one_hot: empty label list");
  Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::out_of_range("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    m(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return Tensor::matrix(std::move(m));
}

PerturbedFeatures perturb_features(const Tensor& h, const Tensor& mu, const Tensor& sigma, Rng& rng) {
  return perturb_features(h, GaussianParams{mu, sigma}, standard_normal(h.shape(), rng));
}

PerturbedFeatures perturb_features(const Tensor& h, const GaussianParams& params, const Tensor& eps,
                                   PerturbationMode mode) {
  if (eps.shape() != h.shape()) {
    throw ShapeError("perturb_features: noise " + to_string(eps.shape()) + " does not match features " +
                     to_string(h.shape()));
  }
  Tensor e;
  switch (mode) {
    case PerturbationMode::kLearned: e = gaussian_reparam(params.mu, params.sigma, eps); break;
    case PerturbationMode::kRandomGaussian: e = eps; break;
    case PerturbationMode::kDeterministic: e = Tensor::zeros(h.shape()) + params.mu; break;
    case PerturbationMode::kRandomMu:
      e = gaussian_reparam(Tensor::zeros(params.sigma.shape()), params.sigma, eps);
      break;
    case PerturbationMode::kRandomSigma:
      e = gaussian_reparam(params.mu, Tensor::full(params.mu.shape(), 1.0), eps);
      break;
  }
  return {h + softplus(e), e};
}

Tensor smooth_label(const Tensor& y, double rho, Index classes) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("smooth_label: rho must lie in (0, 1)");
  if (classes < 2) throw std::invalid_argument("smooth_label: need at least two classes");
  if (y.rank() != 2 || y.shape()[1] != classes) {
    throw ShapeError("smooth_label: labels " + to_string(y.shape()) + " do not have " + std::to_string(classes) +
                     " classes");
  }
  const double off = (1.0 - rho) / static_cast<double>(classes - 1);
  Matrix out(y.rows(), y.cols());
  for (Index r = 0; r < y.rows(); ++r) {
    int hot = 0;
    for (Index c = 0; c < classes; ++c) {
      const double v = y.value()(r, c);
      if (v == 1.0) {
        ++hot;
        out(r, c) = rho;
      } else if (v == 0.0) {
        out(r, c) = off;
      } else {
        hot = -1;
        break;
      }
    }
    if (hot != 1) throw std::invalid_argument("smooth_label: row " + std::to_string(r) + " is not one-hot");
  }
  return Tensor::matrix(std::move(out));
}

Tensor kumaraswamy_sample(const Tensor& a, const Tensor& b, double u) {
  if (a.rank() != 0 || b.rank() != 0) throw ShapeError("kumaraswamy_sample: a and b must be scalars");
  if (!(a.item() > 0.0) || !(b.item() > 0.0)) {
    throw std::domain_error("kumaraswamy_sample: shape parameters must be positive");
  }
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("kumaraswamy_sample: u must lie in (0, 1)");
  // (1 - u)^(1/b) = exp(log1p(-u) / b); lambda = (1 - that)^(1/a)
  const Tensor inner = exp(Tensor::scalar(std::log1p(-u)) * reciprocal(b));
  return exp(log(Tensor::scalar(1.0) - inner) * reciprocal(a));
}

namespace {
double draw_unit(Rng& rng) { return std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12); }
}  // namespace

Tensor sample_lambda(const Tensor& a, const Tensor& b, Rng& rng) { return kumaraswamy_sample(a, b, draw_unit(rng)); }

double sample_lambda(double a, double b, Rng& rng) {
  return math::kumaraswamy_quantile(draw_unit(rng), a, b);
}

MixedBatch mixup_domain(const Tensor& h, const Tensor& h_plus, const Tensor& y, const Tensor& y_tilde,
                        const Tensor& lambda) {
  if (lambda.rank() != 0) throw ShapeError("mixup_domain: lambda must be a scalar");
  const double l = lambda.item();
  if (!(l >= 0.0 && l <= 1.0)) throw std::domain_error("mixup_domain: lambda must lie in [0, 1]");
  if (h.shape() != h_plus.shape()) {
    throw ShapeError("mixup_domain: features " + to_string(h.shape()) + " and " + to_string(h_plus.shape()));
  }
  if (y.shape() != y_tilde.shape()) {
    throw ShapeError("mixup_domain: labels " + to_string(y.shape()) + " and " + to_string(y_tilde.shape()));
  }
  const Tensor rest = Tensor::scalar(1.0) - lambda;
  return {lambda * h + rest * h_plus, lambda * y + rest * y_tilde};
}

void AdvConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("AdvConfig: beta must be >= 0");
  if (steps < 0) throw std::invalid_argument("AdvConfig: steps must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("AdvConfig: lr must be > 0");
}

std::map<int, Tensor> draw_layer_noise(const Backbone& backbone, Index batch_size, Rng& rng) {
  std::map<int, Tensor> noise;
  for (int layer : backbone.perturb_layers()) {
    noise.emplace(layer, standard_normal({batch_size, backbone.width(layer)}, rng));
  }
  return noise;
}

Tensor adversarial_objective(const PerturbNet& pnet, const Backbone& backbone, const Batch& batch, double beta,
                             const std::map<int, Tensor>& noise, PerturbationMode mode) {
  const ForwardResult clean = forward_with_features(backbone, batch.inputs);
  std::map<int, GaussianParams> params;
  for (const auto& [layer, h] : clean.features) params.emplace(layer, infer_gaussian(pnet, layer, h));

  const ForwardResult shifted = forward_hooked(backbone, batch.inputs, [&](int layer, const Tensor& h) {
    return perturb_features(h, params.at(layer), noise.at(layer), mode).h_plus;
  });
  const Tensor task = softmax_cross_entropy(shifted.logits, batch.targets);
  const Tensor gap = mean(squared_distance(clean.z.detach(), shifted.z));
  return task - scale(gap, beta);
}

std::vector<double> adversarial_maximize(PerturbNet& pnet, const Backbone& backbone, const Batch& batch,
                                         const AdvConfig& cfg, Rng& rng, PerturbationMode mode) {
  cfg.validate();
  const std::map<int, Tensor> noise = draw_layer_noise(backbone, batch.inputs.shape()[0], rng);
  // Frozen backbone: untracked parameters never receive gradients.
  std::vector<Tensor> frozen;
  for (const Tensor& p : backbone.parameters()) frozen.push_back(p.detach());
  const Backbone theta = backbone.with_parameters(frozen);

  std::vector<double> trajectory;
  trajectory.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (int step = 0; step <= cfg.steps; ++step) {
    Tape tape;
    const std::vector<Tensor> params = tape.watch_all(pnet.parameters());
    const Tensor objective =
        adversarial_objective(pnet.with_parameters(params), theta, batch, cfg.beta, noise, mode);
    trajectory.push_back(objective.item());
    if (step == cfg.steps) break;
    BackwardOptions opts;
    opts.allow_unused = true;
    const std::vector<Tensor> grads = tape.backward(objective, params, opts);
    std::vector<Tensor> next;
    next.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      next.emplace_back(params[i].shape(), params[i].value() + cfg.lr * grads[i].value());
    }
    pnet = pnet.with_parameters(next);
  }
  return trajectory;
}

}  // namespace udg
