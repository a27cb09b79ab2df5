#pragma once

#include <map>
#include <vector>

#include "udg/batch.hpp"
#include "udg/model.hpp"
#include "udg/rng.hpp"
#include "udg/tensor.hpp"

namespace udg {

// How e is formed from the learned (mu, sigma). kLearned is the full model;
// the others are the perturbation ablations.
enum class PerturbationMode {
  kLearned,         // e ~ N(mu, sigma)
  kRandomGaussian,  // e ~ N(0, 1), nothing learned
  kDeterministic,   // e = mu, no sampling
  kRandomMu,        // e ~ N(0, sigma)
  kRandomSigma,     // e ~ N(mu, 1)
};

struct PerturbedFeatures {
  Tensor h_plus;
  Tensor e;
};

// h_plus = h + softplus(e), e = gaussian_reparam_sample(mu, sigma) drawn per
// example: e has h's shape (b, n) and mu, sigma are (n).
PerturbedFeatures perturb_features(const Tensor& h, const Tensor& mu, const Tensor& sigma, Rng& rng);

// Same with fixed standard-normal noise `eps` of h's shape, under an ablation mode.
PerturbedFeatures perturb_features(const Tensor& h, const GaussianParams& params, const Tensor& eps,
                                   PerturbationMode mode = PerturbationMode::kLearned);

// rho on the true class, (1 - rho) / (c - 1) elsewhere. y must be one-hot (b, c).
Tensor smooth_label(const Tensor& y, double rho, Index classes);

// Kumaraswamy(a, b) draw through its inverse CDF at a fixed uniform u, so the
// result is differentiable in a and b.
Tensor kumaraswamy_sample(const Tensor& a, const Tensor& b, double u);

// lambda in (0, 1) with pathwise gradients to (a, b); a and b are scalars.
Tensor sample_lambda(const Tensor& a, const Tensor& b, Rng& rng);
double sample_lambda(double a, double b, Rng& rng);

struct MixedBatch {
  Tensor h_mix;
  Tensor y_plus;
};

// h_mix = lambda h + (1 - lambda) h_plus, y_plus = lambda y + (1 - lambda) y_tilde.
MixedBatch mixup_domain(const Tensor& h, const Tensor& h_plus, const Tensor& y, const Tensor& y_tilde,
                        const Tensor& lambda);

struct AugmentedBatch {
  std::map<int, Tensor> h_plus;
  Tensor y_plus;
  double lambda = 1.0;
  std::map<int, Tensor> noise;
  bool smoothing_applied = false;
};

struct AdvConfig {
  double beta = 1.0;
  int steps = 5;
  double lr = 1e-2;

  void validate() const;
};

// Noise for one adversarial call: standard normal per perturbation layer,
// shaped like that layer's features for `batch_size` examples.
std::map<int, Tensor> draw_layer_noise(const Backbone& backbone, Index batch_size, Rng& rng);

// L(theta; S+) - beta * mean_b ||z - z+||^2 with theta held constant and
// (mu, sigma) produced by `pnet` from the clean features.
Tensor adversarial_objective(const PerturbNet& pnet, const Backbone& backbone, const Batch& batch, double beta,
                             const std::map<int, Tensor>& noise,
                             PerturbationMode mode = PerturbationMode::kLearned);

// Gradient ascent on phi_p only. The noise is drawn once and frozen for all
// steps. Returns the objective before the first step followed by its value
// after each step (steps + 1 entries).
std::vector<double> adversarial_maximize(PerturbNet& pnet, const Backbone& backbone, const Batch& batch,
                                         const AdvConfig& cfg, Rng& rng,
                                         PerturbationMode mode = PerturbationMode::kLearned);

}  // namespace udg
