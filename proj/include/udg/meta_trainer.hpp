#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "udg/augment.hpp"
#include "udg/checkpoint.hpp"
#include "udg/dataset.hpp"
#include "udg/model.hpp"
#include "udg/optimizer.hpp"
#include "udg/rng.hpp"

namespace udg {

enum class MetaGradMode { kFirstOrder, kExact };
enum class TauMode { kRelaxed, kHard };
enum class MixupMode { kLearned, kNone, kRandom };

struct Ablation {
  PerturbationMode perturbation = PerturbationMode::kLearned;
  MixupMode mixup = MixupMode::kLearned;
  bool no_adversarial = false;
  bool no_meta = false;       // theta trained on S and S+ jointly, no inner step
  bool no_min_phi_p = false;  // phi_p receives no gradient from the KL term
};

struct TrainConfig {
  double inner_lr = 0.1;  // alpha
  double outer_lr = 1e-3;
  int mc_samples = 15;  // K
  AdvConfig adv;
  double rho = 0.9;
  double kl_weight = 1.0;
  int iterations = 2000;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  MetaGradMode meta_grad = MetaGradMode::kFirstOrder;
  TauMode tau_mode = TauMode::kRelaxed;
  // Plain SGD diverges on the KL pull-back once sigma shrinks; see README.
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::vector<Index> hidden = {64, 64};
  std::vector<int> perturb_layers = {0};
  Index aux_hidden = 32;
  double sigma_floor = 1e-6;
  // Pins every mixup coefficient to this value when set.
  std::optional<double> force_lambda;
  Ablation ablation;

  void validate() const;
};

struct MetaStepReport {
  std::int64_t iteration = 0;
  double loss_train = 0.0;
  double loss_meta_test = 0.0;
  double kl = 0.0;
  std::vector<double> adversarial_trajectory;
  double mean_mu = 0.0;
  double mean_sigma = 0.0;
  double a = 0.0;
  double b = 0.0;
  double tau = 0.0;
  double wall_ms = 0.0;
};

struct NonFiniteLossError : std::runtime_error {
  NonFiniteLossError(const std::string& what, MetaStepReport report)
      : std::runtime_error(what), report(std::move(report)) {}
  MetaStepReport report;
};

struct TrainerState {
  Backbone backbone;
  PerturbNet pnet;
  MixupNet mnet;
  Optimizer optimizer;
  std::int64_t iteration = 0;
};

TrainerState init_state(const TrainConfig& cfg, Index input_dim, Index classes);

// theta, phi_p, phi_m in that order, with matching names.
std::vector<Tensor> all_parameters(const TrainerState& state);
std::vector<std::string> all_parameter_names(const TrainerState& state);

struct InnerAdaptation {
  Backbone adapted;  // theta* = theta - alpha * grad L(theta; S)
  Tensor loss;       // L(theta; S)
};

// `theta` must be watched on `tape`. In exact mode theta* stays differentiable
// through the inner gradient; in first-order mode the inner gradient is a
// constant.
InnerAdaptation inner_adapt(Tape& tape, const Backbone& theta, const Batch& batch, double alpha,
                            MetaGradMode mode);

Tensor kl_diag_gaussian(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p, const Tensor& sigma_p);
double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> sigma_q,
                        std::span<const double> mu_p, std::span<const double> sigma_p);

struct MetaTestResult {
  Tensor mc_loss;  // (1/K) sum_k CE(theta*; S+_k)
  Tensor kl;       // sum over perturbation layers
  double mean_mu = 0.0;
  double mean_sigma = 0.0;
  double a = 0.0, b = 0.0, tau = 0.0;
};

// Draws K perturbation and mixup samples, evaluates theta* on each and
// computes the KL of the current (mu, sigma) against the ones produced by
// `prior_pnet` on the same features.
MetaTestResult meta_test_loss(const Backbone& theta_star, const PerturbNet& pnet, const MixupNet& mnet,
                              const PerturbNet& prior_pnet, const Batch& batch, const TrainConfig& cfg,
                              Rng& rng);

// One pass of the meta-train / adversarial / meta-test / meta-update loop.
// Throws NonFiniteLossError if the objective or a gradient is not finite.
MetaStepReport meta_iteration(TrainerState& state, const Batch& batch, const TrainConfig& cfg);

struct TrainResult {
  TrainerState state;
  std::vector<MetaStepReport> history;
};

using CheckpointHook = std::function<void(const TrainerState&)>;

// Runs meta-iterations until state.iteration == cfg.iterations, starting from
// `resume` when given. `on_checkpoint` fires every `checkpoint_every` iterations.
TrainResult train(const TrainConfig& cfg, const DomainDataset& source, std::optional<TrainerState> resume = {},
                  const CheckpointHook& on_checkpoint = {}, int checkpoint_every = 0);

// Fine-tunes theta alone with full-batch SGD on cross-entropy.
Backbone few_shot_adapt(const Backbone& backbone, const DomainDataset& target, int steps, double lr);

// Checkpoint conversion. `config` is echoed verbatim into the document.
Checkpoint make_checkpoint(const TrainerState& state, const TrainConfig& cfg,
                           const std::map<std::string, std::string>& config);
TrainerState restore_state(const Checkpoint& ckpt, const TrainConfig& cfg);

}  // namespace udg
