#include "udg/meta_trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "udg/math.hpp"

namespace udg {

namespace {

constexpr std::uint64_t kAdversarialStream = 1;
constexpr std::uint64_t kMetaTestStream = 2;

bool learns_perturbation(PerturbationMode mode) { return mode != PerturbationMode::kRandomGaussian; }

// The distribution the perturbation is actually drawn from under an ablation.
GaussianParams effective_gaussian(const GaussianParams& g, PerturbationMode mode) {
  switch (mode) {
    case PerturbationMode::kRandomGaussian:
      return {Tensor::zeros(g.mu.shape()), Tensor::full(g.mu.shape(), 1.0)};
    case PerturbationMode::kRandomMu: return {Tensor::zeros(g.mu.shape()), g.sigma};
    case PerturbationMode::kRandomSigma: return {g.mu, Tensor::full(g.mu.shape(), 1.0)};
    case PerturbationMode::kLearned:
    case PerturbationMode::kDeterministic: return g;
  }
  return g;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, std::size_t from, std::size_t count) {
  return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(from),
                        v.begin() + static_cast<std::ptrdiff_t>(from + count));
}

bool all_finite(std::span<const Tensor> ts) {
  for (const Tensor& t : ts) {
    if (!t.value().allFinite()) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
  };
  require(inner_lr >= 0.0, "inner_lr must be >= 0");
  require(outer_lr > 0.0, "outer_lr must be > 0");
  require(mc_samples >= 1, "mc_samples must be >= 1");
  adv.validate();
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  require(kl_weight >= 0.0, "kl_weight must be >= 0");
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(!hidden.empty(), "at least one hidden layer is required");
  for (Index w : hidden) require(w >= 1, "hidden widths must be positive");
  require(!perturb_layers.empty(), "at least one perturbation layer is required");
  for (int l : perturb_layers) {
    require(l >= 0 && l < static_cast<int>(hidden.size()), "perturbation layers must index hidden layers");
  }
  require(aux_hidden >= 1, "aux_hidden must be positive");
  require(sigma_floor > 0.0, "sigma_floor must be > 0");
  if (force_lambda) require(*force_lambda >= 0.0 && *force_lambda <= 1.0, "force_lambda must lie in [0, 1]");
}

TrainerState init_state(const TrainConfig& cfg, Index input_dim, Index classes) {
  cfg.validate();
  std::vector<Index> widths = {input_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(classes);
  Rng backbone_rng = Rng(cfg.seed).split(stream_key("init.backbone"));
  Rng aux_rng = Rng(cfg.seed).split(stream_key("init.aux"));
  TrainerState state;
  state.backbone = Backbone::init(widths, cfg.perturb_layers, backbone_rng);
  state.pnet = PerturbNet::init(state.backbone, cfg.aux_hidden, cfg.sigma_floor, aux_rng);
  state.mnet = MixupNet::init(state.backbone.width(state.backbone.perturb_layers().front()), cfg.aux_hidden,
                              cfg.sigma_floor, aux_rng);
  state.optimizer = Optimizer(cfg.optimizer, cfg.outer_lr);
  return state;
}

std::vector<Tensor> all_parameters(const TrainerState& state) {
  std::vector<Tensor> out = state.backbone.parameters();
  for (const Tensor& t : state.pnet.parameters()) out.push_back(t);
  for (const Tensor& t : state.mnet.parameters()) out.push_back(t);
  return out;
}

std::vector<std::string> all_parameter_names(const TrainerState& state) {
  std::vector<std::string> out = state.backbone.parameter_names();
  for (const auto& n : state.pnet.parameter_names()) out.push_back(n);
  for (const auto& n : state.mnet.parameter_names()) out.push_back(n);
  return out;
}

InnerAdaptation inner_adapt(Tape& tape, const Backbone& theta, const Batch& batch, double alpha,
                            MetaGradMode mode) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("inner_adapt: alpha must be >= 0");
  const Tensor loss = softmax_cross_entropy(forward(theta, batch.inputs), batch.targets);
  const std::vector<Tensor> params = theta.parameters();
  BackwardOptions opts;
  opts.create_graph = mode == MetaGradMode::kExact;
  const std::vector<Tensor> grads = tape.backward(loss, params, opts);
  std::vector<Tensor> adapted;
  adapted.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) adapted.push_back(params[i] - scale(grads[i], alpha));
  return {theta.with_parameters(adapted), loss};
}

Tensor kl_diag_gaussian(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p, const Tensor& sigma_p) {
  if (mu_q.shape() != sigma_q.shape() || mu_q.shape() != mu_p.shape() || mu_q.shape() != sigma_p.shape()) {
    throw ShapeError("kl_diag_gaussian: parameter shapes differ");
  }
  if ((sigma_q.value().array() <= 0.0).any() || (sigma_p.value().array() <= 0.0).any()) {
    throw std::domain_error("kl_diag_gaussian: standard deviations must be positive");
  }
  const Tensor ratio = sigma_q * reciprocal(sigma_p);
  const Tensor diff = (mu_q - mu_p) * reciprocal(sigma_p);
  return sum(scale(ratio * ratio + diff * diff - Tensor::scalar(1.0), 0.5) - log(ratio));
}

double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> sigma_q,
                        std::span<const double> mu_p, std::span<const double> sigma_p) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  const auto n = static_cast<Index>(mu_q.size());
  if (sigma_q.size() != mu_q.size() || mu_p.size() != mu_q.size() || sigma_p.size() != mu_q.size()) {
    throw std::invalid_argument("kl_diag_gaussian: parameter lengths differ");
  }
  return math::kl_diag_gaussian(Vec(mu_q.data(), n), Vec(sigma_q.data(), n), Vec(mu_p.data(), n),
                                Vec(sigma_p.data(), n));
}

MetaTestResult meta_test_loss(const Backbone& theta_star, const PerturbNet& pnet, const MixupNet& mnet,
                              const PerturbNet& prior_pnet, const Batch& batch, const TrainConfig& cfg,
                              Rng& rng) {
  if (cfg.mc_samples < 1) throw std::invalid_argument("meta_test_loss: K must be >= 1");
  const Ablation& ab = cfg.ablation;
  const ForwardResult clean = forward_with_features(theta_star, batch.inputs);
  const int first = theta_star.perturb_layers().front();

  std::map<int, GaussianParams> q;
  Tensor kl = Tensor::scalar(0.0);
  for (const auto& [layer, h] : clean.features) {
    const GaussianParams current = infer_gaussian(pnet, layer, h);
    q.emplace(layer, current);
    if (!learns_perturbation(ab.perturbation)) continue;
    GaussianParams post = effective_gaussian(current, ab.perturbation);
    if (ab.no_min_phi_p) post = {post.mu.detach(), post.sigma.detach()};
    const GaussianParams prior =
        effective_gaussian(infer_gaussian(prior_pnet, layer, h.detach()), ab.perturbation);
    kl = kl + kl_diag_gaussian(post.mu, post.sigma, prior.mu.detach(), prior.sigma.detach());
  }

  MetaTestResult result;
  const GaussianParams& head = q.at(first);
  result.mean_mu = head.mu.value().mean();
  result.mean_sigma = head.sigma.value().mean();
  const GaussianParams mix_in = effective_gaussian(head, ab.perturbation);
  const MixupParams mix = infer_mixup_params(mnet, mix_in.mu, mix_in.sigma);
  result.a = mix.a.item();
  result.b = mix.b.item();
  result.tau = mix.tau.item();

  const Tensor& y = batch.targets;
  const Tensor smoothed = smooth_label(y, cfg.rho, y.shape()[1]);
  const Index n = batch.inputs.shape()[0];

  Tensor total = Tensor::scalar(0.0);
  for (int k = 0; k < cfg.mc_samples; ++k) {
    Rng sample_rng = rng.split(static_cast<std::uint64_t>(k));
    const std::map<int, Tensor> noise = draw_layer_noise(theta_star, n, sample_rng);

    Tensor lambda;
    if (cfg.force_lambda) {
      lambda = Tensor::scalar(*cfg.force_lambda);
    } else if (ab.mixup == MixupMode::kRandom) {
      lambda = Tensor::scalar(sample_lambda(1.0, 1.0, sample_rng));
    } else {
      lambda = sample_lambda(mix.a, mix.b, sample_rng);
    }

    Tensor lottery = mix.tau;
    if (cfg.tau_mode == TauMode::kHard) {
      const double hit = sample_rng.uniform() < mix.tau.item() ? 1.0 : 0.0;
      // Straight-through: forward value is the Bernoulli draw, gradient is tau's.
      lottery = mix.tau + Tensor::scalar(hit - mix.tau.item());
    }
    const Tensor y_tilde = lottery * smoothed + (Tensor::scalar(1.0) - lottery) * y;

    Tensor y_plus = y;
    const ForwardResult shifted = forward_hooked(theta_star, batch.inputs, [&](int layer, const Tensor& h) {
      const Tensor h_plus = perturb_features(h, q.at(layer), noise.at(layer), ab.perturbation).h_plus;
      if (layer != first || ab.mixup == MixupMode::kNone) return h_plus;
      MixedBatch mixed = mixup_domain(h, h_plus, y, y_tilde, lambda);
      y_plus = mixed.y_plus;
      return mixed.h_mix;
    });
    total = total + softmax_cross_entropy(shifted.logits, y_plus);
  }
  result.mc_loss = scale(total, 1.0 / static_cast<double>(cfg.mc_samples));
  result.kl = kl;
  return result;
}

MetaStepReport meta_iteration(TrainerState& state, const Batch& batch, const TrainConfig& cfg) {
  const Ablation& ab = cfg.ablation;
  MetaStepReport report;
  report.iteration = state.iteration;
  const Rng iteration_rng =
      Rng(cfg.seed).split(stream_key("iteration")).split(static_cast<std::uint64_t>(state.iteration));

  // Prior snapshot, then the adversarial ascent on phi_p.
  const PerturbNet prior = state.pnet;
  if (!ab.no_adversarial && learns_perturbation(ab.perturbation) && cfg.adv.steps > 0) {
    Rng adv_rng = iteration_rng.split(kAdversarialStream);
    report.adversarial_trajectory =
        adversarial_maximize(state.pnet, state.backbone, batch, cfg.adv, adv_rng, ab.perturbation);
  }

  Tape tape(cfg.meta_grad == MetaGradMode::kExact ? TapeMode::kSecondOrder : TapeMode::kFirstOrder);
  const std::vector<Tensor> params = tape.watch_all(all_parameters(state));
  const std::size_t n_theta = state.backbone.parameters().size();
  const std::size_t n_phi_p = state.pnet.parameters().size();
  const Backbone theta = state.backbone.with_parameters(take(params, 0, n_theta));
  const PerturbNet pnet = state.pnet.with_parameters(take(params, n_theta, n_phi_p));
  const MixupNet mnet = state.mnet.with_parameters(take(params, n_theta + n_phi_p, params.size() - n_theta - n_phi_p));

  Backbone theta_star = theta;
  Tensor train_loss;
  if (ab.no_meta) {
    train_loss = softmax_cross_entropy(forward(theta, batch.inputs), batch.targets);
  } else {
    InnerAdaptation inner = inner_adapt(tape, theta, batch, cfg.inner_lr, cfg.meta_grad);
    theta_star = std::move(inner.adapted);
    train_loss = inner.loss;
  }

  Rng test_rng = iteration_rng.split(kMetaTestStream);
  const MetaTestResult test = meta_test_loss(theta_star, pnet, mnet, prior, batch, cfg, test_rng);
  const Tensor objective = scale(train_loss + test.mc_loss, 0.5) + scale(test.kl, cfg.kl_weight);

  report.loss_train = train_loss.item();
  report.loss_meta_test = test.mc_loss.item();
  report.kl = test.kl.item();
  report.mean_mu = test.mean_mu;
  report.mean_sigma = test.mean_sigma;
  report.a = test.a;
  report.b = test.b;
  report.tau = test.tau;

  BackwardOptions opts;
  opts.allow_unused = true;
  opts.create_graph = false;
  const std::vector<Tensor> grads = tape.backward(objective, params, opts);
  if (!std::isfinite(objective.item()) || !all_finite(grads)) {
    throw NonFiniteLossError("non-finite objective at iteration " + std::to_string(state.iteration), report);
  }

  const std::vector<Tensor> updated = state.optimizer.step(params, grads);
  state.backbone = state.backbone.with_parameters(take(updated, 0, n_theta));
  state.pnet = state.pnet.with_parameters(take(updated, n_theta, n_phi_p));
  state.mnet = state.mnet.with_parameters(take(updated, n_theta + n_phi_p, updated.size() - n_theta - n_phi_p));
  ++state.iteration;
  return report;
}

TrainResult train(const TrainConfig& cfg, const DomainDataset& source, std::optional<TrainerState> resume,
                  const CheckpointHook& on_checkpoint, int checkpoint_every) {
  cfg.validate();
  source.validate();
  TrainResult result;
  result.state = resume ? std::move(*resume) : init_state(cfg, source.dim(), source.classes);
  while (result.state.iteration < cfg.iterations) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Index> idx = batch_indices(source.size(), cfg.batch_size, cfg.seed, result.state.iteration);
    MetaStepReport report = meta_iteration(result.state, make_batch(source, idx), cfg);
    report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(std::move(report));
    if (on_checkpoint && checkpoint_every > 0 && result.state.iteration % checkpoint_every == 0) {
      on_checkpoint(result.state);
    }
  }
  return result;
}

Backbone few_shot_adapt(const Backbone& backbone, const DomainDataset& target, int steps, double lr) {
  if (target.size() < 1) throw std::invalid_argument("few_shot_adapt: empty target set");
  if (steps < 0) throw std::invalid_argument("few_shot_adapt: steps must be >= 0");
  const Batch batch = full_batch(target);
  Backbone current = backbone;
  Optimizer sgd(OptimizerKind::kSgd, lr);
  for (int s = 0; s < steps; ++s) {
    Tape tape;
    const std::vector<Tensor> params = tape.watch_all(current.parameters());
    const Tensor loss = softmax_cross_entropy(forward(current.with_parameters(params), batch.inputs), batch.targets);
    const std::vector<Tensor> grads = tape.backward(loss, params);
    current = current.with_parameters(sgd.step(params, grads));
  }
  return current;
}

Checkpoint make_checkpoint(const TrainerState& state, const TrainConfig& cfg,
                           const std::map<std::string, std::string>& config) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.iteration = state.iteration;
  ckpt.rng_seed = cfg.seed;
  ckpt.rng_counter = static_cast<std::uint64_t>(state.iteration);
  const std::vector<Tensor> params = all_parameters(state);
  const std::vector<std::string> names = all_parameter_names(state);
  for (std::size_t i = 0; i < params.size(); ++i) ckpt.params.push_back({names[i], params[i].detach()});
  for (NamedTensor& t : state.optimizer.state(names)) ckpt.params.push_back(std::move(t));
  return ckpt;
}

TrainerState restore_state(const Checkpoint& ckpt, const TrainConfig& cfg) {
  const Tensor& w0 = ckpt.find("backbone.0.weight");
  const Tensor& w_last = ckpt.find("backbone." + std::to_string(cfg.hidden.size()) + ".weight");
  TrainerState state = init_state(cfg, w0.shape()[0], w_last.shape()[1]);
  const std::vector<std::string> names = all_parameter_names(state);
  std::vector<Tensor> values;
  values.reserve(names.size());
  for (const std::string& name : names) values.push_back(ckpt.find(name));

  const std::size_t n_theta = state.backbone.parameters().size();
  const std::size_t n_phi_p = state.pnet.parameters().size();
  try {
    state.backbone = state.backbone.with_parameters(take(values, 0, n_theta));
    state.pnet = state.pnet.with_parameters(take(values, n_theta, n_phi_p));
    state.mnet = state.mnet.with_parameters(take(values, n_theta + n_phi_p, values.size() - n_theta - n_phi_p));
    state.optimizer.restore(names, ckpt.params);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint does not match the configured model: ") + e.what());
  }
  state.iteration = ckpt.iteration;
  return state;
}

}  // namespace udg
