#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "udg/rng.hpp"
#include "udg/tensor.hpp"

namespace udg {

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out)
  Activation activation = Activation::kRelu;
};

// Named parameter with a flat row-major copy of its value.
struct NamedTensor {
  std::string name;
  Tensor value;
};

// Layered feed-forward classifier. The last layer is affine (identity
// activation); its output is the logit vector z. Perturbation layers index the
// post-activation output of a hidden layer.
class Backbone {
 public:
  Backbone() = default;
  Backbone(std::vector<DenseLayer> layers, std::vector<int> perturb_layers);

  // widths = {input, hidden..., classes}; relu on hidden layers, He-normal
  // weights and zero biases.
  static Backbone init(std::span<const Index> widths, std::vector<int> perturb_layers, Rng& rng);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const std::vector<int>& perturb_layers() const noexcept { return perturb_layers_; }
  Index input_dim() const;
  Index num_classes() const;
  Index width(int layer) const;

  // weight, bias for every layer in order.
  std::vector<Tensor> parameters() const;
  Backbone with_parameters(std::span<const Tensor> params) const;
  std::vector<std::string> parameter_names() const;

 private:
  std::vector<DenseLayer> layers_;
  std::vector<int> perturb_layers_;
};

struct ForwardResult {
  Tensor logits;
  Tensor z;  // pre-activation output of the last layer; equal to logits here
  std::map<int, Tensor> features;  // computed post-activation features per perturb layer
};

// Called at each perturbation layer with the computed feature; the returned
// tensor replaces it downstream.
using FeatureHook = std::function<Tensor(int layer, const Tensor& h)>;

ForwardResult forward_with_features(const Backbone& backbone, const Tensor& x,
                                    const std::map<int, Tensor>& injected = {});
ForwardResult forward_hooked(const Backbone& backbone, const Tensor& x, const FeatureHook& hook);
Tensor forward(const Backbone& backbone, const Tensor& x);

// Two-layer map: relu(in W1 + b1) W2 + b2 on a rank-1 input.
struct TwoLayerMap {
  Tensor w1, b1, w2, b2;

  static TwoLayerMap init(Index in, Index hidden, Index out, Rng& rng);
  Tensor operator()(const Tensor& in) const;
  Index input_dim() const { return w1.shape()[0]; }
  Index output_dim() const { return w2.shape()[1]; }
};

// Per-dimension batch mean and standard deviation, concatenated:
// (b, n) -> (2n). The std uses a 1e-8 variance offset.
Tensor batch_statistics(const Tensor& features);

struct GaussianParams {
  Tensor mu;     // (width)
  Tensor sigma;  // (width), strictly positive
};

// phi_p: for every perturbation layer, a map from the layer's batch statistics
// to (mu, sigma_raw) with sigma = softplus(sigma_raw) + floor.
class PerturbNet {
 public:
  PerturbNet() = default;
  static PerturbNet init(const Backbone& backbone, Index hidden, double floor, Rng& rng);

  bool has_layer(int layer) const { return heads_.count(layer) != 0; }
  std::vector<int> layers() const;
  double floor() const noexcept { return floor_; }
  const TwoLayerMap& head(int layer) const;

  std::vector<Tensor> parameters() const;
  PerturbNet with_parameters(std::span<const Tensor> params) const;
  std::vector<std::string> parameter_names() const;

 private:
  std::map<int, TwoLayerMap> heads_;
  double floor_ = 1e-6;
};

// (mu, sigma) for `layer` from features of shape (batch, width). The features
// enter only through their batch statistics, treated as constants.
GaussianParams infer_gaussian(const PerturbNet& pnet, int layer, const Tensor& features);

struct MixupParams {
  Tensor a;    // scalar > 0
  Tensor b;    // scalar > 0
  Tensor tau;  // scalar in (0, 1)
};

// phi_m: concat(mu, sigma) of the first perturbation layer -> (a_raw, b_raw, tau_raw).
class MixupNet {
 public:
  MixupNet() = default;
  static MixupNet init(Index width, Index hidden, double floor, Rng& rng);

  double floor() const noexcept { return floor_; }
  const TwoLayerMap& head() const noexcept { return head_; }
  std::vector<Tensor> parameters() const;
  MixupNet with_parameters(std::span<const Tensor> params) const;
  std::vector<std::string> parameter_names() const;

 private:
  TwoLayerMap head_;
  double floor_ = 1e-6;
};

MixupParams infer_mixup_params(const MixupNet& mnet, const Tensor& mu, const Tensor& sigma);

}  // namespace udg
