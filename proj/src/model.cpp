#include "udg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "udg/sampling.hpp"

namespace udg {

namespace {

Tensor normal_tensor(const Shape& shape, double sd, Rng& rng) {
  Tensor eps = standard_normal(shape, rng);
  return Tensor(shape, eps.value() * sd);
}

Tensor activate(const Tensor& pre, Activation act) {
  return act == Activation::kRelu ? relu(pre) : pre;
}

}  // namespace

Backbone::Backbone(std::vector<DenseLayer> layers, std::vector<int> perturb_layers)
    : layers_(std::move(layers)), perturb_layers_(std::move(perturb_layers)) {
  if (layers_.empty()) throw std::invalid_argument("Backbone: at least one layer is required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.weight.rank() != 2 || layer.bias.rank() != 1 || layer.bias.shape()[0] != layer.weight.shape()[1]) {
      throw ShapeError("Backbone: layer " + std::to_string(l) + " has weight " + to_string(layer.weight.shape()) +
                       " and bias " + to_string(layer.bias.shape()));
    }
    if (l > 0 && layers_[l - 1].weight.shape()[1] != layer.weight.shape()[0]) {
      throw ShapeError("Backbone: layer " + std::to_string(l - 1) + " output does not chain into layer " +
                       std::to_string(l));
    }
  }
  if (layers_.back().activation != Activation::kIdentity) {
    throw std::invalid_argument("Backbone: the last layer must have identity activation");
  }
  std::sort(perturb_layers_.begin(), perturb_layers_.end());
  perturb_layers_.erase(std::unique(perturb_layers_.begin(), perturb_layers_.end()), perturb_layers_.end());
  for (int l : perturb_layers_) {
    if (l < 0 || l + 1 >= static_cast<int>(layers_.size())) {
      throw std::invalid_argument("Backbone: perturbation layer " + std::to_string(l) + " is not a hidden layer");
    }
  }
}

Backbone Backbone::init(std::span<const Index> widths, std::vector<int> perturb_layers, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Backbone::init: need input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index in = widths[l], out = widths[l + 1];
    const bool last = l + 2 == widths.size();
    layers.push_back(DenseLayer{normal_tensor({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng),
                                Tensor::zeros({out}), last ? Activation::kIdentity : Activation::kRelu});
  }
  return Backbone(std::move(layers), std::move(perturb_layers));
}

Index Backbone::input_dim() const { return layers_.front().weight.shape()[0]; }
Index Backbone::num_classes() const { return layers_.back().weight.shape()[1]; }

Index Backbone::width(int layer) const {
  if (layer < 0 || layer >= static_cast<int>(layers_.size())) {
    throw std::out_of_range("Backbone::width: no layer " + std::to_string(layer));
  }
  return layers_[layer].weight.shape()[1];
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (const DenseLayer& layer : layers_) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

Backbone Backbone::with_parameters(std::span<const Tensor> params) const {
  if (params.size() != 2 * layers_.size()) {
    throw std::invalid_argument("Backbone::with_parameters: expected " + std::to_string(2 * layers_.size()) +
                                " tensors, got " + std::to_string(params.size()));
  }
  Backbone out = *this;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (params[2 * l].shape() != layers_[l].weight.shape() || params[2 * l + 1].shape() != layers_[l].bias.shape()) {
      throw ShapeError("Backbone::with_parameters: shape mismatch at layer " + std::to_string(l));
    }
    out.layers_[l].weight = params[2 * l];
    out.layers_[l].bias = params[2 * l + 1];
  }
  return out;
}

std::vector<std::string> Backbone::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back("backbone." + std::to_string(l) + ".weight");
    out.push_back("backbone." + std::to_string(l) + ".bias");
  }
  return out;
}

ForwardResult forward_hooked(const Backbone& backbone, const Tensor& x, const FeatureHook& hook) {
  if (x.rank() != 2 || x.shape()[1] != backbone.input_dim()) {
    throw ShapeError("forward: input of shape " + to_string(x.shape()) + " does not match input width " +
                     std::to_string(backbone.input_dim()));
  }
  ForwardResult result;
  const auto& layers = backbone.layers();
  const auto& perturbed = backbone.perturb_layers();
  Tensor h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor pre = matmul(h, layers[l].weight) + layers[l].bias;
    if (l + 1 == layers.size()) {
      result.z = pre;
      result.logits = pre;
      break;
    }
    h = activate(pre, layers[l].activation);
    const int li = static_cast<int>(l);
    if (std::binary_search(perturbed.begin(), perturbed.end(), li)) {
      result.features.emplace(li, h);
      if (hook) h = hook(li, h);
    }
  }
  return result;
}

ForwardResult forward_with_features(const Backbone& backbone, const Tensor& x,
                                    const std::map<int, Tensor>& injected) {
  const auto& perturbed = backbone.perturb_layers();
  for (const auto& [layer, value] : injected) {
    if (!std::binary_search(perturbed.begin(), perturbed.end(), layer)) {
      throw std::invalid_argument("forward_with_features: layer " + std::to_string(layer) +
                                  " is not a perturbation layer");
    }
  }
  if (injected.empty()) return forward_hooked(backbone, x, {});
  return forward_hooked(backbone, x, [&](int layer, const Tensor& h) {
    auto it = injected.find(layer);
    if (it == injected.end()) return h;
    if (it->second.shape() != h.shape()) {
      throw ShapeError("forward_with_features: injected feature " + to_string(it->second.shape()) +
                       " at layer " + std::to_string(layer) + " does not match " + to_string(h.shape()));
    }
    return it->second;
  });
}

Tensor forward(const Backbone& backbone, const Tensor& x) { return forward_hooked(backbone, x, {}).logits; }

TwoLayerMap TwoLayerMap::init(Index in, Index hidden, Index out, Rng& rng) {
  return TwoLayerMap{normal_tensor({in, hidden}, 1.0 / std::sqrt(static_cast<double>(in)), rng),
                     Tensor::zeros({hidden}), Tensor::zeros({hidden, out}), Tensor::zeros({out})};
}

Tensor TwoLayerMap::operator()(const Tensor& in) const {
  if (in.rank() != 1 || in.shape()[0] != input_dim()) {
    throw ShapeError("TwoLayerMap: input " + to_string(in.shape()) + " does not match width " +
                     std::to_string(input_dim()));
  }
  const Tensor row = reshape(in, {1, input_dim()});
  const Tensor hidden = relu(matmul(row, w1) + b1);
  return reshape(matmul(hidden, w2) + b2, {output_dim()});
}

Tensor batch_statistics(const Tensor& features) {
  if (features.rank() != 2) {
    throw ShapeError("batch_statistics: expected (batch, width), got " + to_string(features.shape()));
  }
  const Tensor m = batch_mean(features);
  const Tensor centered = features - m;
  const Tensor sd = sqrt(batch_mean(centered * centered) + Tensor::scalar(1e-8));
  return concat(m, sd);
}

PerturbNet PerturbNet::init(const Backbone& backbone, Index hidden, double floor, Rng& rng) {
  if (!(floor > 0.0)) throw std::invalid_argument("PerturbNet: floor must be positive");
  PerturbNet net;
  net.floor_ = floor;
  for (int layer : backbone.perturb_layers()) {
    const Index w = backbone.width(layer);
    net.heads_.emplace(layer, TwoLayerMap::init(2 * w, hidden, 2 * w, rng));
  }
  return net;
}

std::vector<int> PerturbNet::layers() const {
  std::vector<int> out;
  for (const auto& kv : heads_) out.push_back(kv.first);
  return out;
}

const TwoLayerMap& PerturbNet::head(int layer) const {
  auto it = heads_.find(layer);
  if (it == heads_.end()) throw std::invalid_argument("PerturbNet: layer " + std::to_string(layer) + " is not registered");
  return it->second;
}

std::vector<Tensor> PerturbNet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [layer, h] : heads_) {
    out.insert(out.end(), {h.w1, h.b1, h.w2, h.b2});
  }
  return out;
}

PerturbNet PerturbNet::with_parameters(std::span<const Tensor> params) const {
  if (params.size() != 4 * heads_.size()) {
    throw std::invalid_argument("PerturbNet::with_parameters: expected " + std::to_string(4 * heads_.size()) +
                                " tensors, got " + std::to_string(params.size()));
  }
  PerturbNet out = *this;
  std::size_t i = 0;
  for (auto& [layer, h] : out.heads_) {
    for (Tensor* slot : {&h.w1, &h.b1, &h.w2, &h.b2}) {
      if (params[i].shape() != slot->shape()) throw ShapeError("PerturbNet::with_parameters: shape mismatch");
      *slot = params[i++];
    }
  }
  return out;
}

std::vector<std::string> PerturbNet::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& kv : heads_) {
    const std::string prefix = "perturb." + std::to_string(kv.first) + ".";
    for (const char* n : {"w1", "b1", "w2", "b2"}) out.push_back(prefix + n);
  }
  return out;
}

GaussianParams infer_gaussian(const PerturbNet& pnet, int layer, const Tensor& features) {
  const TwoLayerMap& head = pnet.head(layer);
  if (features.rank() != 2 || 2 * features.shape()[1] != head.input_dim()) {
    throw ShapeError("infer_gaussian: features " + to_string(features.shape()) + " do not match layer " +
                     std::to_string(layer) + " of width " + std::to_string(head.input_dim() / 2));
  }
  const Index w = features.shape()[1];
  const Tensor raw = head(batch_statistics(features.detach()));
  return {slice(raw, 0, w), softplus(slice(raw, w, w)) + Tensor::scalar(pnet.floor())};
}

MixupNet MixupNet::init(Index width, Index hidden, double floor, Rng& rng) {
  if (!(floor > 0.0)) throw std::invalid_argument("MixupNet: floor must be positive");
  MixupNet net;
  net.floor_ = floor;
  net.head_ = TwoLayerMap::init(2 * width, hidden, 3, rng);
  return net;
}

std::vector<Tensor> MixupNet::parameters() const { return {head_.w1, head_.b1, head_.w2, head_.b2}; }

MixupNet MixupNet::with_parameters(std::span<const Tensor> params) const {
  if (params.size() != 4) throw std::invalid_argument("MixupNet::with_parameters: expected 4 tensors");
  MixupNet out = *this;
  Tensor* slots[] = {&out.head_.w1, &out.head_.b1, &out.head_.w2, &out.head_.b2};
  for (std::size_t i = 0; i < 4; ++i) {
    if (params[i].shape() != slots[i]->shape()) throw ShapeError("MixupNet::with_parameters: shape mismatch");
    *slots[i] = params[i];
  }
  return out;
}

std::vector<std::string> MixupNet::parameter_names() const {
  return {"mixup.w1", "mixup.b1", "mixup.w2", "mixup.b2"};
}

MixupParams infer_mixup_params(const MixupNet& mnet, const Tensor& mu, const Tensor& sigma) {
  if (mu.shape() != sigma.shape() || mu.rank() != 1 || 2 * mu.shape()[0] != mnet.head().input_dim()) {
    throw ShapeError("infer_mixup_params: (mu, sigma) of shape " + to_string(mu.shape()) +
                     " do not match mixup input width " + std::to_string(mnet.head().input_dim()));
  }
  const Tensor raw = mnet.head()(concat(mu, sigma));
  const Tensor floor = Tensor::scalar(mnet.floor());
  // tau is squeezed by the floor so that saturation never reaches 0 or 1 exactly.
  const Tensor tau = floor + scale(sigmoid(element(raw, 2)), 1.0 - 2.0 * mnet.floor());
  return {softplus(element(raw, 0)) + floor, softplus(element(raw, 1)) + floor, tau};
}

}  // namespace udg
