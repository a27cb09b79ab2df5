#include "udg/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "udg/augment.hpp"
#include "udg/math.hpp"

namespace udg {

double sigma_statistic(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& data,
                       Index batch_size) {
  if (data.size() < 1) throw std::invalid_argument("sigma_statistic: empty dataset");
  if (batch_size < 0) throw std::invalid_argument("sigma_statistic: negative batch size");
  const int layer = backbone.perturb_layers().front();
  const Index n = data.size();
  const Index step = batch_size == 0 ? n : std::min(batch_size, n);
  double total = 0.0;
  int batches = 0;
  for (Index start = 0; start < n; start += step) {
    const Index len = std::min(step, n - start);
    const Tensor x(Shape{len, data.dim()}, data.inputs.value().middleRows(start, len));
    const ForwardResult fr = forward_with_features(backbone, x);
    total += infer_gaussian(pnet, layer, fr.features.at(layer)).sigma.value().mean();
    ++batches;
  }
  return total / batches;
}

double domain_uncertainty_score(double sigma_target, double sigma_source) {
  return math::domain_uncertainty_score(sigma_target, sigma_source);
}

double bayes_predictive_variance(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& data,
                                 int draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("bayes_predictive_variance: need at least two draws");
  const Tensor x = data.inputs.detach();
  const ForwardResult clean = forward_with_features(backbone, x);
  std::map<int, GaussianParams> q;
  for (const auto& [layer, h] : clean.features) q.emplace(layer, infer_gaussian(pnet, layer, h));

  const Rng base = Rng(seed).split(stream_key("bayes"));
  Matrix sum = Matrix::Zero(data.size(), data.classes);
  Matrix sum_sq = Matrix::Zero(data.size(), data.classes);
  for (int k = 0; k < draws; ++k) {
    Rng rng = base.split(static_cast<std::uint64_t>(k));
    const std::map<int, Tensor> noise = draw_layer_noise(backbone, data.size(), rng);
    const ForwardResult fr = forward_hooked(backbone, x, [&](int layer, const Tensor& h) {
      return perturb_features(h, q.at(layer), noise.at(layer)).h_plus;
    });
    const Matrix p = softmax(fr.logits).value();
    sum += p;
    sum_sq += p.cwiseProduct(p);
  }
  const double d = static_cast<double>(draws);
  const Matrix var = (sum_sq / d - (sum / d).cwiseProduct(sum / d)).cwiseMax(0.0);
  return var.mean();
}

UncertaintyReport score_domains(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& source,
                                std::span<const DomainDataset> targets, const ScoreOptions& opts) {
  if (targets.empty()) throw std::invalid_argument("score_domains: no target dataset");
  UncertaintyReport report;
  report.sigma_source = sigma_statistic(pnet, backbone, source, opts.batch_size);
  for (const DomainDataset& t : targets) {
    DomainScore s;
    s.domain_id = t.domain_id;
    s.shift = t.shift;
    s.sigma = sigma_statistic(pnet, backbone, t, opts.batch_size);
    s.score = domain_uncertainty_score(s.sigma, report.sigma_source);
    if (opts.oracle_bayes) s.bayes_variance = bayes_predictive_variance(pnet, backbone, t, opts.bayes_draws, opts.seed);
    report.breakdown.push_back(std::move(s));
  }
  report.sigma_target = report.breakdown.front().sigma;
  report.score = report.breakdown.front().score;
  const bool all_shifted = std::all_of(report.breakdown.begin(), report.breakdown.end(),
                                       [](const DomainScore& s) { return s.shift.has_value(); });
  if (all_shifted) {
    std::stable_sort(report.breakdown.begin(), report.breakdown.end(),
                     [](const DomainScore& a, const DomainScore& b) { return a.shift->severity < b.shift->severity; });
  }
  if (opts.oracle_bayes && report.breakdown.size() >= 2) {
    std::vector<double> scores, variances;
    for (const DomainScore& s : report.breakdown) {
      scores.push_back(s.score);
      variances.push_back(*s.bayes_variance);
    }
    // Undefined when either side is constant; the report then omits it.
    try {
      report.spearman = spearman(scores, variances);
    } catch (const std::domain_error&) {
    }
  }
  return report;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Index>(ry.size()));
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (denom == 0.0) throw std::domain_error("spearman: constant input");
  return ca.dot(cb) / denom;
}

}  // namespace udg
