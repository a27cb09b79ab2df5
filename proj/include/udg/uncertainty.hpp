#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "udg/dataset.hpp"
#include "udg/model.hpp"

namespace udg {

// Mean sigma at the first perturbation layer, averaged over feature dims and
// over contiguous batches of `batch_size` (0 = the whole dataset as one batch).
// Each example is forwarded once; no parameter is touched.
double sigma_statistic(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& data,
                       Index batch_size = 0);

// |(sigma_T - sigma_S) / sigma_S|; throws std::domain_error if sigma_S <= 0.
double domain_uncertainty_score(double sigma_target, double sigma_source);

struct DomainScore {
  std::string domain_id;
  std::optional<ShiftSpec> shift;
  double sigma = 0.0;
  double score = 0.0;
  std::optional<double> bayes_variance;
};

struct UncertaintyReport {
  double sigma_source = 0.0;
  double sigma_target = 0.0;  // first target
  double score = 0.0;         // first target
  std::vector<DomainScore> breakdown;  // every target; severity order when all carry a shift
  std::optional<double> spearman;      // score vs Bayes variance, when computed and defined
};

struct ScoreOptions {
  Index batch_size = 0;
  bool oracle_bayes = false;
  int bayes_draws = 30;
  std::uint64_t seed = 0;
};

UncertaintyReport score_domains(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& source,
                                std::span<const DomainDataset> targets, const ScoreOptions& opts = {});

// Baseline: predictive variance of the softmax output over `draws` sampled
// feature perturbations, averaged over examples and classes.
double bayes_predictive_variance(const PerturbNet& pnet, const Backbone& backbone, const DomainDataset& data,
                                 int draws, std::uint64_t seed);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace udg
