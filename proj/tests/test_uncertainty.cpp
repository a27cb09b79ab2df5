#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "test_nets.hpp"
#include "udg/domain_bench.hpp"
#include "udg/uncertainty.hpp"

using namespace udg;

namespace {

struct Model {
  Backbone backbone;
  PerturbNet pnet;
};

Model random_model(Index dim, std::uint64_t seed, bool fresh = false) {
  Rng rng(seed);
  Model m{Backbone::init(std::vector<Index>{dim, 8, 8, 2}, {0}, rng), {}};
  m.pnet = PerturbNet::init(m.backbone, 8, 1e-6, rng);
  if (!fresh) {
    std::vector<Tensor> p = m.pnet.parameters();
    for (Tensor& t : p) t = testing::random_tensor(t.shape(), rng, 0.7);
    m.pnet = m.pnet.with_parameters(p);
  }
  return m;
}

// Ranks by counting, ties share the average position.
std::vector<double> naive_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double naive_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = naive_ranks(x), ry = naive_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("domain uncertainty score") {
  CHECK(domain_uncertainty_score(0.7, 0.7) == 0.0);
  CHECK(domain_uncertainty_score(1.4, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(domain_uncertainty_score(0.35, 0.7) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(domain_uncertainty_score(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(domain_uncertainty_score(1.0, -1.0), std::domain_error);
}

TEST_CASE("sigma statistic at initialization sits on the floor regime") {
  const Model m = random_model(2, 1, true);
  const double s = sigma_statistic(m.pnet, m.backbone, gen_two_moons(50, 0.0, 0.1, 2));
  CHECK(s == doctest::Approx(std::numbers::ln2 + 1e-6).epsilon(1e-13));
  CHECK(std::abs(s - 0.693148) < 1e-6);
}

TEST_CASE("a batch repeated twice gives the single-batch statistic") {
  const Model m = random_model(2, 3);
  const DomainDataset once = gen_two_moons(32, 10.0, 0.1, 4);
  std::vector<Index> twice;
  for (int rep = 0; rep < 2; ++rep) {
    for (Index i = 0; i < 32; ++i) twice.push_back(i);
  }
  const double single = sigma_statistic(m.pnet, m.backbone, once);
  CHECK(sigma_statistic(m.pnet, m.backbone, subset(once, twice), 32) == doctest::Approx(single).epsilon(1e-14));
  CHECK(sigma_statistic(m.pnet, m.backbone, subset(once, twice)) == doctest::Approx(single).epsilon(1e-12));
  CHECK_THROWS_AS(sigma_statistic(m.pnet, m.backbone, once, -1), std::invalid_argument);
}

TEST_CASE("full-batch scores ignore example order and leave the model untouched") {
  const Model m = random_model(2, 5);
  const DomainDataset source = gen_two_moons(60, 0.0, 0.1, 6);
  const DomainDataset target = gen_two_moons(60, 45.0, 0.1, 7);
  std::vector<Index> perm;
  for (Index i = 59; i >= 0; --i) perm.push_back(i);
  std::swap(perm[0], perm[17]);

  const std::vector<Tensor> before = m.pnet.parameters();
  const std::vector<Tensor> before_theta = m.backbone.parameters();
  const DomainDataset targets[] = {target};
  const DomainDataset shuffled[] = {subset(target, perm)};
  const UncertaintyReport a = score_domains(m.pnet, m.backbone, source, targets);
  const UncertaintyReport b = score_domains(m.pnet, m.backbone, subset(source, perm), shuffled);
  CHECK(std::abs(a.sigma_source - b.sigma_source) < 1e-6);
  CHECK(std::abs(a.score - b.score) < 1e-6);
  CHECK(a.score == doctest::Approx(std::abs((a.sigma_target - a.sigma_source) / a.sigma_source)).epsilon(1e-12));
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(m.pnet.parameters()[i].value() == before[i].value());
  for (std::size_t i = 0; i < before_theta.size(); ++i) {
    CHECK(m.backbone.parameters()[i].value() == before_theta[i].value());
  }

  const DomainDataset itself[] = {source};
  CHECK(score_domains(m.pnet, m.backbone, source, itself).score == 0.0);
  CHECK_THROWS_AS(score_domains(m.pnet, m.backbone, source, {}), std::invalid_argument);
}

TEST_CASE("breakdown follows severity order and carries the Bayes baseline on request") {
  Rng rng(8);
  Model m{Backbone::init(std::vector<Index>{256, 8, 5}, {0}, rng), {}};
  const PerturbNet fresh = PerturbNet::init(m.backbone, 8, 1e-6, rng);
  std::vector<Tensor> p = fresh.parameters();
  for (Tensor& t : p) t = testing::random_tensor(t.shape(), rng, 0.5);
  m.pnet = fresh.with_parameters(p);
  const DomainDataset source = gen_glyphs(40, {}, 9);
  std::vector<DomainDataset> targets;
  for (int s : {3, 1, 5, 2, 4}) targets.push_back(gen_glyphs(40, ShiftSpec{ShiftFamily::kNoise, s}, 9));
  ScoreOptions opts;
  opts.oracle_bayes = true;
  opts.bayes_draws = 5;
  const UncertaintyReport r = score_domains(m.pnet, m.backbone, source, targets, opts);
  REQUIRE(r.breakdown.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(r.breakdown[static_cast<std::size_t>(i)].shift->severity == i + 1);
    CHECK(r.breakdown[static_cast<std::size_t>(i)].bayes_variance.has_value());
    CHECK(*r.breakdown[static_cast<std::size_t>(i)].bayes_variance >= 0.0);
  }
  // Headline fields describe the first target as given, before sorting.
  CHECK(r.sigma_target == sigma_statistic(m.pnet, m.backbone, targets[0]));
  CHECK(r.spearman.has_value());

  // A fresh perturbation net scores every target 0, so no rank correlation exists.
  const UncertaintyReport flat = score_domains(fresh, m.backbone, source, targets, opts);
  for (const DomainScore& s : flat.breakdown) CHECK(s.score == 0.0);
  CHECK_FALSE(flat.spearman.has_value());
}

TEST_CASE("Bayes predictive variance is seeded and non-negative") {
  const Model m = random_model(2, 10);
  const DomainDataset data = gen_two_moons(30, 30.0, 0.1, 11);
  const double a = bayes_predictive_variance(m.pnet, m.backbone, data, 30, 4);
  CHECK(a == bayes_predictive_variance(m.pnet, m.backbone, data, 30, 4));
  CHECK(a != bayes_predictive_variance(m.pnet, m.backbone, data, 30, 5));
  CHECK(a > 0.0);
  CHECK(a <= 0.25);  // variance of a quantity in [0, 1]
  CHECK_THROWS_AS(bayes_predictive_variance(m.pnet, m.backbone, data, 1, 4), std::invalid_argument);
}

TEST_CASE("Spearman rank correlation") {
  const std::vector<double> up = {1, 2, 3, 4, 5}, down = {9, 7, 5, 3, 1};
  CHECK(spearman(up, up) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(up, down) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> tied = {1, 2, 2, 3}, plain = {1, 2, 3, 4};
  CHECK(spearman(tied, plain) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-14));

  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 12; ++i) {
      x.push_back(std::floor(4.0 * rng.uniform()));
      y.push_back(rng.normal());
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    CHECK(spearman(x, y) == doctest::Approx(naive_spearman(x, y)).epsilon(1e-12));
  }
  const std::vector<double> flat = {1, 1, 1};
  CHECK_THROWS_AS(spearman(flat, std::vector<double>{1, 2, 3}), std::domain_error);
  CHECK_THROWS_AS(spearman(up, plain), std::invalid_argument);
}
