#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "udg/domain_bench.hpp"

using namespace udg;

namespace {

// A 2-layer backbone whose logits ignore the input and equal `bias`.
Backbone constant_backbone(Index dim, const std::vector<double>& bias) {
  Rng rng(0);
  const Index classes = static_cast<Index>(bias.size());
  const Backbone init = Backbone::init(std::vector<Index>{dim, 3, classes}, {0}, rng);
  std::vector<Tensor> p = init.parameters();
  p[2] = Tensor::zeros(p[2].shape());
  p[3] = Tensor::vector(bias);
  return init.with_parameters(p);
}


}  // namespace

TEST_CASE("two moons: full turns, half turns and the noiseless radius") {
  const DomainDataset a = gen_two_moons(101, 0.0, 0.1, 5);
  const DomainDataset b = gen_two_moons(101, 360.0, 0.1, 5);
  const DomainDataset c = gen_two_moons(101, 180.0, 0.1, 5);
  CHECK(a.inputs.value() == b.inputs.value());
  CHECK(c.inputs.value() == -a.inputs.value());
  CHECK(a.labels == c.labels);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 0) == 51);
  CHECK(std::count(a.labels.begin(), a.labels.end(), 1) == 50);
  CHECK(a.domain_id == "moons@0");

  const DomainDataset clean = gen_two_moons(400, 0.0, 0.0, 6);
  for (Index i = 0; i < clean.size(); ++i) {
    const double* center = clean.labels[static_cast<std::size_t>(i)] == 0 ? kMoonCenter0 : kMoonCenter1;
    const double r = std::hypot(clean.inputs.value()(i, 0) - center[0], clean.inputs.value()(i, 1) - center[1]);
    CHECK(std::abs(r - 1.0) < 1e-9);
  }
  // Rotation about the origin preserves the norm of every point.
  const DomainDataset turned = gen_two_moons(400, 37.0, 0.0, 6);
  for (Index i = 0; i < clean.size(); ++i) {
    CHECK(turned.inputs.value().row(i).norm() == doctest::Approx(clean.inputs.value().row(i).norm()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gen_two_moons(1, 0.0, 0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_two_moons(10, 0.0, -0.1, 0), std::invalid_argument);
}

TEST_CASE("glyphs: shapes, ranges and purity") {
  const DomainDataset g = gen_glyphs(50, {}, 7);
  CHECK(g.dim() == 256);
  CHECK(g.classes == 5);
  CHECK(g.inputs.value().minCoeff() > 0.0);
  CHECK(g.inputs.value().maxCoeff() <= 1.0);
  for (Index i = 0; i < g.size(); ++i) CHECK(g.labels[static_cast<std::size_t>(i)] == i % 5);
  CHECK(gen_glyphs(50, {}, 7).inputs.value() == g.inputs.value());
  CHECK(gen_glyphs(50, {}, 8).inputs.value() != g.inputs.value());
  CHECK_THROWS_AS(gen_glyphs(0, {}, 7), std::invalid_argument);
}

TEST_CASE("corruption magnitudes follow the documented formulas") {
  const DomainDataset clean = gen_glyphs(200, {}, 9);
  const DomainDataset n1 = gen_glyphs(200, ShiftSpec{ShiftFamily::kNoise, 1}, 9);
  const DomainDataset n5 = gen_glyphs(200, ShiftSpec{ShiftFamily::kNoise, 5}, 9);
  const double sd1 = std::sqrt((n1.inputs.value() - clean.inputs.value()).squaredNorm() / (200.0 * 256.0));
  const double sd5 = std::sqrt((n5.inputs.value() - clean.inputs.value()).squaredNorm() / (200.0 * 256.0));
  CHECK(sd1 == doctest::Approx(0.04).epsilon(0.02));
  CHECK(sd5 / sd1 == doctest::Approx(5.0).epsilon(0.2));

  const Eigen::VectorXd img = clean.inputs.value().row(0).transpose();
  for (int s = 1; s <= 5; ++s) {
    Rng rng(10);
    const Eigen::VectorXd occ = corrupt_glyph(img, {ShiftFamily::kOcclusion, s}, rng);
    CHECK((occ.array() == 0.0).count() == 4 * s * s);

    Rng rng2(11);
    const Eigen::VectorXd con = corrupt_glyph(img, {ShiftFamily::kContrast, s}, rng2);
    const double scale = 1.0 - 0.15 * s;
    const Eigen::VectorXd expected = (img.array() - img.mean()) * scale + img.mean();
    CHECK((con - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  Rng rng(12);
  CHECK(corrupt_glyph(img, {ShiftFamily::kBlur, 1}, rng) == img);
  const Eigen::VectorXd blur3 = corrupt_glyph(img, {ShiftFamily::kBlur, 3}, rng);
  double window = 0.0;
  for (Index r = 6; r <= 10; ++r) {
    for (Index c = 6; c <= 10; ++c) window += img(r * kGlyphSide + c);
  }
  CHECK(blur3(8 * kGlyphSide + 8) == doctest::Approx(window / 25.0).epsilon(1e-12));
  CHECK(blur3.minCoeff() >= img.minCoeff());
  CHECK(blur3.maxCoeff() <= img.maxCoeff());
  CHECK(corrupt_glyph(img, {ShiftFamily::kBlur, 4}, rng) == corrupt_glyph(img, {ShiftFamily::kBlur, 5}, rng));

  const Eigen::VectorXd moved = corrupt_glyph(img, {ShiftFamily::kTranslation, 2}, rng);
  CHECK(std::abs(moved.sum() - img.sum()) < img.sum());
  CHECK(moved != img);

  CHECK_THROWS_AS(corrupt_glyph(img, {ShiftFamily::kNoise, 6}, rng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt_glyph(Eigen::VectorXd::Zero(10), {ShiftFamily::kNoise, 1}, rng), ShapeError);
}

TEST_CASE("evaluate: tie-break, rational accuracy and permutation invariance") {
  const DomainDataset data = gen_two_moons(10, 0.0, 0.1, 13);
  const MetricsRecord tie = evaluate(constant_backbone(2, {0.0, 0.0}), data);
  CHECK(tie.correct == 5);
  CHECK(tie.n == 10);
  CHECK(tie.accuracy == 0.5);
  CHECK(evaluate(constant_backbone(2, {0.0, 1.0}), gen_two_moons(9, 0.0, 0.1, 13)).accuracy == 4.0 / 9.0);
  CHECK_THROWS(evaluate(constant_backbone(2, {0.0, 0.0, 0.0}), data));
  CHECK_THROWS(evaluate(constant_backbone(3, {0.0, 0.0}), data));

  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.hidden = {16, 16};
  const DomainDataset source = gen_two_moons(100, 0.0, 0.1, 14);
  const ErmResult erm = erm_train(cfg, source);
  std::vector<Index> perm(static_cast<std::size_t>(source.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[40]);
  const MetricsRecord m1 = evaluate(erm.backbone, source);
  const MetricsRecord m2 = evaluate(erm.backbone, subset(source, perm));
  CHECK(m1.correct == m2.correct);
  CHECK(m1.accuracy == static_cast<double>(m1.correct) / static_cast<double>(m1.n));
}

TEST_CASE("ERM fits the source and is deterministic") {
  TrainConfig cfg;
  cfg.iterations = 2000;
  const DomainDataset source = gen_two_moons(400, 0.0, 0.1, 15);
  const ErmResult a = erm_train(cfg, source);
  CHECK(evaluate(a.backbone, source).accuracy >= 0.95);
  cfg.iterations = 100;
  const ErmResult b = erm_train(cfg, source);
  const ErmResult c = erm_train(cfg, source);
  CHECK(b.losses == c.losses);
  CHECK(std::equal(b.losses.begin(), b.losses.end(), a.losses.begin()));
}

TEST_CASE("dataset text format round trip") {
  const DomainDataset g = gen_glyphs(12, ShiftSpec{ShiftFamily::kBlur, 2}, 16);
  std::stringstream ss;
  write_dataset(ss, g);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "12 256 5");
  ss.seekg(0);
  const DomainDataset back = read_dataset(ss);
  CHECK(back.inputs.value() == g.inputs.value());
  CHECK(back.labels == g.labels);
}
