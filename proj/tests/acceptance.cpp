// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset. Exit status is 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "test_nets.hpp"
#include "udg/augment.hpp"
#include "udg/cli.hpp"
#include "udg/domain_bench.hpp"
#include "udg/meta_trainer.hpp"
#include "udg/sampling.hpp"
#include "udg/uncertainty.hpp"

using namespace udg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Batch random_batch(Index n, Index dim, Index classes, Rng& rng) {
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.next_u64() % classes));
  return {testing::random_tensor({n, dim}, rng), one_hot(labels, classes), labels};
}

PerturbNet randomized_pnet(const Backbone& net, Index hidden, Rng& rng, double scale) {
  PerturbNet pnet = PerturbNet::init(net, hidden, 1e-6, rng);
  std::vector<Tensor> p = pnet.parameters();
  for (Tensor& t : p) t = testing::random_tensor(t.shape(), rng, scale);
  return pnet.with_parameters(p);
}

Index parameter_count(const std::vector<Tensor>& ps) {
  Index n = 0;
  for (const Tensor& t : ps) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  double worst_first = 0.0, worst_exact = 0.0;
  Index largest = 0;
  int nets = 0;

  for (std::uint64_t seed = 1; seed <= 10; ++seed, ++nets) {
    const testing::AllPrimitiveNet net(seed);
    largest = std::max(largest, parameter_count(net.params));
    worst_first = std::max(worst_first, finite_diff_check(net.objective(), net.params, 1e-5));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed, ++nets) {
    Rng rng(100 + seed);
    const Backbone backbone = Backbone::init(std::vector<Index>{2, 3, 2}, {0}, rng);
    const PerturbNet pnet = randomized_pnet(backbone, 2, rng, 0.7);
    largest = std::max(largest, parameter_count(pnet.parameters()));
    const Batch batch = random_batch(8, 2, 2, rng);
    const std::map<int, Tensor> noise = draw_layer_noise(backbone, 8, rng);
    const ScalarObjective f = [&](Tape&, std::span<const Tensor> p) {
      return adversarial_objective(pnet.with_parameters(p), backbone, batch, 1.0, noise);
    };
    worst_first = std::max(worst_first, finite_diff_check(f, pnet.parameters(), 1e-6));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed, ++nets) {
    Rng rng(200 + seed);
    const Backbone backbone = Backbone::init(std::vector<Index>{1, 2, 2}, {0}, rng);
    largest = std::max(largest, parameter_count(backbone.parameters()));
    const Batch train = random_batch(6, 1, 2, rng);
    const Batch test = random_batch(6, 1, 2, rng);
    const ScalarObjective f = [&](Tape& tape, std::span<const Tensor> p) {
      const Backbone theta = backbone.with_parameters(std::vector<Tensor>(p.begin(), p.end()));
      const InnerAdaptation inner = inner_adapt(tape, theta, train, 0.3, MetaGradMode::kExact);
      return softmax_cross_entropy(forward(inner.adapted, test.inputs), test.targets);
    };
    worst_exact = std::max(worst_exact, finite_diff_check(f, backbone.parameters(), 1e-6, TapeMode::kSecondOrder));
  }
  const double secs = seconds_since(t0);
  const bool pass = nets == 20 && largest <= 32 && worst_first < 1e-4 && worst_exact < 1e-3 && secs < 10.0;
  return {pass, format("%d nets (<= %ld params), max rel err %.2e first-order, %.2e exact inner step, %.2fs", nets,
                       static_cast<long>(largest), worst_first, worst_exact, secs)};
}

Verdict distributional_contracts() {
  Rng rng(11);
  const Index n = 100000;
  const Tensor e = gaussian_reparam_sample(Tensor::zeros({n}), Tensor::full({n}, 1.0), rng);
  const double mean = e.value().mean();
  const double sd = std::sqrt((e.value().array() - mean).square().sum() / static_cast<double>(n - 1));
  const bool moments = std::abs(mean) <= 0.01 && sd >= 0.99 && sd <= 1.01;

  std::vector<double> uniform;
  for (int i = 0; i < 10000; ++i) uniform.push_back(sample_lambda(1.0, 1.0, rng));
  const double ks = oracle::ks_uniform_statistic(uniform);
  const double ks_crit = oracle::ks_critical_001(uniform.size());

  std::vector<double> skewed;
  for (int i = 0; i < 1000000; ++i) skewed.push_back(sample_lambda(5.0, 1.0, rng));
  std::nth_element(skewed.begin(), skewed.begin() + static_cast<std::ptrdiff_t>(skewed.size() / 2), skewed.end());
  const double median_err = std::abs(skewed[skewed.size() / 2] - std::pow(0.5, 0.2));

  const bool pass = moments && ks < ks_crit && median_err < 1e-3;
  return {pass, format("reparam mean %.4f sd %.4f; KS %.4f (crit %.4f); Kumaraswamy(5,1) median err %.1e", mean, sd,
                       ks, ks_crit, median_err)};
}

Verdict algebraic_invariants() {
  Rng rng(12);
  int failures = 0;
  double worst_self_kl = 0.0, worst_row = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.next_u64() % 8);
    const Tensor mq = testing::random_tensor({d}, rng, 3.0), mp = testing::random_tensor({d}, rng, 3.0);
    std::vector<double> sigma_q, sigma_p;
    for (Index i = 0; i < d; ++i) {
      sigma_q.push_back(0.01 + 2.0 * rng.uniform());
      sigma_p.push_back(0.01 + 2.0 * rng.uniform());
    }
    const Tensor sq = Tensor::vector(sigma_q), sp = Tensor::vector(sigma_p);
    if (kl_diag_gaussian(mq, sq, mp, sp).item() < 0.0) ++failures;
    worst_self_kl = std::max(worst_self_kl, std::abs(kl_diag_gaussian(mq, sq, mq, sq).item()));

    const Index c = 2 + static_cast<Index>(rng.next_u64() % 9);
    const double rho = 0.01 + 0.98 * rng.uniform();
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.next_u64() % c));
    const Tensor y = one_hot(labels, c);
    const Tensor s = smooth_label(y, rho, c);
    const double off = (1.0 - rho) / static_cast<double>(c - 1);
    for (Index r = 0; r < 5; ++r) {
      worst_row = std::max(worst_row, std::abs(s.value().row(r).sum() - 1.0));
      for (Index k = 0; k < c; ++k) {
        const double expected = k == labels[static_cast<std::size_t>(r)] ? rho : off;
        if (s.value()(r, k) != expected) ++failures;
      }
    }

    const Tensor h = testing::random_tensor({5, d}, rng, 3.0);
    const Tensor mu = testing::random_tensor({d}, rng, 2.0);
    const Tensor sigma = Tensor::vector(std::vector<double>(d, 0.01 + 2.0 * rng.uniform()));
    const Tensor h_plus = perturb_features(h, mu, sigma, rng).h_plus;
    if (!(h_plus.value().array() > h.value().array()).all()) ++failures;

    const Tensor yt = smooth_label(one_hot(labels, c), rho, c);
    const Tensor hp5 = testing::random_tensor({5, d}, rng);
    const MixedBatch at_one = mixup_domain(h, hp5, y, yt, Tensor::scalar(1.0));
    const MixedBatch at_zero = mixup_domain(h, hp5, y, yt, Tensor::scalar(0.0));
    if (at_one.h_mix.value() != h.value() || at_one.y_plus.value() != y.value()) ++failures;
    if (at_zero.h_mix.value() != hp5.value() || at_zero.y_plus.value() != yt.value()) ++failures;
  }
  const bool pass = failures == 0 && worst_self_kl <= 1e-12 && worst_row <= 1e-12;
  return {pass, format("1000 trials, %d violations, max |KL(q||q)| %.1e, max |row sum - 1| %.1e", failures,
                       worst_self_kl, worst_row)};
}

Verdict adversarial_ascent() {
  const auto t0 = Clock::now();
  const TrainConfig cfg;  // beta = 1, T_adv = 5
  int monotone = 0, theta_kept = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    TrainConfig c = cfg;
    c.seed = static_cast<std::uint64_t>(trial);
    const DomainDataset source = gen_two_moons(400, 0.0, 0.1, 1000 + trial);
    TrainerState state = init_state(c, 2, 2);
    Rng rng = Rng(c.seed).split(stream_key("acceptance.pnet"));
    state.pnet = randomized_pnet(state.backbone, c.aux_hidden, rng, 0.3);
    const Batch batch = make_batch(source, batch_indices(source.size(), c.batch_size, c.seed, 0));
    const std::vector<Tensor> before = state.backbone.parameters();
    Rng adv_rng(static_cast<std::uint64_t>(trial));
    const std::vector<double> traj = adversarial_maximize(state.pnet, state.backbone, batch, c.adv, adv_rng);
    bool ok = traj.size() == static_cast<std::size_t>(c.adv.steps + 1);
    for (std::size_t i = 1; i < traj.size(); ++i) ok = ok && traj[i] >= traj[i - 1];
    monotone += ok;
    bool same = true;
    const std::vector<Tensor> after = state.backbone.parameters();
    for (std::size_t i = 0; i < before.size(); ++i) same = same && after[i].value() == before[i].value();
    theta_kept += same;
  }
  const double secs = seconds_since(t0);
  const bool pass = monotone >= 95 && theta_kept == trials && secs < 60.0;
  return {pass, format("objective non-decreasing in %d/%d trials, theta unchanged in %d/%d, %.1fs", monotone, trials,
                       theta_kept, trials, secs)};
}

Verdict reduction_oracle() {
  TrainConfig cfg;
  cfg.mc_samples = 1;
  cfg.force_lambda = 1.0;
  cfg.inner_lr = 0.0;
  cfg.kl_weight = 0.0;
  cfg.adv.steps = 0;
  cfg.iterations = 200;
  const DomainDataset source = gen_two_moons(400, 0.0, 0.1, 5);
  const TrainResult full = train(cfg, source);
  const ErmResult erm = erm_train(cfg, source);
  double worst = erm.losses.size() == full.history.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(erm.losses.size(), full.history.size()); ++i) {
    worst = std::max(worst, std::abs(full.history[i].loss_train - erm.losses[i]));
  }
  return {worst < 1e-6, format("max |loss_full - loss_erm| over 200 iterations = %.2e", worst)};
}

// Models trained for the generalization criterion, reused for few-shot.
struct SeedGroup {
  Backbone full;
  double full_acc = 0, erm_acc = 0, random_gaussian = 0, no_adversarial = 0, no_mixup = 0;
};

struct MoonsProtocol {
  static constexpr double kNoise = 0.1;
  static constexpr Index kN = 400;
  static DomainDataset source(int s) { return gen_two_moons(kN, 0.0, kNoise, 100 + s); }
  static DomainDataset at30(int s) { return gen_two_moons(kN, 30.0, kNoise, 200 + s); }
  static DomainDataset at60(int s) { return gen_two_moons(kN, 60.0, kNoise, 300 + s); }
};

std::vector<SeedGroup>& seed_groups(double* slowest_cell = nullptr) {
  static std::vector<SeedGroup> groups;
  static double slowest = 0.0;
  if (groups.empty()) {
    for (int s = 0; s < 5; ++s) {
      const DomainDataset src = MoonsProtocol::source(s), t30 = MoonsProtocol::at30(s), t60 = MoonsProtocol::at60(s);
      const auto unseen = [&](const Backbone& b) { return 0.5 * (evaluate(b, t30).accuracy + evaluate(b, t60).accuracy); };
      TrainConfig cfg;
      cfg.seed = static_cast<std::uint64_t>(s);
      const auto timed = [&](const std::function<Backbone()>& run) {
        const auto t0 = Clock::now();
        Backbone b = run();
        slowest = std::max(slowest, seconds_since(t0));
        return b;
      };
      const auto method = [&](const std::function<void(TrainConfig&)>& tweak) {
        return timed([&] {
          TrainConfig c = cfg;
          tweak(c);
          return train(c, src).state.backbone;
        });
      };
      SeedGroup g;
      g.full = method([](TrainConfig&) {});
      g.full_acc = unseen(g.full);
      g.erm_acc = unseen(timed([&] { return erm_train(cfg, src).backbone; }));
      g.random_gaussian =
          unseen(method([](TrainConfig& c) { c.ablation.perturbation = PerturbationMode::kRandomGaussian; }));
      g.no_adversarial = unseen(method([](TrainConfig& c) { c.ablation.no_adversarial = true; }));
      g.no_mixup = unseen(method([](TrainConfig& c) { c.ablation.mixup = MixupMode::kNone; }));
      std::printf("  seed %d: full %.4f erm %.4f random_gaussian %.4f no_adversarial %.4f no_mixup %.4f\n", s,
                  g.full_acc, g.erm_acc, g.random_gaussian, g.no_adversarial, g.no_mixup);
      std::fflush(stdout);
      groups.push_back(std::move(g));
    }
  }
  if (slowest_cell) *slowest_cell = slowest;
  return groups;
}

Verdict desk_scale_generalization() {
  double slowest = 0.0;
  const std::vector<SeedGroup>& groups = seed_groups(&slowest);
  double full = 0, erm = 0;
  int ordered = 0;
  for (const SeedGroup& g : groups) {
    full += g.full_acc / 5.0;
    erm += g.erm_acc / 5.0;
    ordered += g.full_acc >= g.random_gaussian && g.full_acc >= g.no_adversarial && g.full_acc >= g.no_mixup;
  }
  const double gain = 100.0 * (full - erm);
  const bool pass = gain >= 3.0 && ordered >= 4 && slowest < 600.0;
  return {pass, format("unseen avg full %.2f%% vs ERM %.2f%% (gain %+.2f points, need >= 3); ablation ordering in "
                       "%d/5 seed groups (need 4); slowest cell %.1fs",
                       100.0 * full, 100.0 * erm, gain, ordered, slowest)};
}

Verdict uncertainty_behavior() {
  const TrainConfig cfg;
  const DomainDataset source = gen_glyphs(500, std::nullopt, 21);
  const TrainResult trained = train(cfg, source);
  const PerturbNet& pnet = trained.state.pnet;
  const Backbone& backbone = trained.state.backbone;

  std::vector<DomainDataset> targets = {gen_glyphs(300, std::nullopt, 22)};
  for (int s = 1; s <= 5; ++s) targets.push_back(gen_glyphs(300, ShiftSpec{ShiftFamily::kNoise, s}, 22));

  const double sigma_s = sigma_statistic(pnet, backbone, source);
  std::vector<double> scores, variances;
  for (const DomainDataset& t : targets) {
    scores.push_back(domain_uncertainty_score(sigma_statistic(pnet, backbone, t), sigma_s));
    variances.push_back(bayes_predictive_variance(pnet, backbone, t, 30, 23));
  }
  int rising = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) rising += scores[i] >= scores[i - 1];
  const double rho = spearman(scores, variances);

  const int reps = 20;
  auto t0 = Clock::now();
  double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    for (const DomainDataset& t : targets) sink += sigma_statistic(pnet, backbone, t);
  }
  const double one_pass = seconds_since(t0);
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    for (const DomainDataset& t : targets) sink += bayes_predictive_variance(pnet, backbone, t, 30, 23);
  }
  const double oracle = seconds_since(t0);
  const double speedup = oracle / one_pass;

  std::string trace;
  for (std::size_t i = 0; i < scores.size(); ++i) trace += format("%s%.4g", i ? " " : "", scores[i]);
  const bool pass = rising >= 4 && rho >= 0.7 && speedup >= 10.0 && std::isfinite(sink);
  return {pass, format("scores clean..sev5 [%s], non-decreasing pairs %d/5, Spearman vs 30-draw variance %.3f, "
                       "one-pass speedup %.1fx",
                       trace.c_str(), rising, rho, speedup)};
}

Verdict few_shot_adaptation() {
  const std::vector<SeedGroup>& groups = seed_groups();
  int improved = 0;
  std::string trace;
  for (int s = 0; s < 5; ++s) {
    const DomainDataset target = MoonsProtocol::at60(s);
    const DomainDataset support = gen_two_moons(20, 60.0, MoonsProtocol::kNoise, 400 + s);  // 10 per class
    const double zero_shot = evaluate(groups[static_cast<std::size_t>(s)].full, target).accuracy;
    const Backbone tuned = few_shot_adapt(groups[static_cast<std::size_t>(s)].full, support, 100, 0.05);
    const double adapted = evaluate(tuned, target).accuracy;
    improved += adapted > zero_shot;
    trace += format("%s%.3f->%.3f", s ? " " : "", zero_shot, adapted);
  }
  return {improved >= 4, format("60 degree accuracy zero-shot->adapted [%s], improved in %d/5 seeds", trace.c_str(),
                                improved)};
}

Verdict determinism_and_persistence() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "udg_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != kExitOk) std::cerr << err.str();
    return code;
  };
  const auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const auto path = [&](const char* name) { return (dir / name).string(); };

  bool ok = cli({"train", "--seed", "7", "--iterations", "100", "--metrics", path("a.csv")}) == kExitOk;
  ok = ok && cli({"train", "--seed", "7", "--iterations", "100", "--metrics", path("b.csv")}) == kExitOk;
  const bool identical = ok && slurp(dir / "a.csv") == slurp(dir / "b.csv") && !slurp(dir / "a.csv").empty();

  ok = ok && cli({"train", "--seed", "7", "--iterations", "50", "--checkpoint", path("half.json")}) == kExitOk;
  ok = ok && cli({"train", "--seed", "7", "--iterations", "100", "--resume", path("half.json"), "--checkpoint",
                  path("resumed.json"), "--metrics", path("resumed.csv")}) == kExitOk;
  ok = ok && cli({"train", "--seed", "7", "--iterations", "100", "--checkpoint", path("whole.json")}) == kExitOk;
  bool resumed_equal = ok;
  if (ok) {
    const Checkpoint a = load_checkpoint(dir / "resumed.json"), b = load_checkpoint(dir / "whole.json");
    resumed_equal = a.iteration == 100 && b.iteration == 100 && a.params.size() == b.params.size();
    for (std::size_t i = 0; resumed_equal && i < a.params.size(); ++i) {
      resumed_equal = a.params[i].name == b.params[i].name && a.params[i].value.value() == b.params[i].value.value();
    }
    // Rows 50..99 of the uninterrupted metrics must equal the resumed run's rows.
    std::istringstream whole(slurp(dir / "a.csv")), part(slurp(dir / "resumed.csv"));
    std::vector<std::string> wl, pl;
    for (std::string l; std::getline(whole, l);) wl.push_back(l);
    for (std::string l; std::getline(part, l);) pl.push_back(l);
    resumed_equal = resumed_equal && wl.size() == 101 && pl.size() == 51 &&
                    std::equal(pl.begin() + 1, pl.end(), wl.begin() + 51);
  }
  fs::remove_all(dir);
  return {identical && resumed_equal, format("metrics byte-identical across runs: %s; resume at 50 == uninterrupted "
                                             "at 100: %s",
                                             identical ? "yes" : "no", resumed_equal ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"distributional contracts", distributional_contracts},
      {"algebraic invariants", algebraic_invariants},
      {"adversarial ascent", adversarial_ascent},
      {"reduction oracle", reduction_oracle},
      {"desk-scale generalization", desk_scale_generalization},
      {"uncertainty behavior", uncertainty_behavior},
      {"few-shot adaptation", few_shot_adaptation},
      {"determinism and persistence", determinism_and_persistence},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v{false, ""};
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
