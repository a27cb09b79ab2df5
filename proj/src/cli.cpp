#include "udg/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "udg/checkpoint.hpp"
#include "udg/domain_bench.hpp"
#include "udg/uncertainty.hpp"

namespace udg {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("'" + key + "': '" + v + "' is not a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("'" + key + "': '" + v + "' is not an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': '" + v + "' is not a boolean");
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define UDG_REAL(name, member)                                                                       \
  {name,                                                                                             \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
    [](const RunConfig& c) { return fmt(c.member); }}}
#define UDG_INT(name, member)                                                                                \
  {name,                                                                                                     \
   {[](RunConfig& c, const std::string& k, const std::string& v) {                                           \
      c.member = static_cast<decltype(c.member)>(parse_int(k, v));                                           \
    },                                                                                                       \
    [](const RunConfig& c) { return std::to_string(c.member); }}}
#define UDG_BOOL(name, member)                                                                     \
  {name,                                                                                           \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }, \
    [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define UDG_TEXT(name, member)                                                           \
  {name,                                                                                 \
   {[](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
    [](const RunConfig& c) { return c.member; }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      UDG_REAL("inner_lr", train.inner_lr),
      UDG_REAL("outer_lr", train.outer_lr),
      UDG_INT("mc_samples", train.mc_samples),
      UDG_REAL("beta", train.adv.beta),
      UDG_INT("adv_steps", train.adv.steps),
      UDG_REAL("adv_lr", train.adv.lr),
      UDG_REAL("rho", train.rho),
      UDG_REAL("kl_weight", train.kl_weight),
      UDG_INT("iterations", train.iterations),
      UDG_INT("batch_size", train.batch_size),
      UDG_INT("aux_hidden", train.aux_hidden),
      UDG_REAL("sigma_floor", train.sigma_floor),
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const long long s = parse_int(k, v);
          if (s < 0) throw ConfigError("'seed' must be non-negative");
          c.train.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"meta_grad",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v == "first_order") c.train.meta_grad = MetaGradMode::kFirstOrder;
          else if (v == "exact") c.train.meta_grad = MetaGradMode::kExact;
          else throw ConfigError("'meta_grad' must be first_order or exact, got '" + v + "'");
        },
        [](const RunConfig& c) {
          return std::string(c.train.meta_grad == MetaGradMode::kExact ? "exact" : "first_order");
        }}},
      {"tau_mode",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v == "relaxed") c.train.tau_mode = TauMode::kRelaxed;
          else if (v == "hard") c.train.tau_mode = TauMode::kHard;
          else throw ConfigError("'tau_mode' must be relaxed or hard, got '" + v + "'");
        },
        [](const RunConfig& c) { return std::string(c.train.tau_mode == TauMode::kHard ? "hard" : "relaxed"); }}},
      {"optimizer",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v == "sgd") c.train.optimizer = OptimizerKind::kSgd;
          else if (v == "adam") c.train.optimizer = OptimizerKind::kAdam;
          else throw ConfigError("'optimizer' must be sgd or adam, got '" + v + "'");
        },
        [](const RunConfig& c) { return std::string(c.train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"); }}},
      {"hidden",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.hidden.clear();
          for (const std::string& w : split(v, ',')) c.train.hidden.push_back(parse_int(k, w));
        },
        [](const RunConfig& c) { return join(c.train.hidden); }}},
      {"perturb_layers",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.perturb_layers.clear();
          for (const std::string& w : split(v, ',')) c.train.perturb_layers.push_back(static_cast<int>(parse_int(k, w)));
        },
        [](const RunConfig& c) { return join(c.train.perturb_layers); }}},
      {"force_lambda",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "none") c.train.force_lambda.reset();
          else c.train.force_lambda = parse_double(k, v);
        },
        [](const RunConfig& c) { return c.train.force_lambda ? fmt(*c.train.force_lambda) : std::string("none"); }}},
      UDG_BOOL("random_gaussian", ablation.random_gaussian),
      UDG_BOOL("deterministic_perturbation", ablation.deterministic_perturbation),
      UDG_BOOL("random_mu", ablation.random_mu),
      UDG_BOOL("random_sigma", ablation.random_sigma),
      UDG_BOOL("no_mixup", ablation.no_mixup),
      UDG_BOOL("random_mixup", ablation.random_mixup),
      UDG_BOOL("no_adversarial", ablation.no_adversarial),
      UDG_BOOL("no_meta", ablation.no_meta),
      UDG_BOOL("no_min_phi_p", ablation.no_min_phi_p),
      {"method",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v != "udg" && v != "erm") throw ConfigError("'method' must be udg or erm, got '" + v + "'");
          c.method = v;
        },
        [](const RunConfig& c) { return c.method; }}},
      UDG_TEXT("data", data),
      {"targets",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.targets.clear();
          for (const std::string& t : split(v, ',')) {
            if (!t.empty()) c.targets.push_back(t);
          }
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.targets.size(); ++i) out += (i ? "," : "") + c.targets[i];
          return out;
        }}},
      UDG_TEXT("checkpoint", checkpoint),
      UDG_TEXT("resume", resume),
      UDG_TEXT("metrics", metrics),
      UDG_TEXT("out", out),
      UDG_TEXT("family", family),
      UDG_INT("seeds", seeds),
      UDG_INT("checkpoint_every", checkpoint_every),
      UDG_BOOL("timing", timing),
      UDG_BOOL("oracle_bayes", oracle_bayes),
      UDG_INT("bayes_draws", bayes_draws),
      UDG_INT("score_batch", score_batch),
      UDG_TEXT("adapt_data", adapt_data),
      UDG_INT("adapt_steps", adapt_steps),
      UDG_REAL("adapt_lr", adapt_lr),
  };
  return table;
}

#undef UDG_REAL
#undef UDG_INT
#undef UDG_BOOL
#undef UDG_TEXT

bool is_bool_key(const std::string& key) {
  static const char* const keys[] = {"random_gaussian", "deterministic_perturbation", "random_mu", "random_sigma",
                                     "no_mixup", "random_mixup", "no_adversarial", "no_meta", "no_min_phi_p",
                                     "timing", "oracle_bayes"};
  for (const char* k : keys) {
    if (key == k) return true;
  }
  return false;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string content = trim(raw.substr(0, raw.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    try {
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'");
      apply_setting(cfg, trim(content.substr(0, eq)), trim(content.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> echo_config(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out.emplace(key, field.get(cfg));
  return out;
}

TrainConfig resolve_train_config(const RunConfig& cfg) {
  const AblationFlags& f = cfg.ablation;
  const int perturbation = f.random_gaussian + f.deterministic_perturbation + f.random_mu + f.random_sigma;
  if (perturbation > 1) throw ConfigError("at most one perturbation ablation may be set");
  if (f.no_mixup && f.random_mixup) throw ConfigError("no_mixup and random_mixup are mutually exclusive");
  const int strategy = f.no_adversarial + f.no_meta + f.no_min_phi_p;
  // no_meta together with no_adversarial is the ERM baseline; any other
  // combination within the family is rejected.
  if (strategy > 1 && !(strategy == 2 && f.no_meta && f.no_adversarial)) {
    throw ConfigError("at most one training-strategy ablation may be set");
  }
  if (cfg.seeds < 1) throw ConfigError("'seeds' must be >= 1");
  if (cfg.bayes_draws < 2) throw ConfigError("'bayes_draws' must be >= 2");
  if (cfg.score_batch < 0) throw ConfigError("'score_batch' must be >= 0");
  if (cfg.adapt_steps < 0) throw ConfigError("'adapt_steps' must be >= 0");
  if (cfg.checkpoint_every < 0) throw ConfigError("'checkpoint_every' must be >= 0");

  TrainConfig t = cfg.train;
  Ablation& a = t.ablation;
  a = Ablation{};
  if (f.random_gaussian) a.perturbation = PerturbationMode::kRandomGaussian;
  if (f.deterministic_perturbation) a.perturbation = PerturbationMode::kDeterministic;
  if (f.random_mu) a.perturbation = PerturbationMode::kRandomMu;
  if (f.random_sigma) a.perturbation = PerturbationMode::kRandomSigma;
  if (f.no_mixup) a.mixup = MixupMode::kNone;
  if (f.random_mixup) a.mixup = MixupMode::kRandom;
  a.no_adversarial = f.no_adversarial;
  a.no_meta = f.no_meta;
  a.no_min_phi_p = f.no_min_phi_p;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

DomainDataset load_data_spec(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  auto arg = [&](std::size_t i) -> const std::string* { return i < parts.size() ? &parts[i] : nullptr; };
  auto num = [&](std::size_t i, double fallback) { return arg(i) ? parse_double(spec, *arg(i)) : fallback; };
  auto whole = [&](std::size_t i, long long fallback) { return arg(i) ? parse_int(spec, *arg(i)) : fallback; };
  auto seed_at = [&](std::size_t i) {
    const long long s = whole(i, 0);
    if (s < 0) throw ConfigError("data spec '" + spec + "': seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  };

  if (parts.size() >= 2 && parts[0] == "moons") {
    if (parts.size() > 5) throw ConfigError("data spec '" + spec + "': too many fields");
    DomainDataset d = gen_two_moons(whole(2, 400), num(1, 0.0), num(3, 0.1), seed_at(4));
    d.domain_id = spec;
    return d;
  }
  if (parts.size() >= 2 && parts[0] == "glyphs") {
    if (parts[1] == "clean") {
      if (parts.size() > 4) throw ConfigError("data spec '" + spec + "': too many fields");
      DomainDataset d = gen_glyphs(whole(2, 500), std::nullopt, seed_at(3));
      d.domain_id = spec;
      return d;
    }
    if (parts.size() < 3 || parts.size() > 5) {
      throw ConfigError("data spec '" + spec + "': expected glyphs:FAMILY:SEVERITY[:N[:SEED]]");
    }
    ShiftSpec shift;
    try {
      shift.family = parse_family(parts[1]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("data spec '" + spec + "': " + e.what());
    }
    shift.severity = static_cast<int>(whole(2, 1));
    if (shift.severity < 1 || shift.severity > 5) throw ConfigError("data spec '" + spec + "': severity outside 1..5");
    DomainDataset d = gen_glyphs(whole(3, 500), shift, seed_at(4));
    d.domain_id = spec;
    return d;
  }
  DomainDataset d = load_dataset(spec);
  d.domain_id = spec;
  return d;
}

void write_metrics_csv(std::ostream& os, std::span<const MetaStepReport> history, bool timing) {
  os << "iter,loss_train,loss_meta_test,kl,mean_sigma,a,b,tau,wall_ms\n";
  for (const MetaStepReport& r : history) {
    os << r.iteration << ',' << fmt(r.loss_train) << ',' << fmt(r.loss_meta_test) << ',' << fmt(r.kl) << ','
       << fmt(r.mean_sigma) << ',' << fmt(r.a) << ',' << fmt(r.b) << ',' << fmt(r.tau) << ','
       << fmt(timing ? r.wall_ms : 0.0) << '\n';
  }
}

namespace {

bool uses_erm(const RunConfig& cfg) {
  return cfg.method == "erm" || (cfg.ablation.no_meta && cfg.ablation.no_adversarial);
}

std::vector<std::string> targets_or(const RunConfig& cfg, std::vector<std::string> fallback) {
  return cfg.targets.empty() ? fallback : cfg.targets;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os || !(os << text) || !os.flush()) throw std::runtime_error("cannot write " + path);
}

// A checkpoint restores into the architecture recorded in its own config echo.
struct LoadedModel {
  RunConfig cfg;
  TrainerState state;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw ConfigError("'checkpoint' is required");
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint '" + path + "' does not exist");
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedModel m;
  for (const auto& [k, v] : ckpt.config) apply_setting(m.cfg, k, v);
  m.state = restore_state(ckpt, resolve_train_config(m.cfg));
  return m;
}

double full_loss(const Backbone& backbone, const DomainDataset& data) {
  const Batch b = full_batch(data);
  return softmax_cross_entropy(forward(backbone, b.inputs), b.targets).item();
}

struct RunOutcome {
  TrainerState state;
  std::vector<MetaStepReport> history;
};

RunOutcome run_training(const RunConfig& cfg, const DomainDataset& source, const CheckpointHook& hook = {}) {
  const TrainConfig t = resolve_train_config(cfg);
  RunOutcome out;
  if (uses_erm(cfg)) {
    if (!cfg.resume.empty()) throw ConfigError("'resume' is not supported for the ERM baseline");
    ErmResult erm = erm_train(t, source);
    out.state = init_state(t, source.dim(), source.classes);
    out.state.backbone = std::move(erm.backbone);
    out.state.iteration = t.iterations;
    for (std::size_t i = 0; i < erm.losses.size(); ++i) {
      MetaStepReport r;
      r.iteration = static_cast<std::int64_t>(i);
      r.loss_train = erm.losses[i];
      out.history.push_back(r);
    }
    return out;
  }
  std::optional<TrainerState> resume;
  if (!cfg.resume.empty()) {
    if (!std::filesystem::exists(cfg.resume)) throw ConfigError("resume checkpoint '" + cfg.resume + "' does not exist");
    resume = restore_state(load_checkpoint(cfg.resume), t);
  }
  TrainResult r = train(t, source, std::move(resume), hook, cfg.checkpoint_every);
  out.state = std::move(r.state);
  out.history = std::move(r.history);
  return out;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const TrainConfig t = resolve_train_config(cfg);
  const DomainDataset source = load_data_spec(cfg.data);
  const std::map<std::string, std::string> echo = echo_config(cfg);
  CheckpointHook hook;
  if (!cfg.checkpoint.empty() && cfg.checkpoint_every > 0) {
    hook = [&](const TrainerState& s) { save_checkpoint(make_checkpoint(s, t, echo), cfg.checkpoint); };
  }
  const RunOutcome run = run_training(cfg, source, hook);
  if (!cfg.checkpoint.empty()) save_checkpoint(make_checkpoint(run.state, t, echo), cfg.checkpoint);
  if (!cfg.metrics.empty()) {
    std::ostringstream csv;
    write_metrics_csv(csv, run.history, cfg.timing);
    write_text(cfg.metrics, csv.str());
  }
  char line[160];
  std::snprintf(line, sizeof line, "iter=%lld loss=%.6f src_acc=%.4f", static_cast<long long>(run.state.iteration),
                full_loss(run.state.backbone, source), evaluate(run.state.backbone, source).accuracy);
  out << line << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  LoadedModel model = load_model(cfg.checkpoint);
  Backbone backbone = model.state.backbone;
  if (!cfg.adapt_data.empty() && cfg.adapt_steps > 0) {
    backbone = few_shot_adapt(backbone, load_data_spec(cfg.adapt_data), cfg.adapt_steps, cfg.adapt_lr);
  }
  const std::vector<std::string> specs = targets_or(cfg, {cfg.data});
  out << "domain,family,severity,accuracy,correct,n\n";
  double total = 0.0;
  for (const std::string& spec : specs) {
    const MetricsRecord rec = evaluate(backbone, load_data_spec(spec));
    out << rec.domain_id << ',' << (rec.shift ? family_name(rec.shift->family) : "") << ','
        << (rec.shift ? std::to_string(rec.shift->severity) : "") << ',' << fmt(rec.accuracy) << ',' << rec.correct
        << ',' << rec.n << '\n';
    total += rec.accuracy;
  }
  out << "avg,,," << fmt(total / static_cast<double>(specs.size())) << ",,\n";
  return kExitOk;
}

int cmd_score(const RunConfig& cfg, std::ostream& out) {
  LoadedModel model = load_model(cfg.checkpoint);
  const DomainDataset source = load_data_spec(cfg.data);
  if (cfg.targets.empty()) throw ConfigError("'targets' is required for score");
  std::vector<DomainDataset> targets;
  for (const std::string& spec : cfg.targets) targets.push_back(load_data_spec(spec));
  ScoreOptions opts;
  opts.batch_size = cfg.score_batch;
  opts.oracle_bayes = cfg.oracle_bayes;
  opts.bayes_draws = cfg.bayes_draws;
  opts.seed = cfg.train.seed;
  const UncertaintyReport rep = score_domains(model.state.pnet, model.state.backbone, source, targets, opts);

  nlohmann::ordered_json doc;
  doc["sigma_source"] = rep.sigma_source;
  doc["sigma_target"] = rep.sigma_target;
  doc["score"] = rep.score;
  doc["breakdown"] = nlohmann::ordered_json::array();
  for (const DomainScore& s : rep.breakdown) {
    nlohmann::ordered_json row;
    row["domain"] = s.domain_id;
    if (s.shift) {
      row["family"] = family_name(s.shift->family);
      row["severity"] = s.shift->severity;
    }
    row["sigma"] = s.sigma;
    row["score"] = s.score;
    if (s.bayes_variance) row["bayes_variance"] = *s.bayes_variance;
    doc["breakdown"].push_back(row);
  }
  if (rep.spearman) doc["spearman"] = *rep.spearman;
  out << doc.dump(2) << '\n';
  return kExitOk;
}

struct Variant {
  std::string name;
  std::function<void(AblationFlags&)> apply;
};

std::vector<Variant> ablation_family(const std::string& family) {
  const Variant full{"full", [](AblationFlags&) {}};
  if (family == "perturbation") {
    return {full,
            {"random_gaussian", [](AblationFlags& f) { f.random_gaussian = true; }},
            {"deterministic_perturbation", [](AblationFlags& f) { f.deterministic_perturbation = true; }},
            {"random_mu", [](AblationFlags& f) { f.random_mu = true; }},
            {"random_sigma", [](AblationFlags& f) { f.random_sigma = true; }}};
  }
  if (family == "mixup") {
    return {full,
            {"no_mixup", [](AblationFlags& f) { f.no_mixup = true; }},
            {"random_mixup", [](AblationFlags& f) { f.random_mixup = true; }}};
  }
  if (family == "strategy") {
    return {full,
            {"no_adversarial", [](AblationFlags& f) { f.no_adversarial = true; }},
            {"no_meta", [](AblationFlags& f) { f.no_meta = true; }},
            {"no_min_phi_p", [](AblationFlags& f) { f.no_min_phi_p = true; }}};
  }
  throw ConfigError("unknown ablation family '" + family + "' (expected perturbation, mixup or strategy)");
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  const std::vector<Variant> variants = ablation_family(cfg.family);
  const DomainDataset source = load_data_spec(cfg.data);
  std::vector<DomainDataset> targets;
  for (const std::string& spec : targets_or(cfg, {"moons:30", "moons:60"})) targets.push_back(load_data_spec(spec));

  out << "variant,mean,std,per_seed\n";
  for (const Variant& v : variants) {
    std::vector<double> scores;
    for (int s = 0; s < cfg.seeds; ++s) {
      RunConfig run = cfg;
      run.ablation = AblationFlags{};
      v.apply(run.ablation);
      run.train.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
      run.resume.clear();
      const RunOutcome outcome = run_training(run, source);
      double acc = 0.0;
      for (const DomainDataset& t : targets) acc += evaluate(outcome.state.backbone, t).accuracy;
      scores.push_back(acc / static_cast<double>(targets.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> x(scores.data(), static_cast<Index>(scores.size()));
    const double mean = x.mean();
    const double sd =
        scores.size() > 1 ? std::sqrt((x.array() - mean).square().sum() / static_cast<double>(scores.size() - 1)) : 0.0;
    out << v.name << ',' << fmt(mean) << ',' << fmt(sd) << ',';
    for (std::size_t i = 0; i < scores.size(); ++i) out << (i ? ";" : "") << fmt(scores[i]);
    out << '\n';
  }
  return kExitOk;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw ConfigError("'out' is required for gen-data");
  const DomainDataset d = load_data_spec(cfg.data);
  save_dataset(d, cfg.out);
  out << "wrote " << d.size() << " examples to " << cfg.out << '\n';
  return kExitOk;
}

constexpr const char* kUsage =
    "usage: udg <train|eval|score|ablate|gen-data> [--config PATH] [--key value]...\n";

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? kExitUsage : kExitOk;
  }
  const std::string& command = args[0];
  static const std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> commands = {
      {"train", cmd_train}, {"eval", cmd_eval}, {"score", cmd_score}, {"ablate", cmd_ablate}, {"gen-data", cmd_gen_data}};
  const auto cmd = commands.find(command);
  if (cmd == commands.end()) {
    err << "udg: unknown command '" << command << "'\n" << kUsage;
    return kExitUsage;
  }

  RunConfig cfg;
  try {
    // The config file is applied first so that flags override it regardless of order.
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + a + "'");
      std::string key = a.substr(2), value;
      const auto eq = key.find('=');
      if (eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      }
      for (char& c : key) c = c == '-' ? '_' : c;
      if (eq == std::string::npos) {
        const bool next_is_value = i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0;
        if (next_is_value) {
          value = args[++i];
        } else if (is_bool_key(key)) {
          value = "true";
        } else {
          throw ConfigError("option --" + key + " needs a value");
        }
      }
      if (key == "config") {
        config_path = value;
      } else if (key == "target") {
        overrides.emplace_back("target", value);
      } else {
        if (fields().count(key) == 0) throw ConfigError("unknown option --" + key);
        overrides.emplace_back(key, value);
      }
    }
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read config '" + config_path + "'");
      std::stringstream text;
      text << is.rdbuf();
      try {
        apply_config_text(cfg, text.str());
      } catch (const ConfigError& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    bool cleared_targets = false;
    for (const auto& [key, value] : overrides) {
      if (key == "target") {
        if (!cleared_targets) cfg.targets.clear();
        cleared_targets = true;
        cfg.targets.push_back(value);
      } else {
        apply_setting(cfg, key, value);
      }
    }
    resolve_train_config(cfg);
    return cmd->second(cfg, out);
  } catch (const NonFiniteLossError& e) {
    err << "udg: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    err << "udg: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "udg: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "udg: checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "udg: invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "udg: error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace udg
