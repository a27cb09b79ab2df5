#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "udg/dataset.hpp"
#include "udg/meta_trainer.hpp"

namespace udg {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // I/O and other runtime errors
inline constexpr int kExitUsage = 2;    // bad arguments or configuration
inline constexpr int kExitNumeric = 3;  // non-finite loss, degenerate statistics

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct AblationFlags {
  bool random_gaussian = false;
  bool deterministic_perturbation = false;
  bool random_mu = false;
  bool random_sigma = false;
  bool no_mixup = false;
  bool random_mixup = false;
  bool no_adversarial = false;
  bool no_meta = false;
  bool no_min_phi_p = false;
};

struct RunConfig {
  TrainConfig train;
  AblationFlags ablation;
  std::string method = "udg";  // udg | erm
  std::string data = "moons:0";
  std::vector<std::string> targets;
  std::string checkpoint;  // written by train, read by eval and score
  std::string resume;      // checkpoint to continue training from
  std::string metrics;     // metrics CSV path for train
  std::string out;         // gen-data output path
  std::string family;      // ablate family
  int seeds = 5;
  int checkpoint_every = 0;
  bool timing = false;
  bool oracle_bayes = false;
  int bayes_draws = 30;
  Index score_batch = 0;
  std::string adapt_data;
  int adapt_steps = 0;
  double adapt_lr = 0.05;
};

// Sets one key. Keys use underscores; values are plain text. Throws
// ConfigError naming the key on unknown keys or malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat "key = value" text with '#' comments, applied on top of `cfg`. Errors
// carry the 1-based line number.
void apply_config_text(RunConfig& cfg, std::string_view text);

// Every key with its effective value. Feeding the result back through
// apply_setting reproduces the same echo.
std::map<std::string, std::string> echo_config(const RunConfig& cfg);

// Checks the cross-field rules (ablation exclusivity, TrainConfig ranges) and
// returns the TrainConfig with the ablation flags folded in.
TrainConfig resolve_train_config(const RunConfig& cfg);

// Data specs:
//   moons:ROT[:N[:NOISE[:SEED]]]             defaults N=400 NOISE=0.1 SEED=0
//   glyphs:clean[:N[:SEED]]                   defaults N=500 SEED=0
//   glyphs:FAMILY:SEVERITY[:N[:SEED]]
//   anything else is a dataset file path
DomainDataset load_data_spec(const std::string& spec);

void write_metrics_csv(std::ostream& os, std::span<const MetaStepReport> history, bool timing);

// udg <train|eval|score|ablate|gen-data> [--config PATH] [--key value]...
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace udg
