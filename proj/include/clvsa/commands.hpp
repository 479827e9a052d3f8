#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clvsa/synth.hpp"
#include "clvsa/trainer.hpp"

namespace clvsa::cli {

// input/config problems exit with code 2; computation failures with 1
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One JSON document with optional sections {data, model, train, backtest,
// synth}; absent fields keep their defaults.
struct Config {
  std::string data_csv;
  int frames_per_day = 48;
  int max_gap_days = 4;
  model::ModelConfig model;
  train::TrainConfig train;
  int train_days = 756;
  int val_days = 10;
  int test_days = 10;
  int shift_days = 5;
  std::optional<double> fixed_lambda;
  bt::CostModel cost;
  double initial_capital = 100000.0;
  market::SynthConfig synth;
};

Config load_config(const std::string& path);
Config parse_config(const std::string& text, const std::string& name);
std::string config_to_json(const Config& cfg);  // fully resolved

struct SynthOptions {
  std::string config_path;
  std::string out_path;
};
void cmd_synth(const SynthOptions& opt);

struct TrainOptions {
  std::string config_path;
  std::string data_path;  // overrides config.data_csv when set
  std::string out_dir;
  std::string model_kind;  // clvsa|clsa|lstm|seq2seq|cnn, empty = config
  std::optional<std::uint64_t> seed;
};
void cmd_train(const TrainOptions& opt);

struct BacktestOptions {
  std::string predictions_path;
  std::string prices_path;
  std::string cost_preset = "CL";
  std::string out_dir;
};
void cmd_backtest(const BacktestOptions& opt);

struct GradcheckOptions {
  std::string scale = "toy";  // toy|full
  std::string tamper_op;      // test hook: break one gradient rule
  int seeds = 10;
};
struct GradcheckRow {
  std::string component;
  double max_rel_err = 0.0;
  std::int64_t coords = 0;
};
struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double worst = 0.0;
  bool passed(double tol = 1e-4) const { return worst <= tol; }
};
GradcheckReport run_gradcheck(const GradcheckOptions& opt);
void cmd_gradcheck(const GradcheckOptions& opt);  // throws on failure

struct RepeatOptions {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::string model_kind;
  std::vector<std::uint64_t> seeds;
};
void cmd_repeat(const RepeatOptions& opt);

// maps exceptions to the documented exit codes and prints the message
int run_command(const std::function<void()>& body);

}  // namespace clvsa::cli
