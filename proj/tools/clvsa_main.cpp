#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clvsa/commands.hpp"
#include "clvsa/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CLVSA: convolutional-LSTM variational seq2seq trading "
               "pipeline"};
  app.require_subcommand(1);

  bool serial_kernels = false;
  app.add_flag("--serial-kernels", serial_kernels,
               "disable the OpenMP kernel path");

  auto* synth = app.add_subcommand("synth", "generate a synthetic bar CSV");
  clvsa::cli::SynthOptions synth_opt;
  synth->add_option("--config", synth_opt.config_path, "config JSON")
      ->required();
  synth->add_option("--out", synth_opt.out_path, "output CSV path")
      ->required();

  auto* train = app.add_subcommand("train", "walk-forward training run");
  clvsa::cli::TrainOptions train_opt;
  train->add_option("--config", train_opt.config_path, "config JSON")
      ->required();
  train->add_option("--data", train_opt.data_path, "bar CSV (overrides "
                                                   "config data.csv)");
  train->add_option("--out", train_opt.out_dir, "output directory")
      ->required();
  train->add_option("--model", train_opt.model_kind,
                    "clvsa|clsa|lstm|seq2seq|cnn");
  std::uint64_t seed_flag = 0;
  auto* seed_opt =
      train->add_option("--seed", seed_flag, "training seed override");

  auto* backtest =
      app.add_subcommand("backtest", "simulate a prediction stream");
  clvsa::cli::BacktestOptions bt_opt;
  backtest
      ->add_option("--predictions", bt_opt.predictions_path,
                   "CSV date,time,prediction")
      ->required();
  backtest
      ->add_option("--prices", bt_opt.prices_path, "CSV date,time,close")
      ->required();
  backtest->add_option("--cost-preset", bt_opt.cost_preset,
                       "cost preset name (CL, zero)");
  backtest->add_option("--out", bt_opt.out_dir, "output directory")
      ->required();

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  clvsa::cli::GradcheckOptions gc_opt;
  gradcheck->add_option("--scale", gc_opt.scale, "toy|full");
  gradcheck->add_option("--seeds", gc_opt.seeds, "number of seeds");
  gradcheck->add_option("--tamper", gc_opt.tamper_op,
                        "diagnostics: corrupt one op's gradient rule and "
                        "expect the audit to fail");

  auto* repeat =
      app.add_subcommand("repeat", "repeated seeds + dispersion report");
  clvsa::cli::RepeatOptions rep_opt;
  repeat->add_option("--config", rep_opt.config_path, "config JSON")
      ->required();
  repeat->add_option("--data", rep_opt.data_path, "bar CSV");
  repeat->add_option("--out", rep_opt.out_dir, "output directory")
      ->required();
  repeat->add_option("--model", rep_opt.model_kind,
                     "clvsa|clsa|lstm|seq2seq|cnn");
  std::vector<std::uint64_t> seeds;
  repeat->add_option("--seeds", seeds, "comma separated seed list")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (serial_kernels)
    clvsa::kernels::set_mode(clvsa::kernels::Mode::serial);

  return clvsa::cli::run_command([&] {
    if (synth->parsed()) return clvsa::cli::cmd_synth(synth_opt);
    if (train->parsed()) {
      if (!seed_opt->empty()) train_opt.seed = seed_flag;
      return clvsa::cli::cmd_train(train_opt);
    }
    if (backtest->parsed()) return clvsa::cli::cmd_backtest(bt_opt);
    if (gradcheck->parsed()) return clvsa::cli::cmd_gradcheck(gc_opt);
    if (repeat->parsed()) {
      rep_opt.seeds = seeds;
      return clvsa::cli::cmd_repeat(rep_opt);
    }
    throw clvsa::cli::ConfigError("no subcommand given");
  });
}
