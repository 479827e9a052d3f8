#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clvsa/backtest.hpp"
#include "clvsa/model.hpp"
#include "clvsa/objective.hpp"

namespace clvsa::train {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<diff::Tensor> m, v;  // mirror the parameter shapes
};

AdamState make_adam(const model::ParamStore& params, AdamConfig cfg = {});
// bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + eps)
void adam_step(model::ParamStore& params,
               const std::vector<diff::Tensor>& grads, AdamState& state);

// uniform with replacement, fully seeded
std::vector<std::size_t> sample_minibatch(std::size_t pool, int batch,
                                          std::mt19937_64& rng);

struct TrainConfig {
  long iterations = 1000;
  int batch = 16;
  std::uint64_t seed = 1;
  double alpha = 2.5e-4;
  double gamma = 1e-5;
  objective::AnnealSchedule anneal;
  long val_every = 50;
  AdamConfig adam;
};

// thrown when the loss stops being finite; carries the offending iteration
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(long iteration, const objective::ObjectiveBreakdown& b);
  long iteration;
  objective::ObjectiveBreakdown breakdown;
};

struct IterationLog {
  long iteration = 0;
  objective::ObjectiveBreakdown breakdown;
};

struct ValidationPoint {
  long iteration = 0;
  double ce = 0.0;
  double accuracy = 0.0;
};

struct SessionData {
  std::vector<market::DayPair> train_pairs;
  std::vector<market::DayPair> val_pairs;
  std::vector<market::DayPair> test_pairs;
};

struct TrainResult {
  std::vector<IterationLog> log;
  std::vector<ValidationPoint> validation;
  model::ParamStore best_params;  // lowest validation CE (final when no val)
  long best_iteration = 0;
  double best_val_ce = 0.0;
};

// iterations x (sample, forward, objective, backward, adam); gradients are
// averaged over the minibatch on per-pair tapes to bound memory
TrainResult train_session(model::Model& m, const SessionData& data,
                          const TrainConfig& cfg);

// eval-mode mean cross entropy and accuracy over the labeled steps
struct EvalMetrics {
  double ce = 0.0;
  double accuracy = 0.0;
  std::int64_t labeled_steps = 0;
};
EvalMetrics evaluate_pairs(const model::Model& m,
                           const model::ParamStore& params,
                           const std::vector<market::DayPair>& pairs);

struct FramePrediction {
  Timestamp ts;
  int predicted = 0;  // -1 / 0 / +1
  std::optional<int> truth;
  double close = 0.0;
};

std::vector<FramePrediction> predict_pairs(
    const model::Model& m, const model::ParamStore& params,
    const std::vector<market::DayPair>& pairs);

double prediction_accuracy(const std::vector<FramePrediction>& preds);

model::ModelConfig assemble_baseline(model::ModelKind kind,
                                     model::ModelConfig base = {});

struct WalkForwardConfig {
  int frames_per_day = 48;
  int train_len = 756;  // trading days
  int val_len = 10;
  int test_len = 10;
  int shift = 5;
  int max_gap_days = 4;
  model::ModelConfig model;
  TrainConfig train;
  bt::CostModel cost;
  // set when calibrate_lambda cannot run (tiny desk datasets)
  std::optional<double> fixed_lambda;
};

struct RunRecord {
  std::uint64_t seed = 0;
  int session = 0;
  double map = 0.0;
  std::optional<double> aar;
  std::optional<double> sharpe;
  long iterations = 0;
  std::string checkpoint;  // path of the weights used for test predictions
};

struct SessionArtifacts {
  RunRecord record;
  TrainResult train;
  market::NormStats stats;
  market::LabelThresholds thresholds;
  std::vector<FramePrediction> test_predictions;
  model::ParamStore final_params;
};

struct WalkForwardResult {
  std::vector<SessionArtifacts> sessions;
  std::vector<FramePrediction> stream;  // deduplicated, chronological
  bt::BacktestReport overall;
  double overall_map = 0.0;
  double overall_accuracy = 0.0;
};

// Per session: fit normalizer and thresholds on the train range only, train,
// predict the test range with the best-validation weights. Test predictions
// are concatenated chronologically; when test windows overlap (shift <
// test_len) the earlier session keeps each date.
WalkForwardResult run_walk_forward(const std::vector<market::TradingDay>& days,
                                   const WalkForwardConfig& cfg);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::optional<double> cv;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  double map = 0.0;
  std::optional<double> aar;
  std::optional<double> sharpe;
  double accuracy = 0.0;
};

struct RepeatResult {
  std::vector<SeedSummary> per_seed;
  MetricStats map, aar, sharpe;
};

// runs the walk-forward once per seed and reports cross-seed dispersion
RepeatResult repeat_runs(const std::vector<market::TradingDay>& days,
                         const WalkForwardConfig& cfg,
                         const std::vector<std::uint64_t>& seeds);

MetricStats metric_stats(const std::vector<double>& values);

}  // namespace clvsa::train
