#include "clvsa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "clvsa/rng.hpp"

namespace clvsa::train {

using diff::NodeRef;
using diff::Tape;
using diff::Tensor;
using model::Model;
using model::ModelOutput;
using model::ParamStore;

AdamState make_adam(const ParamStore& params, AdamConfig cfg) {
  AdamState state;
  state.cfg = cfg;
  for (int i = 0; i < params.count(); ++i) {
    state.m.push_back(Tensor::zeros_like(params.tensor(i)));
    state.v.push_back(Tensor::zeros_like(params.tensor(i)));
  }
  return state;
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (static_cast<int>(grads.size()) != params.count())
    throw std::invalid_argument("adam_step: gradient count mismatch");
  ++state.step;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (int p = 0; p < params.count(); ++p) {
    Tensor& theta = params.tensor(p);
    const Tensor& g = grads[static_cast<std::size_t>(p)];
    if (!theta.same_shape(g))
      throw std::invalid_argument("adam_step: shape mismatch at " +
                                  params.name(p));
    Tensor& m = state.m[static_cast<std::size_t>(p)];
    Tensor& v = state.v[static_cast<std::size_t>(p)];
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      theta[i] -= state.cfg.lr * m_hat / (std::sqrt(v_hat) + state.cfg.eps);
    }
  }
}

std::vector<std::size_t> sample_minibatch(std::size_t pool, int batch,
                                          std::mt19937_64& rng) {
  if (pool == 0) throw std::invalid_argument("sample_minibatch: empty pool");
  if (batch < 1) throw std::invalid_argument("sample_minibatch: batch < 1");
  std::uniform_int_distribution<std::size_t> d(0, pool - 1);
  std::vector<std::size_t> picks(static_cast<std::size_t>(batch));
  for (auto& p : picks) p = d(rng);
  return picks;
}

TrainingDiverged::TrainingDiverged(long it,
                                   const objective::ObjectiveBreakdown& b)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "non-finite loss at iteration " << it
           << " (ce_forward=" << b.ce_forward
           << " ce_backward=" << b.ce_backward << " kld=" << b.kld
           << " l2=" << b.l2 << " beta=" << b.beta << ")";
        return os.str();
      }()),
      iteration(it),
      breakdown(b) {}

namespace {

bool finite_breakdown(const objective::ObjectiveBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.ce_forward) &&
         std::isfinite(b.ce_backward) && std::isfinite(b.kld) &&
         std::isfinite(b.l2);
}

}  // namespace

TrainResult train_session(Model& m, const SessionData& data,
                          const TrainConfig& cfg) {
  if (data.train_pairs.empty())
    throw std::invalid_argument("train_session: no training pairs");
  if (cfg.iterations < 1 || cfg.batch < 1)
    throw std::invalid_argument("train_session: iterations and batch >= 1");

  std::mt19937_64 data_rng = make_rng(cfg.seed, 0xDA7AuLL);
  std::mt19937_64 model_rng = make_rng(cfg.seed, 0x30DE1uLL);

  AdamState adam = make_adam(m.params(), cfg.adam);
  TrainResult result;
  result.best_params = m.params();
  result.best_val_ce = std::numeric_limits<double>::infinity();

  const int n_params = m.params().count();
  for (long it = 0; it < cfg.iterations; ++it) {
    const std::vector<std::size_t> picks =
        sample_minibatch(data.train_pairs.size(), cfg.batch, data_rng);

    std::vector<Tensor> grad_acc;
    grad_acc.reserve(static_cast<std::size_t>(n_params));
    for (int p = 0; p < n_params; ++p)
      grad_acc.push_back(Tensor::zeros_like(m.params().tensor(p)));
    objective::ObjectiveBreakdown mean_breakdown;
    mean_breakdown.beta = objective::beta_at(it, cfg.anneal);

    // one tape per pair keeps peak memory at a single day-pair graph
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
    for (std::size_t pick : picks) {
      Tape tape;
      Model::Bound bound = m.bind(tape);
      ModelOutput out = m.forward_pass(tape, bound, data.train_pairs[pick],
                                       model::Mode::train, model_rng);
      objective::ObjectiveResult obj = objective::total_objective(
          out, objective::labels_for_pair(data.train_pairs[pick]), it,
          cfg.alpha, cfg.gamma, cfg.anneal, bound.nodes);
      tape.backward(obj.loss);
      for (int p = 0; p < n_params; ++p) {
        const Tensor& g = bound.nodes[static_cast<std::size_t>(p)].grad();
        Tensor& acc = grad_acc[static_cast<std::size_t>(p)];
        for (std::int64_t i = 0; i < g.size(); ++i)
          acc[i] += g[i] * inv_batch;
      }
      mean_breakdown.ce_forward += obj.breakdown.ce_forward * inv_batch;
      mean_breakdown.ce_backward += obj.breakdown.ce_backward * inv_batch;
      mean_breakdown.kld += obj.breakdown.kld * inv_batch;
      mean_breakdown.l2 = obj.breakdown.l2;  // identical across pairs
      mean_breakdown.total += obj.breakdown.total * inv_batch;
    }

    if (!finite_breakdown(mean_breakdown))
      throw TrainingDiverged(it, mean_breakdown);
    result.log.push_back({it, mean_breakdown});

    adam_step(m.params(), grad_acc, adam);

    const bool last = it + 1 == cfg.iterations;
    if (!data.val_pairs.empty() && cfg.val_every > 0 &&
        ((it + 1) % cfg.val_every == 0 || last)) {
      const EvalMetrics val = evaluate_pairs(m, m.params(), data.val_pairs);
      result.validation.push_back({it + 1, val.ce, val.accuracy});
      if (val.ce < result.best_val_ce) {
        result.best_val_ce = val.ce;
        result.best_iteration = it + 1;
        result.best_params = m.params();
      }
    }
  }

  if (result.validation.empty()) {
    result.best_params = m.params();
    result.best_iteration = cfg.iterations;
    result.best_val_ce = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

EvalMetrics evaluate_pairs(const Model& m, const ParamStore& params,
                           const std::vector<market::DayPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_pairs: no pairs");
  Model scratch = m;  // cheap: parameters are the bulk and must be swapped
  scratch.params() = params;
  std::mt19937_64 rng(0);  // eval mode draws nothing from it
  double ce_sum = 0.0;
  std::int64_t labeled = 0, hits = 0;
  for (const market::DayPair& pair : pairs) {
    Tape tape;
    Model::Bound bound = scratch.bind(tape);
    ModelOutput out =
        scratch.forward_pass(tape, bound, pair, model::Mode::eval, rng);
    const std::vector<int> classes = model::predict_classes(out);
    for (std::size_t t = 0; t < out.forward_probs.size(); ++t) {
      const auto& label = pair.day_b.labels[t];
      if (!label) continue;
      const int klass = market::label_to_class(*label);
      const double p = out.forward_probs[t].value()[klass];
      ce_sum += -std::log(std::max(p, 1e-12));
      hits += classes[t] == klass ? 1 : 0;
      ++labeled;
    }
  }
  if (labeled == 0)
    throw std::invalid_argument("evaluate_pairs: no labeled steps");
  EvalMetrics metrics;
  metrics.ce = ce_sum / static_cast<double>(labeled);
  metrics.accuracy =
      static_cast<double>(hits) / static_cast<double>(labeled);
  metrics.labeled_steps = labeled;
  return metrics;
}

std::vector<FramePrediction> predict_pairs(
    const Model& m, const ParamStore& params,
    const std::vector<market::DayPair>& pairs) {
  Model scratch = m;
  scratch.params() = params;
  std::mt19937_64 rng(0);
  std::vector<FramePrediction> preds;
  for (const market::DayPair& pair : pairs) {
    Tape tape;
    Model::Bound bound = scratch.bind(tape);
    ModelOutput out =
        scratch.forward_pass(tape, bound, pair, model::Mode::eval, rng);
    const std::vector<int> classes = model::predict_classes(out);
    for (std::size_t t = 0; t < classes.size(); ++t) {
      FramePrediction p;
      p.ts = pair.day_b.frames[t].start;
      p.predicted = market::class_to_label(classes[t]);
      p.truth = pair.day_b.labels[t];
      p.close = pair.day_b.frames[t].close_raw;
      preds.push_back(p);
    }
  }
  return preds;
}

double prediction_accuracy(const std::vector<FramePrediction>& preds) {
  std::int64_t labeled = 0, hits = 0;
  for (const FramePrediction& p : preds) {
    if (!p.truth) continue;
    ++labeled;
    if (*p.truth == p.predicted) ++hits;
  }
  if (labeled == 0)
    throw std::invalid_argument("prediction_accuracy: no labeled frames");
  return static_cast<double>(hits) / static_cast<double>(labeled);
}

model::ModelConfig assemble_baseline(model::ModelKind kind,
                                     model::ModelConfig base) {
  base.kind = kind;
  switch (kind) {
    case model::ModelKind::clvsa:
      base.variational = true;
      base.attention = true;
      base.convolutional = true;
      base.use_encoder = true;
      break;
    case model::ModelKind::clsa:
      base.variational = false;
      base.attention = true;
      base.convolutional = true;
      base.use_encoder = true;
      break;
    case model::ModelKind::seq2seq:
      base.variational = false;
      base.attention = true;
      base.convolutional = false;
      base.use_encoder = true;
      break;
    case model::ModelKind::lstm:
      base.variational = false;
      base.attention = false;
      base.convolutional = false;
      base.use_encoder = false;
      break;
    case model::ModelKind::cnn:
      base.variational = false;
      base.attention = false;
      base.convolutional = true;
      base.use_encoder = false;
      break;
  }
  base.validate();
  return base;
}

namespace {

std::vector<market::TradingDay> slice_days(
    const std::vector<market::TradingDay>& days,
    const market::DateRange& range) {
  std::vector<market::TradingDay> out;
  for (const market::TradingDay& d : days)
    if (range.contains(d.date)) out.push_back(d);
  return out;
}

}  // namespace

WalkForwardResult run_walk_forward(
    const std::vector<market::TradingDay>& days,
    const WalkForwardConfig& cfg) {
  std::vector<int> dates;
  dates.reserve(days.size());
  for (const market::TradingDay& d : days) dates.push_back(d.date);
  const market::SplitPlan plan = market::plan_walk_forward(
      dates, cfg.train_len, cfg.val_len, cfg.test_len, cfg.shift);

  WalkForwardResult result;
  std::map<Timestamp, FramePrediction> stream;  // earlier session wins

  for (std::size_t s = 0; s < plan.sessions.size(); ++s) {
    const market::Session& session = plan.sessions[s];
    std::vector<market::TradingDay> train_days =
        slice_days(days, session.train);
    std::vector<market::TradingDay> val_days =
        slice_days(days, session.validation);
    std::vector<market::TradingDay> test_days = slice_days(days, session.test);

    SessionArtifacts art;
    art.stats = market::fit_normalizer(train_days);
    double close_sum = 0.0;
    std::int64_t close_count = 0;
    for (const auto& d : train_days)
      for (const auto& f : d.frames) {
        close_sum += f.close_raw;
        ++close_count;
      }
    art.thresholds =
        cfg.fixed_lambda
            ? market::thresholds_from_lambda(
                  *cfg.fixed_lambda,
                  close_sum / static_cast<double>(close_count))
            : market::calibrate_lambda(train_days);

    // labels are assigned within each split slice so no target ever uses a
    // close from a later range
    market::label_days(train_days, art.thresholds);
    market::label_days(val_days, art.thresholds);
    market::label_days(test_days, art.thresholds);

    SessionData data;
    data.train_pairs = market::make_day_pairs(
        market::apply_normalizer(train_days, art.stats), cfg.max_gap_days);
    data.val_pairs = market::make_day_pairs(
        market::apply_normalizer(val_days, art.stats), cfg.max_gap_days);
    data.test_pairs = market::make_day_pairs(
        market::apply_normalizer(test_days, art.stats), cfg.max_gap_days);

    Model m(cfg.model, cfg.train.seed);
    art.train = train_session(m, data, cfg.train);
    art.final_params = m.params();
    art.test_predictions =
        predict_pairs(m, art.train.best_params, data.test_pairs);

    art.record.seed = cfg.train.seed;
    art.record.session = static_cast<int>(s);
    art.record.iterations = cfg.train.iterations;
    std::vector<int> preds, truth;
    for (const FramePrediction& p : art.test_predictions) {
      if (!p.truth) continue;
      preds.push_back(p.predicted);
      truth.push_back(*p.truth);
    }
    if (!preds.empty())
      art.record.map = bt::mean_average_precision(preds, truth);
    std::vector<bt::PricedPrediction> priced;
    for (const FramePrediction& p : art.test_predictions)
      priced.push_back({p.ts, p.predicted, p.close});
    if (!priced.empty()) {
      const bt::BacktestReport rep = bt::simulate(priced, cfg.cost);
      art.record.aar = rep.aar;
      art.record.sharpe = rep.sharpe;
    }

    for (const FramePrediction& p : art.test_predictions)
      stream.emplace(p.ts, p);  // keeps the first (earliest session) entry

    result.sessions.push_back(std::move(art));
  }

  result.stream.reserve(stream.size());
  for (const auto& [ts, p] : stream) result.stream.push_back(p);

  std::vector<int> preds, truth;
  std::vector<bt::PricedPrediction> priced;
  for (const FramePrediction& p : result.stream) {
    priced.push_back({p.ts, p.predicted, p.close});
    if (!p.truth) continue;
    preds.push_back(p.predicted);
    truth.push_back(*p.truth);
  }
  if (!preds.empty()) {
    result.overall_map = bt::mean_average_precision(preds, truth);
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      hits += preds[i] == truth[i] ? 1 : 0;
    result.overall_accuracy =
        static_cast<double>(hits) / static_cast<double>(preds.size());
  }
  if (!priced.empty()) result.overall = bt::simulate(priced, cfg.cost);
  return result;
}

MetricStats metric_stats(const std::vector<double>& values) {
  MetricStats stats;
  if (values.empty()) return stats;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  stats.mean = mean;
  if (values.size() < 2) return stats;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  stats.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (mean != 0.0) stats.cv = stats.stddev / mean;
  return stats;
}

RepeatResult repeat_runs(const std::vector<market::TradingDay>& days,
                         const WalkForwardConfig& cfg,
                         const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2)
    throw std::invalid_argument("repeat_runs: need >= 2 seeds");
  RepeatResult result;
  std::vector<double> maps, aars, sharpes;
  for (std::uint64_t seed : seeds) {
    WalkForwardConfig run_cfg = cfg;
    run_cfg.train.seed = seed;
    const WalkForwardResult wf = run_walk_forward(days, run_cfg);
    SeedSummary summary;
    summary.seed = seed;
    summary.map = wf.overall_map;
    summary.aar = wf.overall.aar;
    summary.sharpe = wf.overall.sharpe;
    summary.accuracy = wf.overall_accuracy;
    result.per_seed.push_back(summary);
    maps.push_back(summary.map);
    if (summary.aar) aars.push_back(*summary.aar);
    if (summary.sharpe) sharpes.push_back(*summary.sharpe);
  }
  result.map = metric_stats(maps);
  result.aar = metric_stats(aars);
  result.sharpe = metric_stats(sharpes);
  return result;
}

}  // namespace clvsa::train
