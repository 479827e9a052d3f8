#include "clvsa/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace clvsa::bt {

CostModel cost_preset(const std::string& name) {
  if (name == "CL") return CostModel{85.5, 1000.0, "CL"};
  if (name == "zero") return CostModel{0.0, 1.0, "zero"};
  throw std::invalid_argument("unknown cost preset: " + name);
}

double trade_pnl(Direction dir, double entry, double exit,
                 const CostModel& cost) {
  if (entry <= 0.0 || exit <= 0.0)
    throw std::invalid_argument("trade_pnl: nonpositive price");
  const double move = dir == Direction::long_side ? exit - entry
                                                  : entry - exit;
  return move * cost.multiplier - cost.round_trip_cost;
}

BacktestReport simulate(const std::vector<PricedPrediction>& predictions,
                        const CostModel& cost, double initial_capital) {
  if (predictions.empty())
    throw std::invalid_argument("simulate: empty predictions");
  if (cost.round_trip_cost < 0.0 || cost.multiplier <= 0.0)
    throw std::invalid_argument("simulate: bad cost model");
  for (std::size_t i = 1; i < predictions.size(); ++i)
    if (!(predictions[i - 1].ts < predictions[i].ts))
      throw std::invalid_argument(
          "simulate: predictions not chronological at " +
          format_timestamp(predictions[i].ts));

  BacktestReport report;
  report.initial_capital = initial_capital;

  double cash = initial_capital;
  int position = 0;  // -1 short, 0 flat, +1 long
  double entry_price = 0.0;
  Timestamp entry_time{};

  auto close_position = [&](const PricedPrediction& at) {
    const Direction dir =
        position > 0 ? Direction::long_side : Direction::short_side;
    TradeRecord trade;
    trade.direction = dir;
    trade.entry_time = entry_time;
    trade.exit_time = at.ts;
    trade.entry_price = entry_price;
    trade.exit_price = at.close;
    trade.pnl = trade_pnl(dir, entry_price, at.close, cost);
    cash += trade.pnl;
    report.trades.push_back(trade);
    position = 0;
  };

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const PricedPrediction& p = predictions[i];
    if (p.close <= 0.0)
      throw std::invalid_argument("simulate: nonpositive price at " +
                                  format_timestamp(p.ts));
    const bool final_frame = i + 1 == predictions.size();
    if (p.prediction != 0 && p.prediction != position) {
      if (position != 0) close_position(p);
      if (!final_frame) {
        position = p.prediction;
        entry_price = p.close;
        entry_time = p.ts;
      }
    }
    // mark to market; the round-trip cost lands when the trade closes
    double unrealized = 0.0;
    if (position != 0)
      unrealized = (p.close - entry_price) * cost.multiplier *
                   static_cast<double>(position);
    report.equity.push_back({p.ts, cash + unrealized});
  }

  if (position != 0) close_position(predictions.back());
  report.equity.back().equity = cash;

  report.final_equity = cash;
  report.cumulative_return =
      (report.final_equity - initial_capital) / initial_capital;
  const double span_days =
      static_cast<double>(predictions.back().ts.date -
                          predictions.front().ts.date) +
      static_cast<double>(predictions.back().ts.minute -
                          predictions.front().ts.minute) /
          1440.0;
  if (span_days > 0.0)
    report.aar = annual_return(initial_capital, report.final_equity,
                               span_days);
  std::int64_t days = 1;
  for (std::size_t i = 1; i < predictions.size(); ++i)
    if (predictions[i].ts.date != predictions[i - 1].ts.date) ++days;
  if (days >= 3) report.sharpe = sharpe(report.equity);
  report.monthly = monthly_returns(report.equity, initial_capital);
  return report;
}

double mean_average_precision(const std::vector<int>& predictions,
                              const std::vector<int>& truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("map: length mismatch");
  if (predictions.empty())
    throw std::invalid_argument("map: empty input");
  double sum = 0.0;
  for (int klass : {1, 0, -1}) {
    std::int64_t predicted = 0, correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (predictions[i] != klass) continue;
      ++predicted;
      if (truth[i] == klass) ++correct;
    }
    if (predicted > 0)
      sum += static_cast<double>(correct) / static_cast<double>(predicted);
  }
  return sum / 3.0;
}

double annual_return(double initial, double final_equity, double span_days) {
  if (span_days <= 0.0)
    throw std::invalid_argument("annual_return: zero-length span");
  if (initial <= 0.0)
    throw std::invalid_argument("annual_return: nonpositive capital");
  return (final_equity / initial - 1.0) * (365.25 / span_days);
}

std::optional<double> sharpe(const std::vector<EquityPoint>& equity) {
  // collapse to day-end equity, then daily returns
  std::vector<double> day_end;
  for (std::size_t i = 0; i < equity.size(); ++i) {
    if (i + 1 < equity.size() && equity[i + 1].ts.date == equity[i].ts.date)
      continue;
    day_end.push_back(equity[i].equity);
  }
  std::vector<double> returns;
  for (std::size_t i = 1; i < day_end.size(); ++i) {
    if (day_end[i - 1] <= 0.0)
      throw std::invalid_argument("sharpe: equity crossed zero");
    returns.push_back(day_end[i] / day_end[i - 1] - 1.0);
  }
  if (returns.size() < 2)
    throw std::invalid_argument("sharpe: need >= 2 daily returns");
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double ss = 0.0;
  for (double r : returns) ss += (r - mean) * (r - mean);
  const double sd =
      std::sqrt(ss / static_cast<double>(returns.size() - 1));
  if (sd == 0.0) return std::nullopt;  // undefined, never a silent number
  return mean / sd * std::sqrt(252.0);
}

std::vector<std::pair<std::string, double>> monthly_returns(
    const std::vector<EquityPoint>& equity, double initial_capital) {
  if (equity.empty()) return {};
  std::map<std::string, double> month_end;  // ordered by key
  for (const EquityPoint& p : equity)
    month_end[format_month(p.ts.date)] = p.equity;  // last point wins
  std::vector<std::pair<std::string, double>> out;
  double prev = initial_capital;
  for (const auto& [month, eq] : month_end) {
    out.emplace_back(month, (eq - prev) / initial_capital);
    prev = eq;
  }
  return out;
}

double coefficient_of_variation(const std::vector<double>& values) {
  if (values.size() < 2)
    throw std::invalid_argument("cv: need >= 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (mean == 0.0) throw std::invalid_argument("cv: zero mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return sd / mean;
}

}  // namespace clvsa::bt
