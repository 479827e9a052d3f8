#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clvsa/dates.hpp"

namespace clvsa::bt {

struct CostModel {
  double round_trip_cost = 85.5;  // charged once per closed trade
  double multiplier = 1000.0;     // contract multiplier
  std::string instrument = "CL";
};

// named presets; "CL" carries the light-sweet-crude constants
CostModel cost_preset(const std::string& name);

enum class Direction { long_side, short_side };

struct TradeRecord {
  Direction direction = Direction::long_side;
  Timestamp entry_time, exit_time;  // exit strictly after entry
  double entry_price = 0, exit_price = 0;
  double pnl = 0;  // cost included
};

struct EquityPoint {
  Timestamp ts;
  double equity = 0;
};

struct PricedPrediction {
  Timestamp ts;
  int prediction = 0;  // -1 / 0 / +1
  double close = 0;
};

struct BacktestReport {
  double initial_capital = 100000.0;
  std::vector<TradeRecord> trades;
  std::vector<EquityPoint> equity;  // per-frame mark to market
  double final_equity = 0;
  double cumulative_return = 0;
  std::optional<double> aar;     // empty when the span is a single day
  std::optional<double> sharpe;  // empty when undefined (zero variance)
  std::vector<std::pair<std::string, double>> monthly;  // ("YYYY-MM", return)
};

// long: (exit - entry) * multiplier - cost; short mirrored
double trade_pnl(Direction dir, double entry, double exit,
                 const CostModel& cost);

// Strict turning-point protocol: flat until the first nonzero prediction; an
// opposite prediction closes the position and opens the reverse at the same
// frame close; Flat holds; any open position is closed at the last price. No
// position is opened at the final frame (it could never be held).
BacktestReport simulate(const std::vector<PricedPrediction>& predictions,
                        const CostModel& cost,
                        double initial_capital = 100000.0);

// macro average of per-class precision over Up/Flat/Down; a class that was
// never predicted contributes zero
double mean_average_precision(const std::vector<int>& predictions,
                              const std::vector<int>& truth);

// simple (non-compounding) annualization over a fractional-day span
double annual_return(double initial, double final_equity, double span_days);

// daily mark-to-market returns, mean/std * sqrt(252); nullopt when the
// sample deviation is zero
std::optional<double> sharpe(const std::vector<EquityPoint>& equity);

// per calendar month P&L over initial capital; sums to the cumulative return
std::vector<std::pair<std::string, double>> monthly_returns(
    const std::vector<EquityPoint>& equity, double initial_capital);

// sample std / mean; zero mean is an error
double coefficient_of_variation(const std::vector<double>& values);

}  // namespace clvsa::bt
