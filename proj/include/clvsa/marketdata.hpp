#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clvsa/dates.hpp"
#include "clvsa/tensor.hpp"

namespace clvsa::market {

inline constexpr int kFrameRows = 5;        // Open High Low Close Volume
inline constexpr int kBarsPerFrame = 6;     // six 5-minute bars
inline constexpr int kBarMinutes = 5;

struct Bar {
  int date = 0;           // serial day
  int minute = 0;         // minute of day, 5-minute aligned
  double open = 0, high = 0, low = 0, close = 0;
  std::int64_t volume = 0;
};

struct ParseResult {
  std::vector<Bar> bars;
  std::vector<std::string> warnings;  // gaps etc., never fatal
};

// Strict reader for the canonical schema
// `date,time,open,high,low,close,volume`; malformed rows, non-monotonic
// timestamps and OHLC inconsistencies are errors naming the line.
ParseResult parse_csv(const std::string& path);
ParseResult parse_csv_stream(std::istream& in, const std::string& name);

void write_bars_csv(const std::vector<Bar>& bars, std::ostream& out);
void write_bars_csv_file(const std::vector<Bar>& bars,
                         const std::string& path);

// One 30-minute block: rows are the five attributes, columns the six
// chronological 5-minute steps.
struct Frame {
  diff::Tensor values{std::vector<int>{kFrameRows, kBarsPerFrame}};
  double close_raw = 0.0;  // last raw close of the frame
  Timestamp start;
};

struct TradingDay {
  int date = 0;
  std::vector<Frame> frames;
  std::vector<std::optional<int>> labels;  // -1 / 0 / +1, one per frame
};

struct DayPair {
  TradingDay day_a;           // encoder input
  TradingDay day_b;           // decoder input / targets
  TradingDay day_b_reversed;  // exact mirror, labels included
};

TradingDay reverse_day(const TradingDay& day);

struct NormStats {
  std::array<double, kFrameRows> mean{};
  std::array<double, kFrameRows> stddev{};  // floored at 1e-8
};

struct LabelThresholds {
  double lambda = 0.0;
  double mu_c = 0.0;
  double b_up = 0.0;    // log((mu_c + lambda) / mu_c)
  double b_down = 0.0;  // log((mu_c - lambda) / mu_c)
};

struct DateRange {
  int begin = 0;  // inclusive serial dates
  int end = 0;
  bool contains(int date) const { return date >= begin && date <= end; }
};

struct Session {
  DateRange train, validation, test;
};

struct SplitPlan {
  std::vector<Session> sessions;
  int shift = 0;
};

// Groups bars into days of exactly frames_per_day frames; days that cannot
// supply that many complete frames are dropped with a warning.
std::vector<TradingDay> build_frames(const std::vector<Bar>& bars,
                                     int frames_per_day,
                                     std::vector<std::string>* warnings =
                                         nullptr);

// Per-attribute z-score statistics fitted on the training split only.
NormStats fit_normalizer(const std::vector<TradingDay>& train_days);
std::vector<TradingDay> apply_normalizer(std::vector<TradingDay> days,
                                         const NormStats& stats);

LabelThresholds thresholds_from_lambda(double lambda, double mu_c);

// mu_c = mean raw close of the training split; lambda bisected on the
// empirical |log-return| distribution until the Flat share is within
// 33.3% +/- 2%. Needs at least 1000 transitions.
LabelThresholds calibrate_lambda(const std::vector<TradingDay>& train_days);

// y_t from the log return between consecutive frame closes, chronologically
// across the given days; the final frame gets no label.
void label_days(std::vector<TradingDay>& days,
                const LabelThresholds& thresholds);

// Overlapping consecutive-day pairs; a pair is skipped when the calendar gap
// exceeds max_gap_days.
std::vector<DayPair> make_day_pairs(const std::vector<TradingDay>& days,
                                    int max_gap_days = 4);

// Walk-forward sessions over the ordered list of trading dates. Lengths and
// shift count trading days present in `dates`.
SplitPlan plan_walk_forward(const std::vector<int>& dates, int train_len,
                            int val_len, int test_len, int shift);

int label_to_class(int label);   // +1 -> 0 (Up), 0 -> 1 (Flat), -1 -> 2 (Down)
int class_to_label(int klass);

}  // namespace clvsa::market
