#include "clvsa/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clvsa::market {
namespace {

constexpr double kStdFloor = 1e-8;

[[noreturn]] void fail_at(const std::string& name, std::size_t line,
                          const std::string& what) {
  throw std::runtime_error(name + ":" + std::to_string(line) + ": " + what);
}

bool parse_number(const std::string& field, double& out) {
  if (field.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(field, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == field.size() && std::isfinite(out);
}

bool parse_volume(const std::string& field, std::int64_t& out) {
  if (field.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stoll(field, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == field.size();
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

ParseResult parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_csv_stream(in, path);
}

ParseResult parse_csv_stream(std::istream& in, const std::string& name) {
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) fail_at(name, 1, "empty file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "date,time,open,high,low,close,volume")
    fail_at(name, lineno,
            "bad header, expected date,time,open,high,low,close,volume");

  Timestamp prev{-1, -1};
  bool have_prev = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_row(line);
    if (f.size() != 7) fail_at(name, lineno, "expected 7 fields");

    Bar bar;
    if (!parse_date(f[0], bar.date)) fail_at(name, lineno, "bad date");
    if (!parse_time(f[1], bar.minute)) fail_at(name, lineno, "bad time");
    if (bar.minute % kBarMinutes != 0)
      fail_at(name, lineno, "time not 5-minute aligned");
    if (!parse_number(f[2], bar.open) || !parse_number(f[3], bar.high) ||
        !parse_number(f[4], bar.low) || !parse_number(f[5], bar.close))
      fail_at(name, lineno, "bad price field");
    if (!parse_volume(f[6], bar.volume))
      fail_at(name, lineno, "bad volume field");

    if (bar.volume < 0) fail_at(name, lineno, "negative volume");
    if (bar.low > std::min(bar.open, bar.close) ||
        bar.high < std::max(bar.open, bar.close))
      fail_at(name, lineno, "OHLC inconsistency (low/high do not bracket)");

    const Timestamp ts{bar.date, bar.minute};
    if (have_prev) {
      if (ts == prev) fail_at(name, lineno, "duplicate timestamp");
      if (ts < prev) fail_at(name, lineno, "timestamps not increasing");
      const bool adjacent =
          ts.date == prev.date && ts.minute == prev.minute + kBarMinutes;
      const bool new_day = ts.date != prev.date;
      if (!adjacent && !new_day)
        result.warnings.push_back(name + ":" + std::to_string(lineno) +
                                  ": gap after " + format_timestamp(prev));
    }
    prev = ts;
    have_prev = true;
    result.bars.push_back(bar);
  }
  return result;
}

void write_bars_csv(const std::vector<Bar>& bars, std::ostream& out) {
  out << "date,time,open,high,low,close,volume\n";
  char buf[160];
  for (const Bar& b : bars) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%lld\n",
                  format_date(b.date).c_str(), format_time(b.minute).c_str(),
                  b.open, b.high, b.low, b.close,
                  static_cast<long long>(b.volume));
    out << buf;
  }
}

void write_bars_csv_file(const std::vector<Bar>& bars,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_bars_csv(bars, out);
}

TradingDay reverse_day(const TradingDay& day) {
  TradingDay rev;
  rev.date = day.date;
  rev.frames.assign(day.frames.rbegin(), day.frames.rend());
  rev.labels.assign(day.labels.rbegin(), day.labels.rend());
  return rev;
}

std::vector<TradingDay> build_frames(const std::vector<Bar>& bars,
                                     int frames_per_day,
                                     std::vector<std::string>* warnings) {
  if (frames_per_day < 1)
    throw std::invalid_argument("build_frames: frames_per_day must be >= 1");
  std::vector<TradingDay> days;

  std::size_t i = 0;
  while (i < bars.size()) {
    const int date = bars[i].date;
    std::size_t j = i;
    while (j < bars.size() && bars[j].date == date) ++j;

    TradingDay day;
    day.date = date;
    // consecutive runs of six 5-minute bars become a frame; a gap restarts
    // the run so partial groups are dropped
    std::size_t k = i;
    while (k + kBarsPerFrame <= j) {
      bool contiguous = true;
      for (int b = 1; b < kBarsPerFrame; ++b) {
        const std::size_t cur = k + static_cast<std::size_t>(b);
        if (bars[cur].minute != bars[cur - 1].minute + kBarMinutes) {
          contiguous = false;
          k += static_cast<std::size_t>(b);  // restart after the break
          break;
        }
      }
      if (!contiguous) continue;
      Frame frame;
      frame.start = Timestamp{date, bars[k].minute};
      for (int c = 0; c < kBarsPerFrame; ++c) {
        const Bar& b = bars[k + static_cast<std::size_t>(c)];
        frame.values[0 * kBarsPerFrame + c] = b.open;
        frame.values[1 * kBarsPerFrame + c] = b.high;
        frame.values[2 * kBarsPerFrame + c] = b.low;
        frame.values[3 * kBarsPerFrame + c] = b.close;
        frame.values[4 * kBarsPerFrame + c] =
            static_cast<double>(b.volume);
      }
      frame.close_raw = bars[k + kBarsPerFrame - 1].close;
      day.frames.push_back(std::move(frame));
      k += kBarsPerFrame;
    }

    if (static_cast<int>(day.frames.size()) == frames_per_day) {
      day.labels.assign(day.frames.size(), std::nullopt);
      days.push_back(std::move(day));
    } else if (warnings) {
      warnings->push_back("dropped " + format_date(date) + ": " +
                          std::to_string(day.frames.size()) + " frames, need " +
                          std::to_string(frames_per_day));
    }
    i = j;
  }
  return days;
}

NormStats fit_normalizer(const std::vector<TradingDay>& train_days) {
  std::int64_t count = 0;
  std::array<double, kFrameRows> sum{};
  std::array<double, kFrameRows> sumsq{};
  for (const TradingDay& day : train_days)
    for (const Frame& frame : day.frames) {
      for (int r = 0; r < kFrameRows; ++r)
        for (int c = 0; c < kBarsPerFrame; ++c) {
          const double v = frame.values[r * kBarsPerFrame + c];
          sum[static_cast<std::size_t>(r)] += v;
          sumsq[static_cast<std::size_t>(r)] += v * v;
        }
      count += kBarsPerFrame;
    }
  if (count == 0)
    throw std::invalid_argument("fit_normalizer: empty training split");

  NormStats stats;
  for (int r = 0; r < kFrameRows; ++r) {
    const double mean = sum[static_cast<std::size_t>(r)] / static_cast<double>(count);
    const double var =
        sumsq[static_cast<std::size_t>(r)] / static_cast<double>(count) -
        mean * mean;
    stats.mean[static_cast<std::size_t>(r)] = mean;
    stats.stddev[static_cast<std::size_t>(r)] =
        std::max(std::sqrt(std::max(var, 0.0)), kStdFloor);
  }
  return stats;
}

std::vector<TradingDay> apply_normalizer(std::vector<TradingDay> days,
                                         const NormStats& stats) {
  for (TradingDay& day : days)
    for (Frame& frame : day.frames)
      for (int r = 0; r < kFrameRows; ++r)
        for (int c = 0; c < kBarsPerFrame; ++c) {
          double& v = frame.values[r * kBarsPerFrame + c];
          v = (v - stats.mean[static_cast<std::size_t>(r)]) /
              stats.stddev[static_cast<std::size_t>(r)];
        }
  return days;
}

LabelThresholds thresholds_from_lambda(double lambda, double mu_c) {
  if (mu_c <= 0.0)
    throw std::invalid_argument("thresholds: mu_c must be positive");
  if (lambda <= 0.0 || lambda >= mu_c)
    throw std::invalid_argument("thresholds: lambda must be in (0, mu_c)");
  LabelThresholds th;
  th.lambda = lambda;
  th.mu_c = mu_c;
  th.b_up = std::log((mu_c + lambda) / mu_c);
  th.b_down = std::log((mu_c - lambda) / mu_c);
  return th;
}

namespace {

std::vector<double> collect_log_returns(
    const std::vector<TradingDay>& days) {
  std::vector<double> returns;
  const Frame* prev = nullptr;
  for (const TradingDay& day : days)
    for (const Frame& frame : day.frames) {
      if (frame.close_raw <= 0.0)
        throw std::invalid_argument("labels: nonpositive close price at " +
                                    format_timestamp(frame.start));
      if (prev) returns.push_back(std::log(frame.close_raw / prev->close_raw));
      prev = &frame;
    }
  return returns;
}

double flat_share(const std::vector<double>& returns,
                  const LabelThresholds& th) {
  std::int64_t flats = 0;
  for (double r : returns)
    if (r <= th.b_up && r >= th.b_down) ++flats;
  return static_cast<double>(flats) / static_cast<double>(returns.size());
}

}  // namespace

LabelThresholds calibrate_lambda(const std::vector<TradingDay>& train_days) {
  const std::vector<double> returns = collect_log_returns(train_days);
  if (returns.size() < 1000)
    throw std::invalid_argument(
        "calibrate_lambda: need >= 1000 transitions, have " +
        std::to_string(returns.size()));

  double close_sum = 0.0;
  std::int64_t close_count = 0;
  for (const TradingDay& day : train_days)
    for (const Frame& frame : day.frames) {
      close_sum += frame.close_raw;
      ++close_count;
    }
  const double mu_c = close_sum / static_cast<double>(close_count);

  const double target = 1.0 / 3.0;
  const double tol = 0.02;

  // the flat share is nondecreasing in lambda, so bisect
  double lo = 0.0;
  double hi = mu_c * 1e-6;
  while (flat_share(returns, thresholds_from_lambda(hi, mu_c)) < target) {
    hi *= 2.0;
    if (hi >= mu_c) {
      hi = std::nextafter(mu_c, 0.0) * 0.999999;
      break;
    }
  }

  LabelThresholds best = thresholds_from_lambda(hi, mu_c);
  double best_gap = std::abs(flat_share(returns, best) - target);
  for (int it = 0; it < 200 && best_gap > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= 0.0 || mid >= mu_c) break;
    const LabelThresholds th = thresholds_from_lambda(mid, mu_c);
    const double share = flat_share(returns, th);
    const double gap = std::abs(share - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = th;
    }
    if (share < target)
      lo = mid;
    else
      hi = mid;
  }
  if (best_gap > tol)
    throw std::runtime_error(
        "calibrate_lambda: cannot balance classes (degenerate return "
        "distribution), best flat share off by " + std::to_string(best_gap));
  return best;
}

void label_days(std::vector<TradingDay>& days,
                const LabelThresholds& thresholds) {
  Frame* prev_frame = nullptr;
  std::optional<int>* prev_label = nullptr;
  for (TradingDay& day : days) {
    day.labels.assign(day.frames.size(), std::nullopt);
    for (std::size_t i = 0; i < day.frames.size(); ++i) {
      Frame& frame = day.frames[i];
      if (frame.close_raw <= 0.0)
        throw std::invalid_argument("labels: nonpositive close price at " +
                                    format_timestamp(frame.start));
      if (prev_frame) {
        const double r = std::log(frame.close_raw / prev_frame->close_raw);
        if (r > thresholds.b_up)
          *prev_label = 1;
        else if (r < thresholds.b_down)
          *prev_label = -1;
        else
          *prev_label = 0;
      }
      prev_frame = &frame;
      prev_label = &day.labels[i];
    }
  }
  // the final frame keeps nullopt: it has no forward return
}

std::vector<DayPair> make_day_pairs(const std::vector<TradingDay>& days,
                                    int max_gap_days) {
  if (days.size() < 2)
    throw std::invalid_argument("make_day_pairs: need at least 2 days");
  std::vector<DayPair> pairs;
  for (std::size_t i = 0; i + 1 < days.size(); ++i) {
    if (days[i + 1].date <= days[i].date)
      throw std::invalid_argument("make_day_pairs: days not ordered");
    if (days[i + 1].date - days[i].date > max_gap_days) continue;
    DayPair pair;
    pair.day_a = days[i];
    pair.day_b = days[i + 1];
    pair.day_b_reversed = reverse_day(pair.day_b);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

SplitPlan plan_walk_forward(const std::vector<int>& dates, int train_len,
                            int val_len, int test_len, int shift) {
  if (train_len < 1 || val_len < 1 || test_len < 1 || shift < 1)
    throw std::invalid_argument("plan_walk_forward: lengths must be >= 1");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (dates[i] <= dates[i - 1])
      throw std::invalid_argument("plan_walk_forward: dates not increasing");
  const int total = train_len + val_len + test_len;
  const int n = static_cast<int>(dates.size());
  if (n < total)
    throw std::invalid_argument("plan_walk_forward: insufficient data, have " +
                                std::to_string(n) + " days, need " +
                                std::to_string(total));
  SplitPlan plan;
  plan.shift = shift;
  for (int start = 0; start + total <= n; start += shift) {
    Session s;
    s.train = {dates[static_cast<std::size_t>(start)],
               dates[static_cast<std::size_t>(start + train_len - 1)]};
    s.validation = {dates[static_cast<std::size_t>(start + train_len)],
                    dates[static_cast<std::size_t>(start + train_len +
                                                   val_len - 1)]};
    s.test = {dates[static_cast<std::size_t>(start + train_len + val_len)],
              dates[static_cast<std::size_t>(start + total - 1)]};
    plan.sessions.push_back(s);
  }
  return plan;
}

int label_to_class(int label) {
  switch (label) {
    case 1: return 0;
    case 0: return 1;
    case -1: return 2;
  }
  throw std::invalid_argument("label_to_class: label must be -1, 0 or 1");
}

int class_to_label(int klass) {
  switch (klass) {
    case 0: return 1;
    case 1: return 0;
    case 2: return -1;
  }
  throw std::invalid_argument("class_to_label: class must be 0, 1 or 2");
}

}  // namespace clvsa::market
