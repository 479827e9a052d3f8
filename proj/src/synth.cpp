#include "clvsa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "clvsa/rng.hpp"

namespace clvsa::market {
namespace {

double volume_level(int minute, const SynthConfig& cfg) {
  // low ebb overnight, slow morning ramp, plateau 9:00-14:00, fall-off after
  const double lo = cfg.overnight_volume;
  const double hi = cfg.plateau_volume;
  if (minute < 6 * 60) return lo;
  if (minute < 9 * 60) {
    const double t = static_cast<double>(minute - 6 * 60) / (3.0 * 60.0);
    return lo + t * (hi - lo);
  }
  if (minute < 14 * 60) return hi;
  if (minute < 16 * 60) {
    const double t = static_cast<double>(minute - 14 * 60) / (2.0 * 60.0);
    return hi + t * (lo - hi);
  }
  return lo;
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg) {
  if (cfg.days < 1 || cfg.frames_per_day < 1 || cfg.frames_per_day > 48)
    throw std::invalid_argument(
        "synth: days must be >= 1 and frames_per_day in [1, 48]");
  if (cfg.persistence <= 0.0 || cfg.persistence >= 1.0)
    throw std::invalid_argument("synth: persistence must be in (0,1)");
  if (cfg.volatility <= 0.0)
    throw std::invalid_argument("synth: volatility must be > 0");
  if (cfg.start_price <= 0.0)
    throw std::invalid_argument("synth: start price must be > 0");

  std::mt19937_64 rng = make_rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthResult out;
  out.bars.reserve(static_cast<std::size_t>(cfg.days) *
                   static_cast<std::size_t>(cfg.frames_per_day) *
                   kBarsPerFrame);

  int regime = unit(rng) < 0.5 ? 1 : -1;
  double price = cfg.start_price;
  int date = cfg.start_date;

  for (int d = 0; d < cfg.days; ++d) {
    while (weekday(date) >= 5) ++date;  // trading happens on weekdays
    for (int f = 0; f < cfg.frames_per_day; ++f) {
      if (unit(rng) >= cfg.persistence) regime = -regime;
      for (int b = 0; b < kBarsPerFrame; ++b) {
        const int minute = (f * kBarsPerFrame + b) * kBarMinutes;
        Bar bar;
        bar.date = date;
        bar.minute = minute;
        bar.open = price;
        const double r =
            regime * cfg.drift + cfg.volatility * gauss(rng);
        price = price * std::exp(r);
        bar.close = price;
        // wicks extend beyond the body by a half-sigma excursion
        const double up = std::abs(gauss(rng)) * cfg.volatility * 0.5;
        const double down = std::abs(gauss(rng)) * cfg.volatility * 0.5;
        bar.high = std::max(bar.open, bar.close) * std::exp(up);
        bar.low = std::min(bar.open, bar.close) * std::exp(-down);
        const double level = volume_level(minute, cfg);
        bar.volume = static_cast<std::int64_t>(
            std::llround(level * (0.75 + 0.5 * unit(rng))));
        out.bars.push_back(bar);
        out.regime.push_back(regime);
      }
    }
    ++date;
  }
  return out;
}

double bayes_frame_accuracy(const SynthResult& data,
                            const LabelThresholds& thresholds,
                            int frames_per_day) {
  std::vector<TradingDay> days = build_frames(data.bars, frames_per_day);
  label_days(days, thresholds);

  // regime lookup keyed by the frame's first bar
  std::unordered_map<std::int64_t, int> regime_at;
  for (std::size_t i = 0; i < data.bars.size(); ++i) {
    const Bar& b = data.bars[i];
    regime_at[static_cast<std::int64_t>(b.date) * 1440 + b.minute] =
        data.regime[i];
  }

  // counts[regime][class]
  std::int64_t counts[2][3] = {};
  std::int64_t total = 0;
  for (const TradingDay& day : days)
    for (std::size_t i = 0; i < day.frames.size(); ++i) {
      if (!day.labels[i]) continue;
      const Frame& frame = day.frames[i];
      const auto it = regime_at.find(
          static_cast<std::int64_t>(frame.start.date) * 1440 +
          frame.start.minute);
      if (it == regime_at.end()) continue;
      const int r = it->second > 0 ? 0 : 1;
      ++counts[r][label_to_class(*day.labels[i])];
      ++total;
    }
  if (total == 0)
    throw std::invalid_argument("bayes_frame_accuracy: no labeled frames");

  std::int64_t hits = 0;
  for (int r = 0; r < 2; ++r)
    hits += std::max({counts[r][0], counts[r][1], counts[r][2]});
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace clvsa::market
