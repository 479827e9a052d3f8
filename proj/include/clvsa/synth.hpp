#pragma once

#include <cstdint>
#include <vector>

#include "clvsa/marketdata.hpp"

namespace clvsa::market {

// Two-state Markov regime generator. The regime (bull/bear) is redrawn once
// per 30-minute frame with the given persistence; within a frame every
// 5-minute bar takes log-return regime * drift + volatility * N(0,1). The
// intraday volume profile stays low overnight, ramps up through the morning
// and holds a plateau from 9:00 to 14:00.
struct SynthConfig {
  std::uint64_t seed = 42;
  int days = 200;
  int frames_per_day = 48;
  double persistence = 0.97;      // per-frame regime persistence
  double drift = 4e-4;            // per-bar log drift magnitude
  double volatility = 8e-4;       // per-bar log noise sigma
  double start_price = 100.0;
  double plateau_volume = 2000.0;   // 9:00-14:00 level
  double overnight_volume = 400.0;  // off-hours level
  int start_date = 18267;           // 2020-01-06, a Monday
};

struct SynthResult {
  std::vector<Bar> bars;
  std::vector<int> regime;  // +1 bull / -1 bear, aligned with bars
};

SynthResult generate_synthetic(const SynthConfig& cfg);

// Best achievable per-frame label accuracy when the generator's own hidden
// regime sequence is known: empirical argmax of P(label | regime) over the
// labeled frames. Upper-bounds what any model can learn from this data.
double bayes_frame_accuracy(const SynthResult& data,
                            const LabelThresholds& thresholds,
                            int frames_per_day);

}  // namespace clvsa::market
