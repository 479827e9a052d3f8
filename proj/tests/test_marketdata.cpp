#include <doctest.h>

#include <cmath>
#include <sstream>

#include "clvsa/marketdata.hpp"
#include "clvsa/synth.hpp"

using namespace clvsa;
using namespace clvsa::market;

namespace {

ParseResult parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_csv_stream(in, "mem.csv");
}

const char* kValidSix =
    "date,time,open,high,low,close,volume\n"
    "2020-01-06,09:00,100.0,100.5,99.5,100.2,1200\n"
    "2020-01-06,09:05,100.2,100.8,100.0,100.6,1100\n"
    "2020-01-06,09:10,100.6,100.9,100.1,100.3,900\n"
    "2020-01-06,09:15,100.3,100.7,100.2,100.5,800\n"
    "2020-01-06,09:20,100.5,101.0,100.4,100.9,1500\n"
    "2020-01-06,09:25,100.9,101.2,100.6,101.1,1300\n";

std::vector<TradingDay> synth_days(int days, int frames_per_day,
                                   std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.days = days;
  cfg.frames_per_day = frames_per_day;
  return build_frames(generate_synthetic(cfg).bars, frames_per_day);
}

}  // namespace

TEST_CASE("parse_csv accepts a valid six-row file") {
  const ParseResult r = parse_text(kValidSix);
  CHECK(r.bars.size() == 6);
  CHECK(r.bars[0].minute == 9 * 60);
  CHECK(r.bars[5].close == doctest::Approx(101.1));
  CHECK(r.warnings.empty());
}

TEST_CASE("parse_csv rejections name the offending line") {
  SUBCASE("high below low") {
    const std::string bad =
        "date,time,open,high,low,close,volume\n"
        "2020-01-06,09:00,100.0,99.0,99.5,100.2,1200\n";
    CHECK_THROWS_WITH_AS(parse_text(bad),
                         doctest::Contains("mem.csv:2"),
                         std::runtime_error);
  }
  SUBCASE("duplicate timestamp") {
    std::string bad(kValidSix);
    bad += "2020-01-06,09:25,101.1,101.3,101.0,101.2,700\n";
    CHECK_THROWS_WITH_AS(parse_text(bad), doctest::Contains("duplicate"),
                         std::runtime_error);
  }
  SUBCASE("non-monotonic timestamps") {
    std::string bad(kValidSix);
    bad += "2020-01-06,09:00,101.1,101.3,101.0,101.2,700\n";
    CHECK_THROWS_WITH_AS(parse_text(bad),
                         doctest::Contains("not increasing"),
                         std::runtime_error);
  }
  SUBCASE("bad header") {
    CHECK_THROWS_WITH_AS(parse_text("time,open\n"),
                         doctest::Contains("header"), std::runtime_error);
  }
  SUBCASE("unaligned time") {
    const std::string bad =
        "date,time,open,high,low,close,volume\n"
        "2020-01-06,09:03,100.0,100.5,99.5,100.2,1200\n";
    CHECK_THROWS_WITH_AS(parse_text(bad), doctest::Contains("aligned"),
                         std::runtime_error);
  }
  SUBCASE("negative volume") {
    const std::string bad =
        "date,time,open,high,low,close,volume\n"
        "2020-01-06,09:00,100.0,100.5,99.5,100.2,-5\n";
    CHECK_THROWS_AS(parse_text(bad), std::runtime_error);
  }
}

TEST_CASE("parse_csv records gaps as warnings, not errors") {
  std::string text(kValidSix);
  text += "2020-01-06,10:00,101.1,101.4,101.0,101.3,600\n";
  const ParseResult r = parse_text(text);
  CHECK(r.bars.size() == 7);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("gap") != std::string::npos);
}

TEST_CASE("build_frames examples") {
  SUBCASE("288 aligned bars make a 48-frame day") {
    const std::vector<TradingDay> days = synth_days(1, 48);
    REQUIRE(days.size() == 1);
    CHECK(days[0].frames.size() == 48);
  }
  SUBCASE("trailing bars never make a partial frame") {
    ParseResult r = parse_text(kValidSix);
    std::vector<Bar> bars = r.bars;
    bars.resize(5);  // one incomplete group
    std::vector<std::string> warnings;
    const std::vector<TradingDay> days = build_frames(bars, 1, &warnings);
    CHECK(days.empty());
    CHECK(warnings.size() == 1);
  }
  SUBCASE("frame columns follow bar time order and close_raw is last") {
    const ParseResult r = parse_text(kValidSix);
    const std::vector<TradingDay> days = build_frames(r.bars, 1);
    REQUIRE(days.size() == 1);
    const Frame& f = days[0].frames[0];
    for (int c = 0; c < kBarsPerFrame; ++c) {
      CHECK(f.values[0 * kBarsPerFrame + c] ==
            r.bars[std::size_t(c)].open);
      CHECK(f.values[3 * kBarsPerFrame + c] ==
            r.bars[std::size_t(c)].close);
    }
    CHECK(f.close_raw == r.bars[5].close);
    CHECK(f.start.minute == 9 * 60);
  }
  SUBCASE("a day with a mid-day gap drops only broken groups") {
    std::string text(kValidSix);
    // a second frame-worth of bars after a 30 minute hole
    int minute = 10 * 60;
    for (int i = 0; i < 6; ++i, minute += 5) {
      char row[96];
      std::snprintf(row, sizeof row,
                    "2020-01-06,%02d:%02d,101.0,101.5,100.5,101.2,500\n",
                    minute / 60, minute % 60);
      text += row;
    }
    const ParseResult r = parse_text(text);
    const std::vector<TradingDay> days = build_frames(r.bars, 2);
    REQUIRE(days.size() == 1);
    CHECK(days[0].frames.size() == 2);
  }
}

TEST_CASE("normalizer examples") {
  std::vector<TradingDay> days = synth_days(6, 8);
  const NormStats stats = fit_normalizer(days);
  SUBCASE("train attributes become zero mean unit variance") {
    const std::vector<TradingDay> normed = apply_normalizer(days, stats);
    for (int attr = 0; attr < kFrameRows; ++attr) {
      double sum = 0.0, sumsq = 0.0;
      std::int64_t n = 0;
      for (const TradingDay& d : normed)
        for (const Frame& f : d.frames)
          for (int c = 0; c < kBarsPerFrame; ++c) {
            const double v = f.values[attr * kBarsPerFrame + c];
            sum += v;
            sumsq += v * v;
            ++n;
          }
      const double mean = sum / double(n);
      const double var = sumsq / double(n) - mean * mean;
      CHECK(std::abs(mean) <= 1e-9);
      CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-9);
    }
  }
  SUBCASE("constant attribute floors the std and maps to zeros") {
    std::vector<TradingDay> flat = days;
    for (TradingDay& d : flat)
      for (Frame& f : d.frames)
        for (int c = 0; c < kBarsPerFrame; ++c)
          f.values[4 * kBarsPerFrame + c] = 777.0;  // constant volume
    const NormStats s = fit_normalizer(flat);
    CHECK(s.stddev[4] == doctest::Approx(1e-8));
    const std::vector<TradingDay> normed = apply_normalizer(flat, s);
    CHECK(normed[0].frames[0].values[4 * kBarsPerFrame + 0] == 0.0);
  }
  SUBCASE("empty training split is an error") {
    CHECK_THROWS_AS(fit_normalizer({}), std::invalid_argument);
  }
  SUBCASE("stats fitted on train leave test means off zero") {
    const std::vector<TradingDay> other = synth_days(6, 8, /*seed=*/777);
    const std::vector<TradingDay> normed = apply_normalizer(other, stats);
    double sum = 0.0;
    std::int64_t n = 0;
    for (const TradingDay& d : normed)
      for (const Frame& f : d.frames)
        for (int c = 0; c < kBarsPerFrame; ++c) {
          sum += f.values[3 * kBarsPerFrame + c];
          ++n;
        }
    CHECK(std::abs(sum / double(n)) > 1e-6);
  }
}

TEST_CASE("label examples from the threshold formula") {
  // mu_c = 100, lambda = 1: b_up = log(1.01), b_down = log(0.99)
  const LabelThresholds th = thresholds_from_lambda(1.0, 100.0);
  CHECK(th.b_up == doctest::Approx(0.00995033).epsilon(1e-5));
  CHECK(th.b_down == doctest::Approx(-0.01005034).epsilon(1e-5));

  auto make_day = [](int date, std::vector<double> closes) {
    TradingDay day;
    day.date = date;
    int minute = 0;
    for (double c : closes) {
      Frame f;
      f.close_raw = c;
      f.start = {date, minute};
      minute += 30;
      day.frames.push_back(f);
    }
    day.labels.assign(day.frames.size(), std::nullopt);
    return day;
  };

  SUBCASE("100 -> 102 labels Up") {
    std::vector<TradingDay> days = {make_day(100, {100.0, 102.0})};
    label_days(days, th);
    REQUIRE(days[0].labels[0].has_value());
    CHECK(*days[0].labels[0] == 1);
    CHECK_FALSE(days[0].labels[1].has_value());  // dataset end
  }
  SUBCASE("unchanged close labels Flat") {
    std::vector<TradingDay> days = {make_day(100, {100.0, 100.0})};
    label_days(days, th);
    CHECK(*days[0].labels[0] == 0);
  }
  SUBCASE("100 -> 98.9 labels Down") {
    std::vector<TradingDay> days = {make_day(100, {100.0, 98.9})};
    label_days(days, th);
    CHECK(*days[0].labels[0] == -1);
  }
  SUBCASE("labels flow across day boundaries") {
    std::vector<TradingDay> days = {make_day(100, {100.0, 100.0}),
                                    make_day(101, {102.0, 102.0})};
    label_days(days, th);
    CHECK(*days[0].labels[1] == 1);  // next day's open frame close
  }
  SUBCASE("nonpositive close is an error") {
    std::vector<TradingDay> days = {make_day(100, {100.0, -1.0})};
    CHECK_THROWS_AS(label_days(days, th), std::invalid_argument);
  }
  SUBCASE("threshold preconditions") {
    CHECK_THROWS_AS(thresholds_from_lambda(0.0, 100.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(thresholds_from_lambda(100.0, 100.0),
                    std::invalid_argument);
  }
}

TEST_CASE("calibrate_lambda balances classes on synthetic data") {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.days = 40;
  cfg.frames_per_day = 12;
  cfg.drift = 3e-4;
  cfg.volatility = 8e-4;
  std::vector<TradingDay> days =
      build_frames(generate_synthetic(cfg).bars, cfg.frames_per_day);
  REQUIRE(days.size() * 12 >= 1000 + 12);
  const LabelThresholds th = calibrate_lambda(days);
  label_days(days, th);
  std::int64_t counts[3] = {};
  std::int64_t total = 0;
  for (const TradingDay& d : days)
    for (const auto& l : d.labels) {
      if (!l) continue;
      ++counts[label_to_class(*l)];
      ++total;
    }
  for (int k = 0; k < 3; ++k) {
    const double share = double(counts[k]) / double(total);
    CHECK(share == doctest::Approx(1.0 / 3.0).epsilon(0.15));  // +/- 5 pts
  }
  SUBCASE("too few transitions is an error") {
    std::vector<TradingDay> tiny(days.begin(), days.begin() + 4);
    CHECK_THROWS_AS(calibrate_lambda(tiny), std::invalid_argument);
  }
}

TEST_CASE("day pair examples") {
  std::vector<TradingDay> days = synth_days(3, 4);
  label_days(days, thresholds_from_lambda(0.05, 100.0));
  SUBCASE("three days make two pairs") {
    const std::vector<DayPair> pairs = make_day_pairs(days);
    CHECK(pairs.size() == 2);
    CHECK(pairs[0].day_a.date == days[0].date);
    CHECK(pairs[0].day_b.date == days[1].date);
  }
  SUBCASE("reversal is an exact mirror and an involution") {
    const std::vector<DayPair> pairs = make_day_pairs(days);
    const TradingDay& b = pairs[0].day_b;
    const TradingDay& r = pairs[0].day_b_reversed;
    const std::size_t L = b.frames.size();
    for (std::size_t k = 0; k < L; ++k) {
      CHECK(r.frames[k].start == b.frames[L - 1 - k].start);
      CHECK(r.labels[k] == b.labels[L - 1 - k]);
    }
    const TradingDay twice = reverse_day(r);
    for (std::size_t k = 0; k < L; ++k) {
      CHECK(twice.frames[k].start == b.frames[k].start);
      for (std::int64_t i = 0; i < twice.frames[k].values.size(); ++i)
        CHECK(twice.frames[k].values[i] == b.frames[k].values[i]);
    }
  }
  SUBCASE("pairs skip calendar gaps beyond the tolerance") {
    std::vector<TradingDay> gapped = days;
    gapped[2].date = gapped[1].date + 5;  // a 5-day hole
    CHECK(make_day_pairs(gapped, 4).size() == 1);
    CHECK(make_day_pairs(gapped, 5).size() == 2);
  }
  SUBCASE("fewer than two days is an error") {
    std::vector<TradingDay> one(days.begin(), days.begin() + 1);
    CHECK_THROWS_AS(make_day_pairs(one), std::invalid_argument);
  }
}

TEST_CASE("walk-forward plan examples") {
  std::vector<int> dates;
  for (int i = 0; i < 200; ++i) dates.push_back(18267 + i);
  const SplitPlan plan = plan_walk_forward(dates, 60, 5, 5, 5);
  SUBCASE("200 days at 60/5/5 shift 5 gives 27 sessions") {
    CHECK(plan.sessions.size() == 27);
  }
  SUBCASE("ranges inside a session never overlap and stay ordered") {
    for (const Session& s : plan.sessions) {
      CHECK(s.train.end < s.validation.begin);
      CHECK(s.validation.end < s.test.begin);
      CHECK(s.train.begin <= s.train.end);
    }
  }
  SUBCASE("successive sessions shift by the step") {
    for (std::size_t k = 1; k < plan.sessions.size(); ++k)
      CHECK(plan.sessions[k].train.begin ==
            plan.sessions[k - 1].train.begin + 5);
  }
  SUBCASE("insufficient data is an error") {
    std::vector<int> few(dates.begin(), dates.begin() + 60);
    CHECK_THROWS_AS(plan_walk_forward(few, 60, 5, 5, 5),
                    std::invalid_argument);
  }
}

TEST_CASE("leak freedom: deleting val/test bars changes nothing") {
  std::vector<TradingDay> days = synth_days(30, 8);
  std::vector<int> dates;
  for (const TradingDay& d : days) dates.push_back(d.date);
  const SplitPlan plan = plan_walk_forward(dates, 20, 4, 4, 2);
  REQUIRE(plan.sessions.size() >= 2);
  for (const Session& s : plan.sessions) {
    std::vector<TradingDay> train_only;
    for (const TradingDay& d : days)
      if (s.train.contains(d.date)) train_only.push_back(d);
    // full data sliced to the train range vs data with val/test removed
    std::vector<TradingDay> scrubbed;
    for (const TradingDay& d : days)
      if (!s.validation.contains(d.date) && !s.test.contains(d.date))
        scrubbed.push_back(d);
    std::vector<TradingDay> scrubbed_train;
    for (const TradingDay& d : scrubbed)
      if (s.train.contains(d.date)) scrubbed_train.push_back(d);

    const NormStats a = fit_normalizer(train_only);
    const NormStats b = fit_normalizer(scrubbed_train);
    for (int i = 0; i < kFrameRows; ++i) {
      CHECK(a.mean[std::size_t(i)] == b.mean[std::size_t(i)]);
      CHECK(a.stddev[std::size_t(i)] == b.stddev[std::size_t(i)]);
    }
  }
}

TEST_CASE("csv round trip is bit exact") {
  SynthConfig cfg;
  cfg.days = 2;
  cfg.frames_per_day = 4;
  const SynthResult data = generate_synthetic(cfg);
  std::ostringstream out;
  write_bars_csv(data.bars, out);
  std::istringstream in(out.str());
  const ParseResult parsed = parse_csv_stream(in, "roundtrip");
  REQUIRE(parsed.bars.size() == data.bars.size());
  std::ostringstream again;
  write_bars_csv(parsed.bars, again);
  CHECK(out.str() == again.str());
}
