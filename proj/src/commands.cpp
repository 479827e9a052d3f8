#include "clvsa/commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "clvsa/checkpoint.hpp"
#include "clvsa/gradcheck.hpp"
#include "clvsa/rng.hpp"

namespace clvsa::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using diff::NodeRef;
using diff::Tape;
using diff::Tensor;

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ordered_json optional_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

Config parse_config(const std::string& text, const std::string& name) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  Config cfg;
  try {
    if (j.contains("data")) {
      const auto& d = j["data"];
      if (d.contains("csv")) cfg.data_csv = d["csv"].get<std::string>();
      if (d.contains("frames_per_day"))
        cfg.frames_per_day = d["frames_per_day"].get<int>();
      if (d.contains("holiday_gap_days"))
        cfg.max_gap_days = d["holiday_gap_days"].get<int>();
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      auto& mc = cfg.model;
      if (m.contains("kind"))
        mc.kind = model::parse_model_kind(m["kind"].get<std::string>());
      if (m.contains("channels")) mc.channels = m["channels"].get<int>();
      if (m.contains("layers")) mc.layers = m["layers"].get<int>();
      if (m.contains("kernel_width"))
        mc.kernel_width = m["kernel_width"].get<int>();
      if (m.contains("z_dim")) mc.z_dim = m["z_dim"].get<int>();
      if (m.contains("prior_hidden"))
        mc.prior_hidden = m["prior_hidden"].get<int>();
      if (m.contains("posterior_hidden"))
        mc.posterior_hidden = m["posterior_hidden"].get<int>();
      if (m.contains("clf_hidden1"))
        mc.clf_hidden1 = m["clf_hidden1"].get<int>();
      if (m.contains("clf_hidden2"))
        mc.clf_hidden2 = m["clf_hidden2"].get<int>();
      if (m.contains("dropout")) mc.dropout = m["dropout"].get<double>();
      if (m.contains("backward_inter_attention"))
        mc.backward_inter_attention =
            m["backward_inter_attention"].get<bool>();
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      if (t.contains("iterations"))
        cfg.train.iterations = t["iterations"].get<long>();
      if (t.contains("batch")) cfg.train.batch = t["batch"].get<int>();
      if (t.contains("seed"))
        cfg.train.seed = t["seed"].get<std::uint64_t>();
      if (t.contains("lr")) cfg.train.adam.lr = t["lr"].get<double>();
      if (t.contains("alpha")) cfg.train.alpha = t["alpha"].get<double>();
      if (t.contains("gamma")) cfg.train.gamma = t["gamma"].get<double>();
      if (t.contains("anneal_iterations"))
        cfg.train.anneal.anneal_iterations =
            t["anneal_iterations"].get<long>();
      if (t.contains("val_every"))
        cfg.train.val_every = t["val_every"].get<long>();
      if (t.contains("train_days")) cfg.train_days = t["train_days"].get<int>();
      if (t.contains("val_days")) cfg.val_days = t["val_days"].get<int>();
      if (t.contains("test_days")) cfg.test_days = t["test_days"].get<int>();
      if (t.contains("shift_days")) cfg.shift_days = t["shift_days"].get<int>();
      if (t.contains("fixed_lambda") && !t["fixed_lambda"].is_null())
        cfg.fixed_lambda = t["fixed_lambda"].get<double>();
    }
    if (j.contains("backtest")) {
      const auto& b = j["backtest"];
      if (b.contains("cost_preset"))
        cfg.cost = bt::cost_preset(b["cost_preset"].get<std::string>());
      if (b.contains("round_trip_cost"))
        cfg.cost.round_trip_cost = b["round_trip_cost"].get<double>();
      if (b.contains("multiplier"))
        cfg.cost.multiplier = b["multiplier"].get<double>();
      if (b.contains("initial_capital"))
        cfg.initial_capital = b["initial_capital"].get<double>();
    }
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      if (s.contains("seed")) cfg.synth.seed = s["seed"].get<std::uint64_t>();
      if (s.contains("days")) cfg.synth.days = s["days"].get<int>();
      if (s.contains("frames_per_day"))
        cfg.synth.frames_per_day = s["frames_per_day"].get<int>();
      if (s.contains("persistence"))
        cfg.synth.persistence = s["persistence"].get<double>();
      if (s.contains("drift")) cfg.synth.drift = s["drift"].get<double>();
      if (s.contains("volatility"))
        cfg.synth.volatility = s["volatility"].get<double>();
      if (s.contains("start_price"))
        cfg.synth.start_price = s["start_price"].get<double>();
      if (s.contains("plateau_volume"))
        cfg.synth.plateau_volume = s["plateau_volume"].get<double>();
      if (s.contains("overnight_volume"))
        cfg.synth.overnight_volume = s["overnight_volume"].get<double>();
      if (s.contains("start_date")) {
        int serial = 0;
        if (!parse_date(s["start_date"].get<std::string>(), serial))
          throw ConfigError(name + ": synth.start_date must be YYYY-MM-DD");
        cfg.synth.start_date = serial;
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  return cfg;
}

std::string config_to_json(const Config& cfg) {
  ordered_json j;
  j["data"] = {{"csv", cfg.data_csv},
               {"frames_per_day", cfg.frames_per_day},
               {"holiday_gap_days", cfg.max_gap_days}};
  j["model"] = ordered_json::parse(train::model_config_to_json(cfg.model));
  j["train"] = {{"iterations", cfg.train.iterations},
                {"batch", cfg.train.batch},
                {"seed", cfg.train.seed},
                {"lr", cfg.train.adam.lr},
                {"alpha", cfg.train.alpha},
                {"gamma", cfg.train.gamma},
                {"anneal_iterations", cfg.train.anneal.anneal_iterations},
                {"val_every", cfg.train.val_every},
                {"train_days", cfg.train_days},
                {"val_days", cfg.val_days},
                {"test_days", cfg.test_days},
                {"shift_days", cfg.shift_days},
                {"fixed_lambda", optional_json(cfg.fixed_lambda)}};
  j["backtest"] = {{"instrument", cfg.cost.instrument},
                   {"round_trip_cost", cfg.cost.round_trip_cost},
                   {"multiplier", cfg.cost.multiplier},
                   {"initial_capital", cfg.initial_capital}};
  j["synth"] = {{"seed", cfg.synth.seed},
                {"days", cfg.synth.days},
                {"frames_per_day", cfg.synth.frames_per_day},
                {"persistence", cfg.synth.persistence},
                {"drift", cfg.synth.drift},
                {"volatility", cfg.synth.volatility},
                {"start_price", cfg.synth.start_price},
                {"plateau_volume", cfg.synth.plateau_volume},
                {"overnight_volume", cfg.synth.overnight_volume},
                {"start_date", format_date(cfg.synth.start_date)}};
  return j.dump(2) + "\n";
}

void cmd_synth(const SynthOptions& opt) {
  const Config cfg = load_config(opt.config_path);
  const market::SynthResult data = market::generate_synthetic(cfg.synth);
  std::ostringstream out;
  market::write_bars_csv(data.bars, out);
  write_text_file(opt.out_path, out.str());
}

namespace {

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const Config& cfg, const std::string& data_path,
                    const std::vector<std::uint64_t>& seeds) {
  ordered_json j;
  j["command"] = command;
  j["config"] = ordered_json::parse(config_to_json(cfg));
  j["data"] = data_path;
  j["output"] = out_dir.string();
  j["seeds"] = seeds;
  write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<market::TradingDay> load_days(const Config& cfg,
                                          const std::string& data_path) {
  market::ParseResult parsed;
  try {
    parsed = market::parse_csv(data_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  for (const std::string& w : parsed.warnings) std::cerr << w << "\n";
  std::vector<std::string> warnings;
  std::vector<market::TradingDay> days =
      market::build_frames(parsed.bars, cfg.frames_per_day, &warnings);
  for (const std::string& w : warnings) std::cerr << w << "\n";
  if (days.empty())
    throw ConfigError(data_path + ": no complete trading days at " +
                      std::to_string(cfg.frames_per_day) + " frames/day");
  return days;
}

train::WalkForwardConfig walk_config(const Config& cfg) {
  train::WalkForwardConfig wf;
  wf.frames_per_day = cfg.frames_per_day;
  wf.train_len = cfg.train_days;
  wf.val_len = cfg.val_days;
  wf.test_len = cfg.test_days;
  wf.shift = cfg.shift_days;
  wf.max_gap_days = cfg.max_gap_days;
  wf.model = cfg.model;
  wf.train = cfg.train;
  wf.cost = cfg.cost;
  wf.fixed_lambda = cfg.fixed_lambda;
  return wf;
}

std::string session_tag(int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", s);
  return buf;
}

void write_session_files(const fs::path& out_dir,
                         const train::WalkForwardConfig& wf,
                         const train::WalkForwardResult& result) {
  for (const train::SessionArtifacts& art : result.sessions) {
    const std::string tag = session_tag(art.record.session);

    std::ostringstream log;
    log << "iteration,ce_forward,ce_backward,kld,l2,beta,total\n";
    for (const train::IterationLog& row : art.train.log)
      log << row.iteration << "," << fmt_g(row.breakdown.ce_forward) << ","
          << fmt_g(row.breakdown.ce_backward) << ","
          << fmt_g(row.breakdown.kld) << "," << fmt_g(row.breakdown.l2)
          << "," << fmt_g(row.breakdown.beta) << ","
          << fmt_g(row.breakdown.total) << "\n";
    write_text_file(out_dir / "logs" / ("session_" + tag + ".csv"),
                    log.str());

    std::ostringstream val;
    val << "iteration,val_ce,val_accuracy\n";
    for (const train::ValidationPoint& v : art.train.validation)
      val << v.iteration << "," << fmt_g(v.ce) << "," << fmt_g(v.accuracy)
          << "\n";
    write_text_file(out_dir / "logs" / ("session_" + tag + "_val.csv"),
                    val.str());

    const std::string best_rel = "checkpoints/session_" + tag + "_best.ckpt";
    train::save_checkpoint_file((out_dir / best_rel).string(), wf.model,
                                art.train.best_params);
    train::save_checkpoint_file(
        (out_dir / ("checkpoints/session_" + tag + "_final.ckpt")).string(),
        wf.model, art.final_params);

    ordered_json rec;
    rec["seed"] = art.record.seed;
    rec["session"] = art.record.session;
    rec["map"] = art.record.map;
    rec["aar"] = optional_json(art.record.aar);
    rec["sharpe"] = optional_json(art.record.sharpe);
    rec["iterations"] = art.record.iterations;
    rec["checkpoint"] = best_rel;
    write_text_file(out_dir / "reports" / ("run_session_" + tag + ".json"),
                    rec.dump(2) + "\n");
  }
}

void write_backtest_files(const fs::path& dir, const bt::BacktestReport& rep,
                          std::optional<double> map) {
  ordered_json j;
  j["initial_capital"] = rep.initial_capital;
  j["final_equity"] = rep.final_equity;
  j["cumulative_return"] = rep.cumulative_return;
  j["map"] = optional_json(map);
  j["aar"] = optional_json(rep.aar);
  j["sharpe"] = optional_json(rep.sharpe);
  j["n_trades"] = rep.trades.size();
  ordered_json trades = ordered_json::array();
  for (const bt::TradeRecord& t : rep.trades) {
    ordered_json row;
    row["direction"] = t.direction == bt::Direction::long_side ? "long"
                                                               : "short";
    row["entry_time"] = format_timestamp(t.entry_time);
    row["exit_time"] = format_timestamp(t.exit_time);
    row["entry_price"] = t.entry_price;
    row["exit_price"] = t.exit_price;
    row["pnl"] = t.pnl;
    trades.push_back(row);
  }
  j["trades"] = trades;
  ordered_json monthly = ordered_json::array();
  for (const auto& [month, ret] : rep.monthly)
    monthly.push_back({{"month", month}, {"return", ret}});
  j["monthly"] = monthly;
  write_text_file(dir / "backtest.json", j.dump(2) + "\n");

  std::ostringstream eq;
  eq << "timestamp,equity\n";
  for (const bt::EquityPoint& p : rep.equity)
    eq << format_timestamp(p.ts) << "," << fmt_g(p.equity) << "\n";
  write_text_file(dir / "equity.csv", eq.str());

  std::ostringstream mo;
  mo << "month,return\n";
  for (const auto& [month, ret] : rep.monthly)
    mo << month << "," << fmt_g(ret) << "\n";
  write_text_file(dir / "monthly.csv", mo.str());
}

}  // namespace

void cmd_train(const TrainOptions& opt) {
  Config cfg = load_config(opt.config_path);
  if (!opt.data_path.empty()) cfg.data_csv = opt.data_path;
  if (cfg.data_csv.empty())
    throw ConfigError("no data csv given (config data.csv or --data)");
  if (!opt.model_kind.empty()) {
    try {
      cfg.model.kind = model::parse_model_kind(opt.model_kind);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.model = train::assemble_baseline(cfg.model.kind, cfg.model);
  if (opt.seed) cfg.train.seed = *opt.seed;

  const fs::path out_dir(opt.out_dir);
  fs::create_directories(out_dir / "logs");
  fs::create_directories(out_dir / "checkpoints");
  fs::create_directories(out_dir / "reports");
  write_manifest(out_dir, "train", cfg, cfg.data_csv, {cfg.train.seed});

  const std::vector<market::TradingDay> days = load_days(cfg, cfg.data_csv);
  const train::WalkForwardConfig wf = walk_config(cfg);
  train::WalkForwardResult result;
  try {
    result = train::run_walk_forward(days, wf);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  write_session_files(out_dir, wf, result);

  std::ostringstream preds;
  preds << "date,time,prediction\n";
  std::ostringstream prices;
  prices << "date,time,close\n";
  for (const train::FramePrediction& p : result.stream) {
    preds << format_date(p.ts.date) << "," << format_time(p.ts.minute) << ","
          << p.predicted << "\n";
    prices << format_date(p.ts.date) << "," << format_time(p.ts.minute)
           << "," << fmt_g(p.close) << "\n";
  }
  write_text_file(out_dir / "reports" / "predictions.csv", preds.str());
  write_text_file(out_dir / "reports" / "prices.csv", prices.str());

  if (!result.stream.empty())
    write_backtest_files(out_dir / "reports", result.overall,
                         result.overall_map);

  ordered_json wfj;
  wfj["model"] = model::model_kind_name(cfg.model.kind);
  wfj["sessions"] = result.sessions.size();
  wfj["overall_map"] = result.overall_map;
  wfj["overall_accuracy"] = result.overall_accuracy;
  wfj["overall_aar"] = optional_json(result.overall.aar);
  wfj["overall_sharpe"] = optional_json(result.overall.sharpe);
  wfj["final_equity"] = result.overall.final_equity;
  write_text_file(out_dir / "reports" / "walkforward.json",
                  wfj.dump(2) + "\n");
}

namespace {

struct AlignedInputs {
  std::vector<bt::PricedPrediction> priced;
};

AlignedInputs read_backtest_inputs(const std::string& pred_path,
                                   const std::string& price_path) {
  auto read_rows = [](const std::string& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
      throw ConfigError(path + ": bad header, expected " + header);
    std::vector<std::array<std::string, 3>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::array<std::string, 3> row;
      std::size_t a = line.find(',');
      std::size_t b = a == std::string::npos ? a : line.find(',', a + 1);
      if (a == std::string::npos || b == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected 3 fields");
      row[0] = line.substr(0, a);
      row[1] = line.substr(a + 1, b - a - 1);
      row[2] = line.substr(b + 1);
      rows.push_back(std::move(row));
    }
    return rows;
  };

  const auto pred_rows = read_rows(pred_path, "date,time,prediction");
  const auto price_rows = read_rows(price_path, "date,time,close");
  if (pred_rows.size() != price_rows.size())
    throw ConfigError("prediction/price row counts differ: " +
                      std::to_string(pred_rows.size()) + " vs " +
                      std::to_string(price_rows.size()));

  AlignedInputs inputs;
  for (std::size_t i = 0; i < pred_rows.size(); ++i) {
    Timestamp pt, qt;
    if (!parse_date(pred_rows[i][0], pt.date) ||
        !parse_time(pred_rows[i][1], pt.minute))
      throw ConfigError(pred_path + ": bad timestamp in row " +
                        std::to_string(i + 2));
    if (!parse_date(price_rows[i][0], qt.date) ||
        !parse_time(price_rows[i][1], qt.minute))
      throw ConfigError(price_path + ": bad timestamp in row " +
                        std::to_string(i + 2));
    if (!(pt == qt))
      throw ConfigError("misaligned inputs at " + format_timestamp(pt) +
                        " vs " + format_timestamp(qt));
    bt::PricedPrediction p;
    p.ts = pt;
    try {
      p.prediction = std::stoi(pred_rows[i][2]);
      p.close = std::stod(price_rows[i][2]);
    } catch (const std::exception&) {
      throw ConfigError("bad numeric field at " + format_timestamp(pt));
    }
    if (p.prediction < -1 || p.prediction > 1)
      throw ConfigError("prediction outside {-1,0,1} at " +
                        format_timestamp(pt));
    inputs.priced.push_back(p);
  }
  return inputs;
}

}  // namespace

void cmd_backtest(const BacktestOptions& opt) {
  bt::CostModel cost;
  try {
    cost = bt::cost_preset(opt.cost_preset);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  const fs::path out_dir(opt.out_dir);
  fs::create_directories(out_dir);
  ordered_json manifest;
  manifest["command"] = "backtest";
  manifest["predictions"] = opt.predictions_path;
  manifest["prices"] = opt.prices_path;
  manifest["cost_preset"] = opt.cost_preset;
  manifest["round_trip_cost"] = cost.round_trip_cost;
  manifest["multiplier"] = cost.multiplier;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  const AlignedInputs inputs =
      read_backtest_inputs(opt.predictions_path, opt.prices_path);
  bt::BacktestReport report;
  try {
    report = bt::simulate(inputs.priced, cost);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_backtest_files(out_dir, report, std::nullopt);
}

void cmd_repeat(const RepeatOptions& opt) {
  Config cfg = load_config(opt.config_path);
  if (!opt.data_path.empty()) cfg.data_csv = opt.data_path;
  if (cfg.data_csv.empty())
    throw ConfigError("no data csv given (config data.csv or --data)");
  if (!opt.model_kind.empty())
    cfg.model.kind = model::parse_model_kind(opt.model_kind);
  cfg.model = train::assemble_baseline(cfg.model.kind, cfg.model);
  if (opt.seeds.size() < 2) throw ConfigError("cmd_repeat: need >= 2 seeds");

  const fs::path out_dir(opt.out_dir);
  fs::create_directories(out_dir / "per_seed");
  write_manifest(out_dir, "repeat", cfg, cfg.data_csv, opt.seeds);

  const std::vector<market::TradingDay> days = load_days(cfg, cfg.data_csv);
  const train::WalkForwardConfig wf = walk_config(cfg);
  train::RepeatResult result;
  try {
    result = train::repeat_runs(days, wf, opt.seeds);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  for (const train::SeedSummary& s : result.per_seed) {
    ordered_json j;
    j["seed"] = s.seed;
    j["map"] = s.map;
    j["aar"] = optional_json(s.aar);
    j["sharpe"] = optional_json(s.sharpe);
    j["accuracy"] = s.accuracy;
    write_text_file(out_dir / "per_seed" /
                        ("seed_" + std::to_string(s.seed) + ".json"),
                    j.dump(2) + "\n");
  }

  auto stats_json = [](const train::MetricStats& s) {
    ordered_json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["cv"] = optional_json(s.cv);
    return j;
  };
  ordered_json agg;
  agg["seeds"] = opt.seeds;
  agg["metrics"] = {{"map", stats_json(result.map)},
                    {"aar", stats_json(result.aar)},
                    {"sharpe", stats_json(result.sharpe)}};
  write_text_file(out_dir / "aggregate.json", agg.dump(2) + "\n");
}

int run_command(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const train::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace clvsa::cli
