#include <cmath>
#include <cstdio>
#include <iostream>

#include "clvsa/commands.hpp"
#include "clvsa/gradcheck.hpp"
#include "clvsa/rng.hpp"

namespace clvsa::cli {

using diff::GradCheckOptions;
using diff::GradCheckResult;
using diff::NodeRef;
using diff::Tape;
using diff::Tensor;

namespace {

Tensor rand_tensor(std::vector<int> shape, std::mt19937_64& rng,
                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// samples with |x| >= margin so finite differences never straddle a relu or
// clamp kink
Tensor rand_tensor_off_kink(std::vector<int> shape, std::mt19937_64& rng,
                            double margin = 0.1) {
  std::uniform_real_distribution<double> u(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = sign(rng) ? u(rng) : -u(rng);
  return t;
}

NodeRef project(Tape& tape, NodeRef x, const Tensor& direction) {
  return diff::dot(x, tape.constant(direction));
}

struct OpCheck {
  std::string name;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

GradCheckResult check(const diff::ScalarFn& fn,
                      const std::vector<Tensor>& params,
                      std::int64_t max_checks = 0, std::uint64_t seed = 0) {
  GradCheckOptions opts;
  opts.max_checks = max_checks;
  opts.seed = seed;
  return diff::grad_check(fn, params, opts);
}

// toy fixture shared by the composite checks: a two-frame day pair built
// from the synthetic generator
struct ToyFixture {
  market::DayPair pair;
  model::ModelConfig config;
};

ToyFixture make_toy_fixture(bool full_scale) {
  market::SynthConfig synth;
  synth.seed = 7;
  synth.days = 3;
  synth.frames_per_day = 2;
  synth.drift = 2e-3;
  synth.volatility = 4e-3;
  const market::SynthResult data = market::generate_synthetic(synth);
  std::vector<market::TradingDay> days =
      market::build_frames(data.bars, synth.frames_per_day);
  const market::LabelThresholds th =
      market::thresholds_from_lambda(0.2, 100.0);
  market::label_days(days, th);
  const market::NormStats stats = market::fit_normalizer(days);
  days = market::apply_normalizer(std::move(days), stats);
  ToyFixture fix;
  fix.pair = market::make_day_pairs(days).front();

  model::ModelConfig cfg;
  if (full_scale) {
    cfg.channels = 32;
    cfg.z_dim = 64;
  } else {
    cfg.channels = 2;
    cfg.z_dim = 3;
    cfg.prior_hidden = 8;
    cfg.posterior_hidden = 8;
    cfg.clf_hidden1 = 12;
    cfg.clf_hidden2 = 6;
  }
  cfg.dropout = 0.0;  // deterministic objective for finite differences
  fix.config = cfg;
  return fix;
}

std::vector<OpCheck> build_checks(const GradcheckOptions& opt) {
  const bool full = opt.scale == "full";
  std::vector<OpCheck> checks;

  auto unary = [&](const std::string& name, auto opfn, bool off_kink) {
    checks.push_back(
        {name, [opfn, off_kink](std::uint64_t seed) {
           std::mt19937_64 rng = make_rng(seed, 1);
           Tensor x = off_kink ? rand_tensor_off_kink({7}, rng)
                               : rand_tensor({7}, rng);
           Tensor dir = rand_tensor({7}, rng);
           return check(
               [opfn, dir](Tape& t, const std::vector<NodeRef>& p) {
                 return project(t, opfn(p[0]), dir);
               },
               {x});
         }});
  };
  auto binary = [&](const std::string& name, auto opfn) {
    checks.push_back({name, [opfn](std::uint64_t seed) {
                        std::mt19937_64 rng = make_rng(seed, 2);
                        Tensor a = rand_tensor({6}, rng);
                        Tensor b = rand_tensor({6}, rng);
                        Tensor dir = rand_tensor({6}, rng);
                        return check(
                            [opfn, dir](Tape& t,
                                        const std::vector<NodeRef>& p) {
                              return project(t, opfn(p[0], p[1]), dir);
                            },
                            {a, b});
                      }});
  };

  binary("elementwise(add)",
         [](NodeRef a, NodeRef b) { return diff::add(a, b); });
  binary("elementwise(hadamard)",
         [](NodeRef a, NodeRef b) { return diff::hadamard(a, b); });
  unary("elementwise(sigmoid)",
        [](NodeRef x) { return diff::sigmoid(x); }, false);
  unary("elementwise(tanh)", [](NodeRef x) { return diff::tanh(x); }, false);
  unary("elementwise(relu)", [](NodeRef x) { return diff::relu(x); }, true);
  binary("sub", [](NodeRef a, NodeRef b) { return diff::sub(a, b); });
  unary("exp", [](NodeRef x) { return diff::exp(x); }, false);
  unary("square", [](NodeRef x) { return diff::square(x); }, false);
  unary("neg", [](NodeRef x) { return diff::neg(x); }, false);
  unary("scale", [](NodeRef x) { return diff::scale(x, 1.7); }, false);
  unary("clamp", [](NodeRef x) { return diff::clamp(x, -0.8, 0.8); }, true);

  checks.push_back({"affine", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 3);
                      Tensor w = rand_tensor({4, 5}, rng);
                      Tensor x = rand_tensor({5}, rng);
                      Tensor b = rand_tensor({4}, rng);
                      Tensor dir = rand_tensor({4}, rng);
                      return check(
                          [dir](Tape& t, const std::vector<NodeRef>& p) {
                            return project(
                                t, diff::affine(p[0], p[1], p[2]), dir);
                          },
                          {w, x, b});
                    }});
  checks.push_back({"matvec", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 4);
                      Tensor w = rand_tensor({4, 5}, rng);
                      Tensor x = rand_tensor({5}, rng);
                      Tensor dir = rand_tensor({4}, rng);
                      return check(
                          [dir](Tape& t, const std::vector<NodeRef>& p) {
                            return project(t, diff::matvec(p[0], p[1]), dir);
                          },
                          {w, x});
                    }});
  checks.push_back(
      {"conv1d_row_shared", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 5);
         Tensor input = rand_tensor({3, 6, 2}, rng);
         Tensor w = rand_tensor({3, 2, 3}, rng);
         Tensor b = rand_tensor({3}, rng);
         Tensor dir = rand_tensor({3, 6, 3}, rng);
         return check(
             [dir](Tape& t, const std::vector<NodeRef>& p) {
               return project(
                   t, diff::conv1d_row_shared(p[0],
                                              diff::make_kernel(p[1], p[2])),
                   dir);
             },
             {input, w, b});
       }});
  checks.push_back({"softmax_last", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 6);
                      Tensor x = rand_tensor({6}, rng);
                      Tensor dir = rand_tensor({6}, rng);
                      return check(
                          [dir](Tape& t, const std::vector<NodeRef>& p) {
                            return project(t, diff::softmax_last(p[0]), dir);
                          },
                          {x});
                    }});
  checks.push_back({"concat_last", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 7);
                      Tensor a = rand_tensor({4}, rng);
                      Tensor b = rand_tensor({3}, rng);
                      Tensor dir = rand_tensor({7}, rng);
                      return check(
                          [dir](Tape& t, const std::vector<NodeRef>& p) {
                            return project(t, diff::concat_last(p[0], p[1]),
                                           dir);
                          },
                          {a, b});
                    }});
  checks.push_back({"cross_entropy", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 8);
                      Tensor logits = rand_tensor({5}, rng);
                      return check(
                          [](Tape&, const std::vector<NodeRef>& p) {
                            return diff::cross_entropy(
                                diff::softmax_last(p[0]), 2);
                          },
                          {logits});
                    }});
  checks.push_back(
      {"reparameterize", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 9);
         Tensor mu = rand_tensor({4}, rng);
         Tensor logvar = rand_tensor({4}, rng);
         Tensor eps = rand_tensor({4}, rng);
         Tensor dir = rand_tensor({4}, rng);
         return check(
             [eps, dir](Tape& t, const std::vector<NodeRef>& p) {
               return project(t, diff::reparameterize(p[0], p[1], eps), dir);
             },
             {mu, logvar});
       }});
  checks.push_back(
      {"dropout", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 10);
         Tensor x = rand_tensor({32}, rng);
         Tensor dir = rand_tensor({32}, rng);
         return check(
             [dir, seed](Tape& t, const std::vector<NodeRef>& p) {
               // identical mask on every evaluation
               std::mt19937_64 mask_rng = make_rng(seed, 11);
               return project(t, diff::dropout(p[0], 0.25, true, mask_rng),
                              dir);
             },
             {x});
       }});
  checks.push_back({"sum", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 12);
                      Tensor x = rand_tensor({9}, rng);
                      return check(
                          [](Tape&, const std::vector<NodeRef>& p) {
                            return diff::sum(p[0]);
                          },
                          {x});
                    }});
  checks.push_back({"dot", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 13);
                      Tensor a = rand_tensor({6}, rng);
                      Tensor b = rand_tensor({6}, rng);
                      return check(
                          [](Tape&, const std::vector<NodeRef>& p) {
                            return diff::dot(p[0], p[1]);
                          },
                          {a, b});
                    }});
  checks.push_back(
      {"stack_scalars", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 14);
         std::vector<Tensor> params;
         for (int i = 0; i < 4; ++i)
           params.push_back(rand_tensor({1}, rng));
         Tensor dir = rand_tensor({4}, rng);
         return check(
             [dir](Tape& t, const std::vector<NodeRef>& p) {
               return project(t, diff::stack_scalars(p), dir);
             },
             params);
       }});
  checks.push_back(
      {"weighted_sum", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 15);
         std::vector<Tensor> params = {rand_tensor({3}, rng)};
         for (int i = 0; i < 3; ++i) params.push_back(rand_tensor({5}, rng));
         Tensor dir = rand_tensor({5}, rng);
         return check(
             [dir](Tape& t, const std::vector<NodeRef>& p) {
               return project(
                   t, diff::weighted_sum(p[0], {p[1], p[2], p[3]}), dir);
             },
             params);
       }});
  checks.push_back({"reshape", [](std::uint64_t seed) {
                      std::mt19937_64 rng = make_rng(seed, 16);
                      Tensor x = rand_tensor({6}, rng);
                      Tensor dir = rand_tensor({2, 3}, rng);
                      return check(
                          [dir](Tape& t, const std::vector<NodeRef>& p) {
                            return project(t, diff::reshape(p[0], {2, 3}),
                                           dir);
                          },
                          {x});
                    }});
  checks.push_back(
      {"convlstm_step", [](std::uint64_t seed) {
         std::mt19937_64 rng = make_rng(seed, 17);
         const int c = 2;
         std::vector<Tensor> params;
         for (int g = 0; g < 4; ++g) {
           params.push_back(rand_tensor({3, 1 + c, c}, rng));  // weights
           params.push_back(rand_tensor({c}, rng));            // bias
         }
         params.push_back(rand_tensor({2, 4, 1}, rng));  // x
         params.push_back(rand_tensor({2, 4, c}, rng));  // h
         params.push_back(rand_tensor({2, 4, c}, rng));  // c
         Tensor dir_h = rand_tensor({2, 4, c}, rng);
         Tensor dir_c = rand_tensor({2, 4, c}, rng);
         return check(
             [dir_h, dir_c](Tape& t, const std::vector<NodeRef>& p) {
               model::ConvLstmParamNodes cp{
                   diff::make_kernel(p[0], p[1]),
                   diff::make_kernel(p[2], p[3]),
                   diff::make_kernel(p[4], p[5]),
                   diff::make_kernel(p[6], p[7])};
               model::LstmStateNodes st{p[9], p[10]};
               model::LstmStateNodes next =
                   model::convlstm_step(cp, p[8], st);
               return diff::add(project(t, next.h, dir_h),
                                project(t, next.c, dir_c));
             },
             params);
       }});

  const ToyFixture fixture = make_toy_fixture(full);
  const std::int64_t obj_checks = full ? 64 : 192;
  checks.push_back(
      {"objective_eq7", [fixture, obj_checks](std::uint64_t seed) {
         model::Model m(fixture.config, seed);
         std::vector<Tensor> params;
         for (int i = 0; i < m.params().count(); ++i)
           params.push_back(m.params().tensor(i));
         const objective::AnnealSchedule anneal{1000};
         const objective::StepLabels labels =
             objective::labels_for_pair(fixture.pair);
         auto fn = [&m, &fixture, &labels, &anneal,
                    seed](Tape& t, const std::vector<NodeRef>& leaves) {
           model::Model::Bound bound{leaves};
           std::mt19937_64 eps_rng = make_rng(seed, 18);  // fixed eps draws
           model::ModelOutput out = m.forward_pass(
               t, bound, fixture.pair, model::Mode::train, eps_rng);
           return objective::total_objective(out, labels, /*iteration=*/500,
                                             2.5e-4, 1e-5, anneal,
                                             bound.nodes)
               .loss;
         };
         return check(fn, params, obj_checks, seed);
       }});
  return checks;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.scale != "toy" && opt.scale != "full")
    throw ConfigError("gradcheck: scale must be toy or full");
  if (!opt.tamper_op.empty()) {
    bool found = false;
    for (int tag = 0; tag <= static_cast<int>(diff::OpTag::reshape); ++tag)
      if (opt.tamper_op == diff::op_name(static_cast<diff::OpTag>(tag))) {
        Tape::set_backward_tamper(static_cast<diff::OpTag>(tag), 1.01);
        found = true;
        break;
      }
    if (!found)
      throw ConfigError("gradcheck: unknown op to tamper: " + opt.tamper_op);
  }

  GradcheckReport report;
  for (const OpCheck& op : build_checks(opt)) {
    GradcheckRow row;
    row.component = op.name;
    for (int s = 0; s < opt.seeds; ++s) {
      const GradCheckResult r = op.run(static_cast<std::uint64_t>(s) + 1);
      row.max_rel_err = std::max(row.max_rel_err, r.max_rel_err);
      row.coords += r.coords_checked;
    }
    report.worst = std::max(report.worst, row.max_rel_err);
    report.rows.push_back(row);
  }
  Tape::clear_backward_tamper();
  return report;
}

void cmd_gradcheck(const GradcheckOptions& opt) {
  const GradcheckReport report = run_gradcheck(opt);
  std::printf("%-24s %12s %8s  %s\n", "component", "max_rel_err", "coords",
              "status");
  for (const GradcheckRow& row : report.rows)
    std::printf("%-24s %12.3e %8lld  %s\n", row.component.c_str(),
                row.max_rel_err, static_cast<long long>(row.coords),
                row.max_rel_err <= 1e-4 ? "ok" : "FAIL");
  if (!report.passed())
    throw std::runtime_error("gradient check failed: worst relative error " +
                             std::to_string(report.worst));
}

}  // namespace clvsa::cli
