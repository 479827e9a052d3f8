#include "clvsa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace clvsa::diff {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeRef> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  NodeRef loss = f(tape, leaves);
  if (loss.value().size() != 1)
    throw std::invalid_argument("grad_check: f must return a scalar");
  return loss.value()[0];
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f,
                           const std::vector<Tensor>& params,
                           const GradCheckOptions& opts) {
  const double v0 = evaluate(f, params);
  if (evaluate(f, params) != v0)
    throw std::invalid_argument("grad_check: f is not deterministic");

  // analytic gradients
  Tape tape;
  std::vector<NodeRef> leaves;
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  tape.backward(f(tape, leaves));
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const NodeRef& l : leaves) analytic.push_back(l.grad());

  // coordinates to probe
  std::vector<std::pair<int, std::int64_t>> coords;
  std::int64_t total = 0;
  for (const Tensor& p : params) total += p.size();
  if (opts.max_checks == 0 || opts.max_checks >= total) {
    for (std::size_t pi = 0; pi < params.size(); ++pi)
      for (std::int64_t i = 0; i < params[pi].size(); ++i)
        coords.emplace_back(static_cast<int>(pi), i);
  } else {
    std::mt19937_64 rng(opts.seed);
    // one coordinate per tensor so no parameter block goes unchecked
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      if (params[pi].size() == 0) continue;
      std::uniform_int_distribution<std::int64_t> d(0, params[pi].size() - 1);
      coords.emplace_back(static_cast<int>(pi), d(rng));
    }
    std::uniform_int_distribution<std::int64_t> flat(0, total - 1);
    while (static_cast<std::int64_t>(coords.size()) < opts.max_checks) {
      std::int64_t k = flat(rng);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        if (k < params[pi].size()) {
          coords.emplace_back(static_cast<int>(pi), k);
          break;
        }
        k -= params[pi].size();
      }
    }
  }

  GradCheckResult res;
  std::vector<Tensor> work = params;
  for (const auto& [pi, i] : coords) {
    const double orig = work[static_cast<std::size_t>(pi)][i];
    work[static_cast<std::size_t>(pi)][i] = orig + opts.step;
    const double up = evaluate(f, work);
    work[static_cast<std::size_t>(pi)][i] = orig - opts.step;
    const double down = evaluate(f, work);
    work[static_cast<std::size_t>(pi)][i] = orig;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double a = analytic[static_cast<std::size_t>(pi)][i];
    const double rel = std::abs(a - numeric) /
                       std::max({1.0, std::abs(a), std::abs(numeric)});
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_param = pi;
      res.worst_coord = i;
      res.analytic_at_worst = a;
      res.numeric_at_worst = numeric;
    }
    ++res.coords_checked;
  }
  return res;
}

}  // namespace clvsa::diff
