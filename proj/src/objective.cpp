#include "clvsa/objective.hpp"

#include <stdexcept>

namespace clvsa::objective {

using diff::NodeRef;
using diff::Tensor;

double beta_at(long iteration, const AnnealSchedule& schedule) {
  if (iteration < 0) throw std::invalid_argument("beta_at: negative iteration");
  if (schedule.anneal_iterations < 1)
    throw std::invalid_argument("beta_at: anneal horizon must be >= 1");
  if (iteration >= schedule.anneal_iterations) return 1.0;
  return static_cast<double>(iteration) /
         static_cast<double>(schedule.anneal_iterations);
}

NodeRef kld_diag_gaussian(const model::GaussianNodes& post,
                          const model::GaussianNodes& prior) {
  if (!post.mu.value().same_shape(prior.mu.value()))
    throw std::invalid_argument("kld: dimension mismatch");
  const double d = static_cast<double>(post.mu.value().size());
  // sum_i [ (lv_pr - lv_po)/2 + (exp(lv_po) + (mu_po - mu_pr)^2) /
  //         (2 exp(lv_pr)) - 1/2 ]
  NodeRef half_logs = diff::scale(diff::sub(prior.logvar, post.logvar), 0.5);
  NodeRef diff_mu = diff::sub(post.mu, prior.mu);
  NodeRef numer = diff::add(diff::exp(post.logvar), diff::square(diff_mu));
  NodeRef inv_pr_var = diff::exp(diff::scale(prior.logvar, -1.0));
  NodeRef ratio = diff::scale(diff::hadamard(numer, inv_pr_var), 0.5);
  NodeRef per_dim = diff::add(half_logs, ratio);
  NodeRef total = diff::sum(per_dim);
  Tensor shift = Tensor::scalar(-0.5 * d);
  return diff::add(total, post.mu.tape->constant(shift));
}

NodeRef l2_penalty(const std::vector<NodeRef>& params) {
  if (params.empty())
    throw std::invalid_argument("l2_penalty: no parameters");
  NodeRef acc;
  for (const NodeRef& p : params) {
    NodeRef term = diff::sum(diff::square(p));
    acc = acc.valid() ? diff::add(acc, term) : term;
  }
  return acc;
}

StepLabels labels_for_pair(const market::DayPair& pair) {
  StepLabels labels;
  labels.forward = pair.day_b.labels;
  labels.backward = pair.day_b_reversed.labels;
  return labels;
}

namespace {

// mean cross entropy over the labeled steps; invalid NodeRef when none
NodeRef mean_cross_entropy(const std::vector<NodeRef>& probs,
                           const std::vector<std::optional<int>>& labels) {
  if (probs.size() != labels.size())
    throw std::invalid_argument("objective: label/step count mismatch");
  NodeRef acc;
  int count = 0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (!labels[t]) continue;
    NodeRef ce =
        diff::cross_entropy(probs[t], market::label_to_class(*labels[t]));
    acc = acc.valid() ? diff::add(acc, ce) : ce;
    ++count;
  }
  if (count == 0) return NodeRef{};
  return diff::scale(acc, 1.0 / static_cast<double>(count));
}

}  // namespace

ObjectiveResult total_objective(const model::ModelOutput& output,
                                const StepLabels& labels, long iteration,
                                double alpha, double gamma,
                                const AnnealSchedule& schedule,
                                const std::vector<NodeRef>& trainable) {
  ObjectiveResult res;
  res.breakdown.beta = beta_at(iteration, schedule);
  NodeRef ce_fwd = mean_cross_entropy(output.forward_probs, labels.forward);
  if (!ce_fwd.valid())
    throw std::invalid_argument("objective: no labeled forward steps");
  res.breakdown.ce_forward = ce_fwd.value()[0];

  NodeRef loss = ce_fwd;

  const bool variational = !output.posterior.empty();
  if (variational) {
    if (output.posterior.size() != output.prior.size())
      throw std::invalid_argument("objective: prior/posterior count mismatch");
    NodeRef ce_bwd =
        mean_cross_entropy(output.backward_probs, labels.backward);
    if (ce_bwd.valid()) {
      res.breakdown.ce_backward = ce_bwd.value()[0];
      loss = diff::add(loss, diff::scale(ce_bwd, alpha));
    }

    NodeRef kld_acc;
    for (std::size_t t = 0; t < output.posterior.size(); ++t) {
      NodeRef k = kld_diag_gaussian(output.posterior[t], output.prior[t]);
      kld_acc = kld_acc.valid() ? diff::add(kld_acc, k) : k;
    }
    NodeRef kld_mean = diff::scale(
        kld_acc, 1.0 / static_cast<double>(output.posterior.size()));
    res.breakdown.kld = kld_mean.value()[0];
    if (res.breakdown.beta > 0.0)
      loss = diff::add(loss, diff::scale(kld_mean, res.breakdown.beta));
  }

  NodeRef l2 = l2_penalty(trainable);
  res.breakdown.l2 = l2.value()[0];
  if (gamma != 0.0) loss = diff::add(loss, diff::scale(l2, gamma));

  res.loss = loss;
  res.breakdown.total = loss.value()[0];
  return res;
}

}  // namespace clvsa::objective
