#pragma once

#include <optional>
#include <vector>

#include "clvsa/model.hpp"
#include "clvsa/tape.hpp"

namespace clvsa::objective {

struct ObjectiveBreakdown {
  double ce_forward = 0.0;   // nats, mean over labeled steps
  double ce_backward = 0.0;  // nats
  double kld = 0.0;          // nats, mean over steps
  double l2 = 0.0;
  double beta = 0.0;
  double total = 0.0;  // ce_forward + alpha*ce_backward + beta*kld + gamma*l2
};

struct AnnealSchedule {
  long anneal_iterations = 1000;  // K
};

// min(1, k / K): 0 at the first iteration, exactly 1 from k = K on
double beta_at(long iteration, const AnnealSchedule& schedule);

// closed-form KL divergence between diagonal Gaussians, differentiable
// through both argument pairs
diff::NodeRef kld_diag_gaussian(const model::GaussianNodes& post,
                                const model::GaussianNodes& prior);

// sum of squared entries over every trainable tensor, biases included
diff::NodeRef l2_penalty(const std::vector<diff::NodeRef>& params);

struct StepLabels {
  std::vector<std::optional<int>> forward;   // -1/0/+1 per decoder step
  std::vector<std::optional<int>> backward;  // reversed order
};

StepLabels labels_for_pair(const market::DayPair& pair);

struct ObjectiveResult {
  diff::NodeRef loss;
  ObjectiveBreakdown breakdown;
};

// Assembles the minimized training loss for one pair. Cross entropies and
// the KLD are means over time steps so alpha and gamma keep their meaning at
// any day length; unlabeled steps are skipped.
ObjectiveResult total_objective(const model::ModelOutput& output,
                                const StepLabels& labels, long iteration,
                                double alpha, double gamma,
                                const AnnealSchedule& schedule,
                                const std::vector<diff::NodeRef>& trainable);

}  // namespace clvsa::objective
