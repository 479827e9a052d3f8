#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "clvsa/tape.hpp"

namespace clvsa::diff {

// Builds a scalar loss from leaf nodes created, in order, from the given
// parameter tensors. Must be deterministic: recreate any rng inside with a
// fixed seed and keep dropout off or its mask fixed.
using ScalarFn =
    std::function<NodeRef(Tape&, const std::vector<NodeRef>&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many
  // coordinates (at least one per tensor) keeps large models tractable
  std::int64_t max_checks = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_param = -1;
  std::int64_t worst_coord = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::int64_t coords_checked = 0;
};

// Central-difference check of backward(): relative error per coordinate is
// |a - n| / max(1, |a|, |n|).
GradCheckResult grad_check(const ScalarFn& f,
                           const std::vector<Tensor>& params,
                           const GradCheckOptions& opts = {});

}  // namespace clvsa::diff
