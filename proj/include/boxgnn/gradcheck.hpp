#pragma once

#include <functional>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/tensor.hpp"

namespace boxgnn {

/// Scalar function of one tensor-valued input, recorded on the given tape.
using TapeFunction = std::function<ad::Var(ad::Tape&, ad::Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  Tensor analytic;
  Tensor numeric;
};

/// Compares backward() against central differences at `point`. The relative
/// error per coordinate is |analytic - numeric| / max(1e-8, |numeric|).
/// Throws std::domain_error if f is non-finite at any probe.
GradCheckResult finite_diff_check(const TapeFunction& f, const Tensor& point, double step);

}  // namespace boxgnn
