#pragma once

// Two-sided Mann-Whitney U test with midrank ties.

#include <span>
#include <vector>

namespace boxgnn {

struct MannWhitneyResult {
  double u = 0.0;  // U of the first sample: pairs with a > b, ties count 1/2
  double p = 1.0;
  bool exact = false;
};

/// Midranks (1-based) of the pooled values.
std::vector<double> midranks(std::span<const double> values);

/// Exact p when min(n_a, n_b) <= 8, normal approximation otherwise.
/// Throws std::invalid_argument on an empty sample.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// P(|U - mean| >= |U_obs - mean|) over every equally likely assignment of
/// the pooled midranks to the two samples.
double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b);
/// Normal approximation with tie correction and 0.5 continuity correction.
double mann_whitney_normal_p(std::span<const double> a, std::span<const double> b);

}  // namespace boxgnn
