#include "boxgnn/mann_whitney.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>

namespace boxgnn {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("Mann-Whitney U: empty sample");
}

std::vector<double> pooled(std::span<const double> a, std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  return all;
}

double u_statistic(const std::vector<double>& ranks, std::size_t na) {
  double r = 0.0;
  for (std::size_t i = 0; i < na; ++i) r += ranks[i];
  return r - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
}

}  // namespace

double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto ranks = midranks(pooled(a, b));
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  // Distribute the smaller sample; p is symmetric in the two samples.
  const bool first_small = na <= nb;
  const std::size_t k = first_small ? na : nb;
  // Doubled midranks are integers.
  std::vector<std::int64_t> twice(n);
  for (std::size_t i = 0; i < n; ++i) twice[i] = std::llround(2.0 * ranks[i]);
  std::int64_t observed = 0;
  for (std::size_t i = 0; i < k; ++i) observed += twice[first_small ? i : na + i];

  const std::int64_t max_sum = 2 * static_cast<std::int64_t>(n) * static_cast<std::int64_t>(k) + 1;
  // ways[j][s]: subsets of size j with doubled rank sum s.
  std::vector<std::vector<double>> ways(k + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t t = twice[i];
    for (std::size_t j = std::min(k, i + 1); j >= 1; --j) {
      auto& dst = ways[j];
      const auto& src = ways[j - 1];
      for (std::int64_t s = max_sum; s >= t; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - t)];
    }
  }
  // 2U = S2 - k(k+1); 2 * mean = na * nb.
  const std::int64_t offset = static_cast<std::int64_t>(k * (k + 1));
  const std::int64_t twice_mean = static_cast<std::int64_t>(na * nb);
  const std::int64_t obs_dev = std::llabs(observed - offset - twice_mean);
  double total = 0.0, tail = 0.0;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    const double w = ways[k][static_cast<std::size_t>(s)];
    if (w == 0.0) continue;
    total += w;
    if (std::llabs(s - offset - twice_mean) >= obs_dev) tail += w;
  }
  return std::min(1.0, tail / total);
}

double mann_whitney_normal_p(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto all = pooled(a, b);
  const auto ranks = midranks(all);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double u = u_statistic(ranks, a.size());
  std::map<double, double> ties;
  for (double v : all) ties[v] += 1.0;
  double tie_sum = 0.0;
  for (const auto& [v, t] : ties) tie_sum += t * t * t - t;
  const double var = na * nb / 12.0 * ((n + 1.0) - (n > 1.0 ? tie_sum / (n * (n - 1.0)) : 0.0));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - 0.5 * na * nb) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  MannWhitneyResult r;
  r.u = u_statistic(midranks(pooled(a, b)), a.size());
  r.exact = std::min(a.size(), b.size()) <= 8;
  r.p = r.exact ? mann_whitney_exact_p(a, b) : mann_whitney_normal_p(a, b);
  return r;
}

}  // namespace boxgnn
