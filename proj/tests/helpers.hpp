#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "boxgnn/box.hpp"
#include "boxgnn/gradcheck.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/rng.hpp"
#include "boxgnn/tensor.hpp"

namespace testing {

using namespace boxgnn;

inline Box box1(double lo, double hi) { return Box{{lo}, {hi}}; }

inline Box random_box(Rng& rng, std::size_t dim, double span = 4.0, double max_side = 3.0) {
  Box b;
  for (std::size_t i = 0; i < dim; ++i) {
    const double lo = rng.uniform(-span, span);
    b.lower.push_back(lo);
    b.upper.push_back(lo + rng.uniform(0.05, max_side));
  }
  return b;
}

inline Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

/// Graph from inline axiom and domain text.
inline KnowledgeGraph graph(const std::string& axioms, const std::string& domains) {
  return parse_graph(axioms, domains);
}

inline std::size_t cls(const KnowledgeGraph& g, const std::string& id) { return *g.find_class(id); }

inline bool contained(const Box& c, const Box& d) {
  for (std::size_t i = 0; i < c.dim(); ++i) {
    if (c.lower[i] < d.lower[i] || c.upper[i] > d.upper[i]) return false;
  }
  return true;
}

/// False when central differences at `step` cannot resolve the gradient of f
/// to `tol`: the step-doubling truncation estimate |D(h) - D(2h)| / 3 exceeds
/// tol / 2 relative to |D(h)| for some coordinate.
inline bool fd_resolvable(const TapeFunction& f, const Tensor& x, double step, double tol) {
  const auto a = finite_diff_check(f, x, step);
  const auto b = finite_diff_check(f, x, 2 * step);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = a.numeric.values()[i];
    if (std::abs(b.numeric.values()[i] - n) / 3 > 0.5 * tol * std::max(1e-8, std::abs(n))) return false;
  }
  return true;
}

}  // namespace testing
