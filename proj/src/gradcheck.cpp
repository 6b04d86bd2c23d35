#include "boxgnn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace boxgnn {

namespace {

double evaluate(const TapeFunction& f, const Tensor& x) {
  ad::Tape tape;
  const double v = f(tape, tape.constant(x)).value().item();
  if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const TapeFunction& f, const Tensor& point, double step) {
  if (!(step > 0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  GradCheckResult res;
  {
    ad::Tape tape;
    auto x = tape.leaf(point);
    auto y = f(tape, x);
    if (!std::isfinite(y.value().item())) {
      throw std::domain_error("finite_diff_check: non-finite function value");
    }
    tape.backward(y);
    res.analytic = x.grad();
  }
  res.numeric = Tensor(point.rows(), point.cols());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = evaluate(f, probe);
    probe[i] = point[i] - step;
    const double down = evaluate(f, probe);
    probe[i] = point[i];
    res.numeric[i] = (up - down) / (2.0 * step);
    const double err =
        std::abs(res.analytic[i] - res.numeric[i]) / std::max(1e-8, std::abs(res.numeric[i]));
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
    }
  }
  return res;
}

}  // namespace boxgnn
