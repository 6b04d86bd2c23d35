#include <cmath>

#include "boxgnn/params.hpp"

namespace boxgnn {

void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& s) {
  if (grads.size() != params.size()) throw ShapeError("adam: gradient count does not match parameters");
  if (s.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor& p = params.value(i);
      s.m.emplace_back(p.rows(), p.cols());
      s.v.emplace_back(p.rows(), p.cols());
    }
  }
  if (s.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  s.step += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    const Tensor& g = grads[i];
    if (!p.same_shape(g) || !p.same_shape(s.m[i])) {
      throw ShapeError("adam: shape mismatch for parameter '" + params.name(i) + "'");
    }
    if (!params.trainable(i)) continue;
    Tensor& m = s.m[i];
    Tensor& v = s.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
      const double mh = m[k] / bc1;
      const double vh = v[k] / bc2;
      p[k] -= s.lr * mh / (std::sqrt(vh) + s.eps);
    }
  }
}

double decayed_lr(double initial_lr, double decay, long epoch) {
  return initial_lr * std::pow(1.0 - decay, static_cast<double>(epoch));
}

}  // namespace boxgnn
