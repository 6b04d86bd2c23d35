#include "boxgnn/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "boxgnn/kernels.hpp"

namespace boxgnn::ad {

const Tensor& Var::value() const { return tape->value(id); }
Tensor Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, true, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw std::logic_error("operands belong to different tapes");
    needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(backward) : Backward{}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  grad_slot(id) += g;
}

Tensor Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward root belongs to another tape");
  if (nodes_[root.id].value.size() != 1) {
    throw ShapeError("backward requires a scalar root, got " + nodes_[root.id].value.shape_string());
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!nodes_[root.id].needs_grad) return;
  grad_slot(root.id).fill(1.0);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Copy: the closure may grow grad slots of earlier nodes but never this one.
    const Tensor g = n.grad;
    n.backward(*this, g);
  }
}

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                     b.value().shape_string());
  }
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <class F>
Tensor zip(const Tensor& x, const Tensor& y, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor v = zip(a.value(), b.value(), [](double x, double y) { return x + y; });
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor v = zip(a.value(), b.value(), [](double x, double y) { return x - y; });
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) t.accumulate(ib, map(g, [](double x) { return -x; }));
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor v = zip(a.value(), b.value(), [](double x, double y) { return x * y; });
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, zip(g, t.value(ib), [](double x, double y) { return x * y; }));
    if (t.needs_grad(ib)) t.accumulate(ib, zip(g, t.value(ia), [](double x, double y) { return x * y; }));
  });
}

Var div(Var a, Var b) {
  require_same(a, b, "div");
  Tensor v = zip(a.value(), b.value(), [](double x, double y) { return x / y; });
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    if (t.needs_grad(ia)) t.accumulate(ia, zip(g, y, [](double gg, double yy) { return gg / yy; }));
    if (t.needs_grad(ib)) {
      Tensor gb(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.size(); ++i) gb[i] = -g[i] * x[i] / (y[i] * y[i]);
      t.accumulate(ib, gb);
    }
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  Tensor v = map(a.value(), [c](double x) { return c * x; });
  const auto ia = a.id;
  return a.tape->record(std::move(v), {a}, [ia, c](Tape& t, const Tensor& g) {
    t.accumulate(ia, map(g, [c](double x) { return c * x; }));
  });
}

Var add_scalar(Var a, double c) {
  Tensor v = map(a.value(), [c](double x) { return x + c; });
  const auto ia = a.id;
  return a.tape->record(std::move(v), {a}, [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

namespace {

Var select_binary(Var a, Var b, bool take_max) {
  require_same(a, b, take_max ? "maximum" : "minimum");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor v(x.rows(), x.cols());
  std::vector<bool> from_a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    from_a[i] = take_max ? !(y[i] > x[i]) : !(y[i] < x[i]);
    v[i] = from_a[i] ? x[i] : y[i];
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b},
                        [ia, ib, from_a = std::move(from_a)](Tape& t, const Tensor& g) {
                          Tensor ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
                          for (std::size_t i = 0; i < g.size(); ++i) (from_a[i] ? ga : gb)[i] = g[i];
                          t.accumulate(ia, ga);
                          t.accumulate(ib, gb);
                        });
}

}  // namespace

Var maximum(Var a, Var b) { return select_binary(a, b, true); }
Var minimum(Var a, Var b) { return select_binary(a, b, false); }

Var matmul(Var a, Var b) {
  const auto exec = kernels::default_exec();
  Tensor v = kernels::matmul(a.value(), b.value(), false, false, exec);
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib, exec](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, kernels::matmul(g, t.value(ib), false, true, exec));
    if (t.needs_grad(ib)) t.accumulate(ib, kernels::matmul(t.value(ia), g, true, false, exec));
  });
}

Var broadcast(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  const bool row_src = x.rows() == 1;
  const bool col_src = x.cols() == 1;
  if (!((row_src || x.rows() == rows) && (col_src || x.cols() == cols))) {
    throw ShapeError("cannot broadcast " + x.shape_string() + " to (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
  }
  Tensor v(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) v(r, c) = x(row_src ? 0 : r, col_src ? 0 : c);
  const auto ia = a.id;
  const std::size_t sr = x.rows(), sc = x.cols();
  return a.tape->record(std::move(v), {a}, [ia, sr, sc, row_src, col_src](Tape& t, const Tensor& g) {
    Tensor ga(sr, sc);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(row_src ? 0 : r, col_src ? 0 : c) += g(r, c);
    t.accumulate(ia, ga);
  });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  const auto ia = a.id;
  const std::size_t r = x.rows(), c = x.cols();
  return a.tape->record(Tensor::scalar(s), {a}, [ia, r, c](Tape& t, const Tensor& g) {
    t.accumulate(ia, Tensor(r, c, g.item()));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  const Tensor& x = a.value();
  Tensor v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double e : x.row_span(r)) s += e;
    v(r, 0) = s;
  }
  const auto ia = a.id;
  const std::size_t cols = x.cols();
  return a.tape->record(std::move(v), {a}, [ia, cols](Tape& t, const Tensor& g) {
    Tensor ga(g.rows(), cols);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) = g(r, 0);
    t.accumulate(ia, ga);
  });
}

Var prod_cols(Var a) {
  const Tensor& x = a.value();
  const std::size_t cols = x.cols();
  Tensor v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double p = 1.0;
    for (double e : x.row_span(r)) p *= e;
    v(r, 0) = p;
  }
  const auto ia = a.id;
  return a.tape->record(std::move(v), {a}, [ia, cols](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor ga(g.rows(), cols);
    std::vector<double> prefix(cols + 1), suffix(cols + 1);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      prefix[0] = 1.0;
      for (std::size_t c = 0; c < cols; ++c) prefix[c + 1] = prefix[c] * x(r, c);
      suffix[cols] = 1.0;
      for (std::size_t c = cols; c > 0; --c) suffix[c - 1] = suffix[c] * x(r, c - 1);
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) = g(r, 0) * prefix[c] * suffix[c + 1];
    }
    t.accumulate(ia, ga);
  });
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  Tensor v(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) v(0, c) += x(r, c);
  const auto ia = a.id;
  const std::size_t rows = x.rows();
  return a.tape->record(std::move(v), {a}, [ia, rows](Tape& t, const Tensor& g) {
    Tensor ga(rows, g.cols());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = g(0, c);
    t.accumulate(ia, ga);
  });
}

Var max_reduce(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw ShapeError("max of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  const auto ia = a.id;
  const std::size_t r = x.rows(), c = x.cols();
  return a.tape->record(Tensor::scalar(x[best]), {a}, [ia, r, c, best](Tape& t, const Tensor& g) {
    Tensor ga(r, c);
    ga[best] = g.item();
    t.accumulate(ia, ga);
  });
}

namespace {

template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tensor v = map(a.value(), f);
  const auto ia = a.id;
  return a.tape->record(std::move(v), {a}, [ia, dfdx](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor ga(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] = g[i] * dfdx(x[i]);
    t.accumulate(ia, ga);
  });
}

}  // namespace

Var softplus(Var a) {
  return unary(a, [](double x) { return boxgnn::softplus(x); }, [](double x) { return sigmoid(x); });
}

Var log_softplus(Var a) {
  auto value = [](double x) {
    return x < -30.0 ? x + std::log1p(-0.5 * std::exp(x)) : std::log(boxgnn::softplus(x));
  };
  auto deriv = [](double x) { return x < -30.0 ? 1.0 - 0.5 * std::exp(x) : sigmoid(x) / boxgnn::softplus(x); };
  return unary(a, value, deriv);
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x) { return x > 0 ? 1.0 : 0.0; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0)) throw std::domain_error("log of non-positive value " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var row_norm(Var a) {
  const Tensor& x = a.value();
  Tensor v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double e : x.row_span(r)) s += e * e;
    v(r, 0) = std::sqrt(s);
  }
  const auto ia = a.id;
  Tensor norms = v;
  return a.tape->record(std::move(v), {a}, [ia, norms = std::move(norms)](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor ga(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double n = norms(r, 0);
      if (n == 0.0) continue;
      for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) = g(r, 0) * x(r, c) / n;
    }
    t.accumulate(ia, ga);
  });
}

Var concat(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows()) throw ShapeError("concat row mismatch " + x.shape_string() + " vs " + y.shape_string());
  const std::size_t ca = x.cols(), cb = y.cols();
  Tensor v(x.rows(), ca + cb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) v(r, c) = x(r, c);
    for (std::size_t c = 0; c < cb; ++c) v(r, ca + c) = y(r, c);
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(v), {a, b}, [ia, ib, ca, cb](Tape& t, const Tensor& g) {
    Tensor ga(g.rows(), ca), gb(g.rows(), cb);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
      for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
    }
    t.accumulate(ia, ga);
    t.accumulate(ib, gb);
  });
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) throw ShapeError("slice columns out of range for " + x.shape_string());
  const std::size_t w = end - begin;
  Tensor v(x.rows(), w);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < w; ++c) v(r, c) = x(r, begin + c);
  const auto ia = a.id;
  const std::size_t cols = x.cols();
  return a.tape->record(std::move(v), {a}, [ia, begin, w, cols](Tape& t, const Tensor& g) {
    Tensor ga(g.rows(), cols);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < w; ++c) ga(r, begin + c) = g(r, c);
    t.accumulate(ia, ga);
  });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
  Tensor v = kernels::gather_rows(a.value(), index, kernels::default_exec());
  const auto ia = a.id;
  const std::size_t n = a.value().rows();
  return a.tape->record(std::move(v), {a}, [ia, n, index = std::move(index)](Tape& t, const Tensor& g) {
    t.accumulate(ia, kernels::scatter_add_rows(g, index, n));
  });
}

Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t n_rows) {
  Tensor v = kernels::scatter_add_rows(a.value(), index, n_rows);
  const auto ia = a.id;
  return a.tape->record(std::move(v), {a}, [ia, index = std::move(index)](Tape& t, const Tensor& g) {
    t.accumulate(ia, kernels::gather_rows(g, index, kernels::Exec::Serial));
  });
}

Var segment_max_rows(Var a, const std::vector<std::vector<std::size_t>>& groups) {
  auto seg = kernels::segment_max_rows(a.value(), groups, kernels::default_exec());
  const auto ia = a.id;
  const std::size_t n = a.value().rows();
  return a.tape->record(std::move(seg.value), {a},
                        [ia, n, argmax = std::move(seg.argmax)](Tape& t, const Tensor& g) {
                          Tensor ga(n, g.cols());
                          for (std::size_t r = 0; r < g.rows(); ++r)
                            for (std::size_t c = 0; c < g.cols(); ++c)
                              ga(argmax[r * g.cols() + c], c) += g(r, c);
                          t.accumulate(ia, ga);
                        });
}

}  // namespace boxgnn::ad
