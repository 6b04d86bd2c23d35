#include "boxgnn/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace boxgnn::kernels {

namespace {

int g_threads = 1;

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 14;

struct MatDims {
  std::size_t m, k, n;
};

MatDims check_matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t ka = ta ? a.rows() : a.cols();
  const std::size_t kb = tb ? b.cols() : b.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  if (ka != kb) {
    throw ShapeError("matmul inner dimension mismatch: " + a.shape_string() + (ta ? "^T" : "") +
                     " * " + b.shape_string() + (tb ? "^T" : ""));
  }
  return {m, ka, n};
}

inline double dot_entry(const Tensor& a, const Tensor& b, bool ta, bool tb, std::size_t i,
                        std::size_t j, std::size_t k) {
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ta ? a(p, i) : a(i, p);
    const double bv = tb ? b(j, p) : b(p, j);
    s += av * bv;
  }
  return s;
}

}  // namespace

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }
Exec default_exec() { return g_threads > 1 ? Exec::Parallel : Exec::Serial; }

Tensor matmul_serial(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const auto d = check_matmul(a, b, ta, tb);
  Tensor c(d.m, d.n);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) c(i, j) = dot_entry(a, b, ta, tb, i, j, d.k);
  return c;
}

Tensor matmul_parallel(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const auto d = check_matmul(a, b, ta, tb);
  Tensor c(d.m, d.n);
  const auto total = static_cast<std::int64_t>(d.m * d.n);
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const auto i = static_cast<std::size_t>(idx) / d.n;
    const auto j = static_cast<std::size_t>(idx) % d.n;
    c(i, j) = dot_entry(a, b, ta, tb, i, j, d.k);
  }
  return c;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb, Exec exec) {
  const auto d = check_matmul(a, b, ta, tb);
  if (exec == Exec::Parallel && d.m * d.n * d.k >= kParallelWork) return matmul_parallel(a, b, ta, tb);
  return matmul_serial(a, b, ta, tb);
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index, Exec exec) {
  for (auto r : index) {
    if (r >= x.rows()) throw ShapeError("gather row index out of range");
  }
  Tensor out(index.size(), x.cols());
  const auto n = static_cast<std::int64_t>(index.size());
  const std::size_t cols = x.cols();
  if (exec == Exec::Parallel && index.size() * cols >= kParallelWork) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(x.row_span(index[i]).begin(), cols, out.row_span(i).begin());
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(x.row_span(index[i]).begin(), cols, out.row_span(i).begin());
    }
  }
  return out;
}

Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_rows) {
  if (index.size() != x.rows()) throw ShapeError("scatter index length does not match rows");
  Tensor out(n_rows, x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n_rows) throw ShapeError("scatter row index out of range");
    auto dst = out.row_span(index[i]);
    auto src = x.row_span(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  return out;
}

namespace {

void segment_max_one(const Tensor& x, const std::vector<std::size_t>& group, std::size_t g,
                     SegmentMax& out) {
  const std::size_t cols = x.cols();
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t best = group.front();
    double best_v = x(best, c);
    for (std::size_t k = 1; k < group.size(); ++k) {
      const std::size_t r = group[k];
      const double v = x(r, c);
      if (v > best_v || (v == best_v && r < best)) {
        best_v = v;
        best = r;
      }
    }
    out.value(g, c) = best_v;
    out.argmax[g * cols + c] = best;
  }
}

}  // namespace

SegmentMax segment_max_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups,
                            Exec exec) {
  for (const auto& grp : groups) {
    if (grp.empty()) throw ShapeError("segment max over an empty group");
    for (auto r : grp)
      if (r >= x.rows()) throw ShapeError("segment row index out of range");
  }
  SegmentMax out{Tensor(groups.size(), x.cols()),
                 std::vector<std::size_t>(groups.size() * x.cols())};
  const auto n = static_cast<std::int64_t>(groups.size());
  if (exec == Exec::Parallel && x.rows() * x.cols() >= kParallelWork) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(g_threads)
    for (std::int64_t g = 0; g < n; ++g) segment_max_one(x, groups[g], g, out);
  } else {
    for (std::int64_t g = 0; g < n; ++g) segment_max_one(x, groups[g], g, out);
  }
  return out;
}

double ordered_sum(std::span<const double> terms) {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace boxgnn::kernels
