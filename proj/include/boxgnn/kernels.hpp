#pragma once

// Dense inner loops used by the autodiff engine. Each kernel has a serial
// reference and an OpenMP version. Both compute every output element with the
// same sequential inner loop, so their results are bit-identical and the
// parallel path never changes numerics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "boxgnn/tensor.hpp"

namespace boxgnn::kernels {

enum class Exec { Serial, Parallel };

/// Thread count used by the dispatching kernels. 1 selects the serial path.
void set_num_threads(int n);
int num_threads();
Exec default_exec();

/// C = op(A) * op(B), where op transposes when the flag is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b, Exec exec);
Tensor matmul_serial(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor matmul_parallel(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

/// out.row(i) = x.row(index[i]).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index, Exec exec);

/// out.row(index[i]) += x.row(i), out has `n_rows` rows. Serial in both modes:
/// the reduction order over i is fixed.
Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_rows);

/// Element-wise max over row groups. groups[g] lists rows of x; out.row(g)
/// holds the column-wise max and argmax[g*cols + c] the winning row (lowest
/// index on ties). Every group must be non-empty.
struct SegmentMax {
  Tensor value;
  std::vector<std::size_t> argmax;
};
SegmentMax segment_max_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups,
                            Exec exec);

/// Deterministic sum of per-item terms: parallel evaluation, fixed-order reduction.
double ordered_sum(std::span<const double> terms);

}  // namespace boxgnn::kernels
