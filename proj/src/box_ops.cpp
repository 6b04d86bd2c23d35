#include "boxgnn/box_ops.hpp"

#include <cmath>

namespace boxgnn {

BoxBatch boxes_from_latents(ad::Var latents) {
  const std::size_t w = latents.cols();
  if (w == 0 || w % 2 != 0) {
    throw ShapeError("box latents need an even, non-zero width; got " + std::to_string(w));
  }
  const std::size_t n = w / 2;
  auto lower = ad::slice(latents, 0, n);
  auto upper = ad::add(lower, ad::softplus(ad::slice(latents, n, w)));
  return {lower, upper};
}

BoxBatch gather(const BoxBatch& b, const std::vector<std::size_t>& rows) {
  return {ad::gather_rows(b.lower, rows), ad::gather_rows(b.upper, rows)};
}

ad::Var centers(const BoxBatch& b) { return ad::scale(ad::add(b.lower, b.upper), 0.5); }

ad::Var offsets(const BoxBatch& b) { return ad::sub(b.upper, centers(b)); }

ad::Var distance(const BoxBatch& c, const BoxBatch& d) {
  if (c.count() != d.count() || c.dim() != d.dim()) {
    throw ShapeError("box distance: batch shapes differ");
  }
  auto gap = ad::abs(ad::sub(centers(c), centers(d)));
  return ad::sub(gap, ad::add(offsets(c), offsets(d)));
}

BoxBatch intersection(const BoxBatch& a, const BoxBatch& b) {
  return {ad::maximum(a.lower, b.lower), ad::minimum(a.upper, b.upper)};
}

ad::Var log_sides(const BoxBatch& b, VolumeMode mode) {
  auto side = ad::sub(b.upper, b.lower);
  if (!mode.gumbel) return ad::log(side);
  const double beta = mode.beta;
  // log(beta * softplus(side / beta))
  return ad::add_scalar(ad::log_softplus(ad::scale(side, 1.0 / beta)), std::log(beta));
}

ad::Var log_volume(const BoxBatch& b, VolumeMode mode) { return ad::sum_cols(log_sides(b, mode)); }

std::vector<Box> to_boxes(const BoxBatch& b) {
  const Tensor& lo = b.lower.value();
  const Tensor& hi = b.upper.value();
  std::vector<Box> out(lo.rows());
  for (std::size_t r = 0; r < lo.rows(); ++r) {
    out[r].lower.assign(lo.row_span(r).begin(), lo.row_span(r).end());
    out[r].upper.assign(hi.row_span(r).begin(), hi.row_span(r).end());
  }
  return out;
}

}  // namespace boxgnn
