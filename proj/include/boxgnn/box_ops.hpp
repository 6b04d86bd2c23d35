#pragma once

// Differentiable, batched box geometry. Row i of `lower`/`upper` is box i.

#include <cstddef>
#include <vector>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/box.hpp"

namespace boxgnn {

struct BoxBatch {
  ad::Var lower;
  ad::Var upper;

  std::size_t count() const { return lower.rows(); }
  std::size_t dim() const { return lower.cols(); }
};

/// Hard volumes, or Gumbel-smoothed volumes at temperature beta.
struct VolumeMode {
  bool gumbel = true;
  double beta = 0.25;

  static VolumeMode hard() { return {false, 0.0}; }
  static VolumeMode smoothed(double beta) { return {true, GumbelTemp(beta).beta}; }
};

/// Latent rows of width 2n: first half lower corners, second half widths.
/// Throws ShapeError on odd width.
BoxBatch boxes_from_latents(ad::Var latents);

BoxBatch gather(const BoxBatch& b, const std::vector<std::size_t>& rows);

ad::Var centers(const BoxBatch& b);
ad::Var offsets(const BoxBatch& b);
/// Per-dimension distance between paired rows (count x dim).
ad::Var distance(const BoxBatch& c, const BoxBatch& d);
/// Max of lowers, min of uppers; rows may be empty boxes.
BoxBatch intersection(const BoxBatch& a, const BoxBatch& b);
/// Per-dimension log side lengths (count x dim).
ad::Var log_sides(const BoxBatch& b, VolumeMode mode);
/// Per-row log volume (count x 1). Hard mode throws std::domain_error on a
/// non-positive side.
ad::Var log_volume(const BoxBatch& b, VolumeMode mode);

/// Current values as plain boxes.
std::vector<Box> to_boxes(const BoxBatch& b);

}  // namespace boxgnn
