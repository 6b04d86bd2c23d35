#pragma once

// Axis-aligned boxes on plain doubles. These are the reference geometry; the
// batched differentiable versions in box_ops.hpp are tested against them.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace boxgnn {

/// Latent box parameters: lower corners and pre-softplus widths.
struct BoxLatent {
  std::vector<double> theta_z;
  std::vector<double> theta_Z;
};

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  /// Same length, finite, and upper > lower in every dimension.
  bool is_proper() const;
  bool operator==(const Box&) const = default;
};

/// Smoothing temperature of Gumbel boxes.
struct GumbelTemp {
  double beta = 0.25;
  explicit GumbelTemp(double b);
};

/// z = theta_z, Z = z + softplus(theta_Z).
Box make_box(const BoxLatent& latent);

struct CenterOffset {
  std::vector<double> center;
  std::vector<double> offset;
};
CenterOffset center_offset(const Box& b);

/// Per-dimension |c_C - c_D| - o_C - o_D. Negative iff the intervals overlap.
std::vector<double> box_distance(const Box& c, const Box& d);

/// Interval-wise intersection; nullopt is the empty marker.
std::optional<Box> intersect(const Box& a, const Box& b);
/// Corners (max of lowers, min of uppers) without the emptiness test. Sides
/// may be non-positive; used with Gumbel volumes.
Box intersection_corners(const Box& a, const Box& b);

double hard_volume(const Box& b);
double hard_volume(const std::optional<Box>& b);
/// Product over dimensions of beta * softplus(side / beta).
double gumbel_volume(const Box& b, GumbelTemp t);

/// Export row: class, domain, layer, lower corners, upper corners.
struct BoxRow {
  std::string class_id;
  std::string domain;
  std::size_t layer = 0;
  Box box;
  bool operator==(const BoxRow&) const = default;
};
std::string format_box_row(const BoxRow& row);
std::vector<BoxRow> parse_box_rows(std::string_view text);

}  // namespace boxgnn
