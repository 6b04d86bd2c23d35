#include "boxgnn/box.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boxgnn/errors.hpp"
#include "boxgnn/tensor.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

namespace {

void require_same_dim(const Box& a, const Box& b, const char* op) {
  if (a.dim() != b.dim() || a.upper.size() != a.lower.size() || b.upper.size() != b.lower.size()) {
    throw ShapeError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
}

}  // namespace

bool Box::is_proper() const {
  if (lower.size() != upper.size() || lower.empty()) return false;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(upper[i] > lower[i])) return false;
  }
  return true;
}

GumbelTemp::GumbelTemp(double b) : beta(b) {
  if (!(b > 0)) throw std::invalid_argument("Gumbel temperature must be positive");
}

Box make_box(const BoxLatent& latent) {
  if (latent.theta_z.size() != latent.theta_Z.size() || latent.theta_z.empty()) {
    throw ShapeError("make_box: latent halves must have equal non-zero length");
  }
  Box b{latent.theta_z, latent.theta_z};
  for (std::size_t i = 0; i < b.dim(); ++i) {
    const double z = b.lower[i];
    // floor at the smallest representable side
    b.upper[i] = std::max(z + softplus(latent.theta_Z[i]), std::nextafter(z, INFINITY));
  }
  return b;
}

CenterOffset center_offset(const Box& b) {
  CenterOffset co{std::vector<double>(b.dim()), std::vector<double>(b.dim())};
  for (std::size_t i = 0; i < b.dim(); ++i) {
    co.center[i] = (b.lower[i] + b.upper[i]) / 2.0;
    co.offset[i] = b.upper[i] - co.center[i];
  }
  return co;
}

std::vector<double> box_distance(const Box& c, const Box& d) {
  require_same_dim(c, d, "box_distance");
  const auto cc = center_offset(c);
  const auto cd = center_offset(d);
  std::vector<double> out(c.dim());
  for (std::size_t i = 0; i < c.dim(); ++i) {
    out[i] = std::abs(cc.center[i] - cd.center[i]) - (cc.offset[i] + cd.offset[i]);
  }
  return out;
}

Box intersection_corners(const Box& a, const Box& b) {
  require_same_dim(a, b, "intersect");
  Box out{a.lower, a.upper};
  for (std::size_t i = 0; i < a.dim(); ++i) {
    out.lower[i] = std::max(a.lower[i], b.lower[i]);
    out.upper[i] = std::min(a.upper[i], b.upper[i]);
  }
  return out;
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  Box out = intersection_corners(a, b);
  for (std::size_t i = 0; i < out.dim(); ++i) {
    if (out.upper[i] <= out.lower[i]) return std::nullopt;
  }
  return out;
}

double hard_volume(const Box& b) {
  double v = 1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) v *= std::max(0.0, b.upper[i] - b.lower[i]);
  return v;
}

double hard_volume(const std::optional<Box>& b) { return b ? hard_volume(*b) : 0.0; }

double gumbel_volume(const Box& b, GumbelTemp t) {
  double v = 1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) v *= t.beta * softplus((b.upper[i] - b.lower[i]) / t.beta);
  return v;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += tsv::format_double(v[i]);
  }
  return s;
}

std::vector<double> parse_list(std::string_view s, const std::string& where) {
  std::vector<double> out;
  for (auto tok : tsv::split(s, ',')) out.push_back(tsv::parse_double(tok, where));
  return out;
}

}  // namespace

std::string format_box_row(const BoxRow& row) {
  return row.class_id + "\t" + row.domain + "\t" + std::to_string(row.layer) + "\t" + join(row.box.lower) +
         "\t" + join(row.box.upper);
}

std::vector<BoxRow> parse_box_rows(std::string_view text) {
  std::vector<BoxRow> rows;
  tsv::for_each_record(text, [&](std::size_t line, std::string_view l) {
    const std::string where = "box file line " + std::to_string(line);
    const auto f = tsv::split(l);
    if (f.size() != 5) throw DataError(where + ": expected 5 tab-separated fields");
    BoxRow r;
    r.class_id = std::string(f[0]);
    r.domain = std::string(f[1]);
    r.layer = static_cast<std::size_t>(tsv::parse_int(f[2], where));
    r.box.lower = parse_list(f[3], where);
    r.box.upper = parse_list(f[4], where);
    if (r.box.lower.size() != r.box.upper.size()) throw DataError(where + ": corner length mismatch");
    rows.push_back(std::move(r));
  });
  return rows;
}

}  // namespace boxgnn
