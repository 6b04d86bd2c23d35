#include "boxgnn/semantic_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "boxgnn/errors.hpp"
#include "boxgnn/tensor.hpp"

namespace boxgnn {

LossKind parse_loss_kind(const std::string& s) {
  if (s == "distance") return LossKind::Distance;
  if (s == "overlap") return LossKind::Overlap;
  throw ConfigError("unknown loss kind '" + s + "' (expected distance or overlap)");
}

std::string to_string(LossKind k) { return k == LossKind::Distance ? "distance" : "overlap"; }

namespace {

void require_dims(const Box& c, const Box& d) {
  if (c.dim() != d.dim()) {
    throw ShapeError("box dimensions differ: " + std::to_string(c.dim()) + " vs " + std::to_string(d.dim()));
  }
}

double norm_of(const std::vector<double>& v, NormKind norm) {
  double s = 0.0;
  if (norm == NormKind::L1) {
    for (double x : v) s += std::abs(x);
    return s;
  }
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double volume_of(const Box& b, std::optional<GumbelTemp> t) {
  return t ? gumbel_volume(b, *t) : hard_volume(b);
}

}  // namespace

double loss_distance_pos(const Box& c, const Box& d, NormKind norm) {
  require_dims(c, d);
  const auto dist = box_distance(c, d);
  std::vector<double> v(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double oc = 0.5 * (c.upper[i] - c.lower[i]);
    v[i] = std::max(0.0, dist[i] + 2.0 * oc);
  }
  return norm_of(v, norm);
}

double loss_distance_neg(const Box& c, const Box& d, NormKind norm) {
  require_dims(c, d);
  const auto dist = box_distance(c, d);
  std::vector<double> v(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!(dist[i] < 0.0)) return 0.0;
    v[i] = -dist[i];
  }
  return norm_of(v, norm);
}

double loss_overlap_pos(const Box& c, const Box& d, std::optional<GumbelTemp> t) {
  require_dims(c, d);
  double inter;
  if (t) {
    inter = gumbel_volume(intersection_corners(c, d), *t);
  } else {
    inter = hard_volume(intersect(c, d));
    if (inter <= 0.0) return std::numeric_limits<double>::infinity();
  }
  return -std::log(inter / volume_of(c, t));
}

double loss_overlap_neg(const Box& c, const Box& d, std::optional<GumbelTemp> t) {
  require_dims(c, d);
  const double inter = t ? gumbel_volume(intersection_corners(c, d), *t) : hard_volume(intersect(c, d));
  const double ratio = std::min(inter / std::min(volume_of(c, t), volume_of(d, t)), 1.0 - kOverlapClampEps);
  return -std::log(1.0 - ratio);
}

double reg_big_box(const Box& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    const double side = b.upper[i] - b.lower[i];
    s += side * side;
  }
  return s;
}

double reg_small_box(const Box& b, double l0) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    const double side = b.upper[i] - b.lower[i];
    if (!(side > 0.0)) throw std::domain_error("reg_small_box: non-positive side");
    s += std::max(0.0, 1.0 / side - l0);
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

ad::Var row_norm_of(ad::Var v, NormKind norm) {
  return norm == NormKind::L2 ? ad::row_norm(v) : ad::sum_cols(ad::abs(v));
}

ad::Var sides(const BoxBatch& b) { return ad::sub(b.upper, b.lower); }

ad::Var hard_volume_of(const BoxBatch& b) { return ad::prod_cols(ad::relu(sides(b))); }

}  // namespace

ad::Var loss_distance_pos(const BoxBatch& c, const BoxBatch& d, NormKind norm) {
  auto v = ad::add(distance(c, d), ad::scale(offsets(c), 2.0));
  return row_norm_of(ad::relu(v), norm);
}

ad::Var loss_distance_neg(const BoxBatch& c, const BoxBatch& d, NormKind norm) {
  auto dist = distance(c, d);
  const Tensor& dv = dist.value();
  Tensor indicator(dv.rows(), 1, 1.0);
  for (std::size_t r = 0; r < dv.rows(); ++r) {
    for (double x : dv.row_span(r)) {
      if (!(x < 0.0)) {
        indicator(r, 0) = 0.0;
        break;
      }
    }
  }
  auto n = row_norm_of(ad::relu(ad::neg(dist)), norm);
  return ad::mul(n, dist.tape->constant(std::move(indicator)));
}

ad::Var loss_overlap_pos(const BoxBatch& c, const BoxBatch& d, VolumeMode mode) {
  auto inter = intersection(c, d);
  return ad::sum_cols(ad::sub(log_sides(c, mode), log_sides(inter, mode)));
}

ad::Var loss_overlap_neg(const BoxBatch& c, const BoxBatch& d, VolumeMode mode) {
  auto inter = intersection(c, d);
  ad::Var ratio;
  if (mode.gumbel) {
    auto log_min = ad::minimum(log_volume(c, mode), log_volume(d, mode));
    ratio = ad::exp(ad::sub(log_volume(inter, mode), log_min));
  } else {
    auto vmin = ad::minimum(hard_volume_of(c), hard_volume_of(d));
    ratio = ad::div(hard_volume_of(inter), vmin);
  }
  auto cap = ratio.tape->constant(Tensor(ratio.rows(), 1, 1.0 - kOverlapClampEps));
  auto clamped = ad::minimum(ratio, cap);
  return ad::neg(ad::log(ad::add_scalar(ad::neg(clamped), 1.0)));
}

ad::Var reg_big_box(const BoxBatch& b) { return ad::sum_cols(ad::square(sides(b))); }

ad::Var reg_small_box(const BoxBatch& b, double l0) {
  auto s = sides(b);
  for (double x : s.value().values()) {
    if (!(x > 0.0)) throw std::domain_error("reg_small_box: non-positive side");
  }
  auto ones = s.tape->constant(Tensor(s.rows(), s.cols(), 1.0));
  return ad::sum_cols(ad::relu(ad::add_scalar(ad::div(ones, s), -l0)));
}

// ---------------------------------------------------------------------------

std::vector<DomainPairs> hierarchy_pairs(const KnowledgeGraph& g, const std::vector<std::size_t>& domains,
                                         bool transitive) {
  std::vector<DomainPairs> out;
  for (std::size_t d : domains) {
    DomainPairs p;
    p.domain = d;
    p.num_classes = g.classes_in(d).size();
    if (transitive) {
      for (std::size_t c : g.classes_in(d)) {
        for (std::size_t a : ancestors(g, c)) {
          if (a != c) p.positives.push(g.local_index(c), g.local_index(a));
        }
      }
    } else {
      for (const auto& [sub, super] : g.hierarchy(d)) p.positives.push(g.local_index(sub), g.local_index(super));
    }
    for (const auto& [a, b] : g.disjoint(d)) p.disjoint.push(g.local_index(a), g.local_index(b));
    out.push_back(std::move(p));
  }
  return out;
}

void resample_random_negatives(const KnowledgeGraph& g, std::vector<DomainPairs>& pairs,
                               const NegativeSampling& sampling,
                               const std::vector<std::vector<std::size_t>>& ancestor_table,
                               const std::vector<std::vector<std::size_t>>& descendant_table, Rng& rng) {
  const auto draws = static_cast<std::size_t>(std::llround(sampling.ratio));
  for (auto& p : pairs) {
    p.random = {};
    if (draws == 0) continue;
    const auto& members = g.classes_in(p.domain);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < p.positives.size(); ++i) {
      const std::size_t c = members[p.positives.first[i]];
      const auto& anc = ancestor_table[c];
      candidates.clear();
      for (std::size_t x : members) {
        if (std::binary_search(anc.begin(), anc.end(), x)) continue;
        if (sampling.exclude_descendants &&
            std::binary_search(descendant_table[c].begin(), descendant_table[c].end(), x)) {
          continue;
        }
        candidates.push_back(x);
      }
      if (candidates.empty()) continue;
      for (std::size_t k = 0; k < draws; ++k) {
        p.random.push(p.positives.first[i], g.local_index(candidates[rng.below(candidates.size())]));
      }
    }
  }
}

namespace {

ad::Var pair_loss(LossKind kind, bool positive, const BoxBatch& c, const BoxBatch& d, const SemanticLossSpec& spec) {
  if (kind == LossKind::Distance) {
    return positive ? loss_distance_pos(c, d, spec.norm) : loss_distance_neg(c, d, spec.norm);
  }
  return positive ? loss_overlap_pos(c, d, spec.volume) : loss_overlap_neg(c, d, spec.volume);
}

void check_pairs(const PairList& p, std::size_t count, std::size_t domain, std::size_t layer) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.first[i] >= count || p.second[i] >= count) {
      throw DataError("semantic loss: missing box for a class of domain " + std::to_string(domain) + " at layer " +
                      std::to_string(layer));
    }
  }
}

}  // namespace

SemanticLoss semantic_loss_total(ad::Tape& tape, const std::vector<std::vector<BoxBatch>>& boxes,
                                 const std::vector<std::size_t>& layers, const std::vector<DomainPairs>& pairs,
                                 const SemanticLossSpec& spec) {
  SemanticLoss out;
  std::optional<ad::Var> total;
  auto add_to = [](std::optional<ad::Var>& acc, ad::Var v) { acc = acc ? ad::add(*acc, v) : v; };

  for (const auto& p : pairs) {
    std::optional<ad::Var> domain_total;
    for (std::size_t layer : layers) {
      if (layer >= boxes.size() || p.domain >= boxes[layer].size()) {
        throw DataError("semantic loss: no boxes for domain " + std::to_string(p.domain) + " at layer " +
                        std::to_string(layer));
      }
      const BoxBatch& b = boxes[layer][p.domain];
      check_pairs(p.positives, b.count(), p.domain, layer);
      check_pairs(p.disjoint, b.count(), p.domain, layer);
      check_pairs(p.random, b.count(), p.domain, layer);

      SemanticTerm term;
      term.layer = layer;
      term.domain = p.domain;
      term.num_classes = p.num_classes;
      term.num_positive = p.positives.size();

      std::optional<ad::Var> cell;
      if (p.positives.size() > 0) {
        auto l = ad::sum(pair_loss(spec.kind, true, gather(b, p.positives.first), gather(b, p.positives.second), spec));
        term.positive = l.value().item();
        add_to(cell, l);
      }
      std::optional<ad::Var> negative;
      if (p.disjoint.size() > 0) {
        auto l = ad::sum(pair_loss(spec.kind, false, gather(b, p.disjoint.first), gather(b, p.disjoint.second), spec));
        add_to(negative, l);
      }
      if (p.random.size() > 0 && spec.gamma_random > 0.0) {
        auto l = ad::sum(pair_loss(spec.kind, false, gather(b, p.random.first), gather(b, p.random.second), spec));
        add_to(negative, ad::scale(l, spec.gamma_random));
      }
      if (negative) {
        term.negative = negative->value().item();
        add_to(cell, ad::scale(*negative, spec.beta_neg));
      }
      if (cell) add_to(domain_total, *cell);
      out.terms.push_back(term);
    }
    if (domain_total) add_to(total, *domain_total);
  }
  out.total = total ? *total : tape.constant(Tensor::scalar(0.0));
  return out;
}

}  // namespace boxgnn
