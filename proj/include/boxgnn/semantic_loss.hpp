#pragma once

// Inclusion and disjointness losses on boxes, volume regularizers, and their
// sum over GNN layers and KG domains.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/box.hpp"
#include "boxgnn/box_ops.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/rng.hpp"

namespace boxgnn {

enum class LossKind { Distance, Overlap };
enum class NormKind { L2, L1 };

LossKind parse_loss_kind(const std::string& s);
std::string to_string(LossKind k);

struct SemanticLossWeights {
  double alpha = 0.1;          // semantic loss weight (prediction task)
  double beta_neg = 0.05;      // negative-loss weight
  double gamma_random = 0.0;   // random-negative weight inside the negative loss
  double lambda_wd = 0.1;      // parameter L2 regularization
  double lambda_small = 0.0;   // small-box regularization
  double l0 = 1.0;             // small-box threshold
};

/// Clamp applied to the overlap ratio of the disjointness loss.
inline constexpr double kOverlapClampEps = 1e-7;

// Plain-double losses for a single pair (reference implementations).
double loss_distance_pos(const Box& c, const Box& d, NormKind norm = NormKind::L2);
double loss_distance_neg(const Box& c, const Box& d, NormKind norm = NormKind::L2);
/// Hard mode (nullopt temperature) returns +infinity for an empty intersection.
double loss_overlap_pos(const Box& c, const Box& d, std::optional<GumbelTemp> t);
double loss_overlap_neg(const Box& c, const Box& d, std::optional<GumbelTemp> t);
double reg_big_box(const Box& b);
/// Throws std::domain_error on a non-positive side.
double reg_small_box(const Box& b, double l0);

// Batched differentiable losses; each returns count x 1.
ad::Var loss_distance_pos(const BoxBatch& c, const BoxBatch& d, NormKind norm = NormKind::L2);
/// The all-dimensions-overlap indicator is a constant factor (no gradient).
ad::Var loss_distance_neg(const BoxBatch& c, const BoxBatch& d, NormKind norm = NormKind::L2);
ad::Var loss_overlap_pos(const BoxBatch& c, const BoxBatch& d, VolumeMode mode);
ad::Var loss_overlap_neg(const BoxBatch& c, const BoxBatch& d, VolumeMode mode);
ad::Var reg_big_box(const BoxBatch& b);
ad::Var reg_small_box(const BoxBatch& b, double l0);

/// Pairs of classes of one domain, as positions within the domain.
struct PairList {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  std::size_t size() const { return first.size(); }
  void push(std::size_t a, std::size_t b) {
    first.push_back(a);
    second.push_back(b);
  }
};

struct DomainPairs {
  std::size_t domain = 0;
  std::size_t num_classes = 0;
  PairList positives;  // (sub, super)
  PairList disjoint;   // from disjointness axioms
  PairList random;     // sampled negatives
};

struct NegativeSampling {
  double ratio = 2.0;
  /// Also exclude descendants of c (a subclass cannot be disjoint from c).
  bool exclude_descendants = true;
};

/// Positive pairs (direct or transitive) and disjointness pairs of the
/// selected domains. Random negatives are left empty.
std::vector<DomainPairs> hierarchy_pairs(const KnowledgeGraph& g, const std::vector<std::size_t>& domains,
                                         bool transitive);

/// Fills `random` with round(ratio) negatives per positive example.
/// Classes whose admissible complement is empty get no negatives.
void resample_random_negatives(const KnowledgeGraph& g, std::vector<DomainPairs>& pairs,
                               const NegativeSampling& sampling,
                               const std::vector<std::vector<std::size_t>>& ancestor_table,
                               const std::vector<std::vector<std::size_t>>& descendant_table, Rng& rng);

struct SemanticLossSpec {
  LossKind kind = LossKind::Distance;
  VolumeMode volume = VolumeMode::smoothed(0.25);
  NormKind norm = NormKind::L2;
  double beta_neg = 0.05;
  double gamma_random = 0.0;
};

/// Unweighted sums for one (layer, domain) cell, for metrics.
struct SemanticTerm {
  std::size_t layer = 0;
  std::size_t domain = 0;
  std::size_t num_classes = 0;
  std::size_t num_positive = 0;
  double positive = 0.0;
  double negative = 0.0;  // disjoint + gamma * random
};

struct SemanticLoss {
  ad::Var total;
  std::vector<SemanticTerm> terms;
};

/// Sum over layers and listed domains of positive losses plus
/// beta_neg * (disjoint + gamma_random * random) negative losses.
/// boxes[layer][domain]; throws DataError when a pair names a missing box.
SemanticLoss semantic_loss_total(ad::Tape& tape, const std::vector<std::vector<BoxBatch>>& boxes,
                                 const std::vector<std::size_t>& layers, const std::vector<DomainPairs>& pairs,
                                 const SemanticLossSpec& spec);

}  // namespace boxgnn
