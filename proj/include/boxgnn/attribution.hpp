#pragma once

// Input x gradient attribution of fitness predictions to the KG edges that
// point at each gene, and edge-pair importance accumulation.

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "boxgnn/kg.hpp"
#include "boxgnn/predictor.hpp"

namespace boxgnn {

/// (subject, predicate) of an edge whose object is a gene.
struct EdgeKey {
  std::size_t subject = 0;
  std::size_t predicate = 0;
  auto operator<=>(const EdgeKey&) const = default;
};

struct EdgeScore {
  EdgeKey key;
  double score = 0.0;
};

struct PairAttribution {
  std::vector<EdgeScore> gene_a;  // sorted by key
  std::vector<EdgeScore> gene_b;
  double prediction = 0.0;
};

/// Ordered (gene_a side, gene_b side) key pairs.
using PairImportanceTable = std::map<std::pair<EdgeKey, EdgeKey>, double>;

/// Scores each edge (s, p, gene) by the sum over its first-layer message of
/// feature value times the gradient of the prediction.
PairAttribution input_x_gradient(const FitnessModel& m, const KnowledgeGraph& g, const GnnIndex& idx,
                                 std::size_t gene_a, std::size_t gene_b);

/// Adds l1 * l2 for every cross pair of the two sides' scores.
void accumulate_pair(PairImportanceTable& table, const PairAttribution& a);

/// Attributes every pair and accumulates in a fixed order, independent of the
/// order of `pairs`. Pairs are read with the lower class index as gene_a.
PairImportanceTable accumulate_pair_importances(const FitnessModel& m, const KnowledgeGraph& g,
                                                std::vector<std::pair<std::size_t, std::size_t>> pairs);

/// Keeps entries where a key's predicate is allowed or a key's subject lies
/// beneath (or is) an allowed superclass.
PairImportanceTable filter_importances(const PairImportanceTable& table, const std::set<std::size_t>& allow_predicates,
                                       const std::set<std::size_t>& allow_superclasses, const KnowledgeGraph& g);

struct RankedPair {
  EdgeKey first;
  EdgeKey second;
  double score = 0.0;
};

/// Sums (l1, l2) and (l2, l1), then sorts by descending score (ties by key).
std::vector<RankedPair> symmetrized_ranking(const PairImportanceTable& table);

/// `rank<TAB>score<TAB>pred1<TAB>class1<TAB>pred2<TAB>class2` lines with a
/// header; top_k = 0 keeps all.
std::string format_importances(const std::vector<RankedPair>& ranking, const KnowledgeGraph& g, std::size_t top_k = 0);

}  // namespace boxgnn
