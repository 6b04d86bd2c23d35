#pragma once

// Synthetic knowledge graphs with a known fitness function, used for the
// end-to-end fixtures.

#include <cstddef>
#include <cstdint>
#include <string>

#include "boxgnn/kg.hpp"

namespace boxgnn {

/// Genes sit under gene categories; traits form root -> groups -> leaves.
/// Every gene has `traits_per_gene` hasTrait edges to leaves drawn from one
/// group. Fitness of a pair is
///   1 - same_group_penalty * [same group] - same_leaf_penalty * (shared leaves)
/// plus optional uniform noise in [-noise, noise].
struct SyntheticSpec {
  std::size_t genes = 48;
  std::size_t gene_categories = 3;
  std::size_t trait_groups = 4;
  std::size_t leaves_per_group = 6;
  std::size_t traits_per_gene = 1;
  double same_group_penalty = 0.6;
  double same_leaf_penalty = 0.0;
  double noise = 0.0;
  bool sibling_disjointness = true;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  KnowledgeGraph graph;
  FitnessDataset fitness;
  std::size_t gene_domain = 0;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// `domains` domains, each root -> `children` -> `grandchildren` per child,
/// with sibling disjointness and one random `linkedTo` edge from every class
/// of a domain to a class of the next domain.
KnowledgeGraph hierarchy_fixture(std::size_t domains, std::size_t children, std::size_t grandchildren,
                                 std::uint64_t seed);

/// `gene_a<TAB>gene_b<TAB>fitness` lines.
std::string fitness_text(const FitnessDataset& d, const KnowledgeGraph& g);

}  // namespace boxgnn
