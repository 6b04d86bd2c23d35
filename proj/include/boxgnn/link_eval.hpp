#pragma once

// Ranking of candidate edge additions by how far they move the GNN's box
// embeddings, against class-constrained and random baselines.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "boxgnn/gnn.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/mann_whitney.hpp"
#include "boxgnn/params.hpp"

namespace boxgnn {

/// BoxDistance: mean over nodes and dimensions of |d(B, B') - d(B, B)| with d
/// the per-dimension box distance. Corner: mean of |dz| + |dZ|.
enum class DisplacementMode { BoxDistance, Corner };
DisplacementMode parse_displacement_mode(const std::string& s);
std::string to_string(DisplacementMode m);

enum class BaselineKind { Real, Constrained, Random };
std::string to_string(BaselineKind k);

/// Final-layer box corners of every domain.
struct FinalBoxes {
  std::vector<Tensor> lower;
  std::vector<Tensor> upper;
};

FinalBoxes final_boxes(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g);
double displacement(const FinalBoxes& before, const FinalBoxes& after, DisplacementMode mode);

/// Displacement caused by adding `edge` (and its reverse when `with_reverse`)
/// to g_train. Throws DataError for an unknown endpoint or relation.
double embedding_displacement(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g_train,
                              const FinalBoxes& before, const Edge& edge, DisplacementMode mode, bool with_reverse);

struct RevisionResult {
  Edge edge;
  BaselineKind kind = BaselineKind::Real;
  double distance = 0.0;
  std::size_t rank = 0;  // 1 = largest distance within (relation, kind)
};

struct RelationSummary {
  std::size_t relation = 0;
  std::size_t n_test = 0;
  double mean_real = 0.0;
  double mean_constrained = 0.0;
  double mean_random = 0.0;
  MannWhitneyResult real_vs_random;
  MannWhitneyResult real_vs_constrained;
};

struct LinkEvalReport {
  std::vector<RevisionResult> results;  // grouped by relation, then kind, then test order
  std::vector<RelationSummary> summary;
};

struct LinkEvalOptions {
  DisplacementMode mode = DisplacementMode::Corner;
  bool with_reverse = true;
  std::uint64_t seed = 0;
  std::size_t max_random_draws = 1000;
};

/// Same relation, endpoints drawn uniformly from the endpoint domains.
Edge constrained_baseline(const KnowledgeGraph& g, const Edge& e, Rng& rng);
/// Endpoints drawn uniformly over all nodes, relation uniform among the
/// allowed relations connecting their domains; redrawn when none exists.
Edge random_baseline(const KnowledgeGraph& g, const std::vector<std::size_t>& allowed_relations, Rng& rng,
                     std::size_t max_draws);

LinkEvalReport evaluate_revisions(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g_train,
                                  const std::vector<Edge>& test_edges, const LinkEvalOptions& opt);

/// `relation<TAB>kind<TAB>edge<TAB>distance`, edge as subject|relation|object.
std::string format_results(const LinkEvalReport& r, const KnowledgeGraph& g);
/// One row per relation with the columns of the per-edge-type results table.
std::string format_summary(const LinkEvalReport& r, const KnowledgeGraph& g);

}  // namespace boxgnn
