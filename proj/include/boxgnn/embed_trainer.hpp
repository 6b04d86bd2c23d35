#pragma once

// Training without a prediction task: shallow prior boxes per domain, and
// priors plus GNN trained jointly on the semantic losses alone.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "boxgnn/gnn.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/params.hpp"
#include "boxgnn/semantic_loss.hpp"
#include "boxgnn/tensor.hpp"

namespace boxgnn {

struct PriorTrainConfig {
  std::size_t dim = 10;
  std::size_t epochs = 1000;
  double lr = 1e-2;
  double reg_lambda = 1e-3;
  double gumbel_temp = 0.25;
  double neg_ratio = 2.0;
  LossKind loss_kind = LossKind::Overlap;
  bool transitive = false;
  bool exclude_descendants = true;
};

/// Mean losses per class of one (epoch, layer, domain) cell.
struct LossReport {
  std::size_t epoch = 0;
  std::size_t layer = 0;
  std::size_t domain = 0;
  double pos = 0.0;
  double neg = 0.0;
};

/// Trains box latents (classes x 2 * dim) for one domain. Throws DataError for
/// a domain without classes and DivergenceError on a non-finite loss.
Tensor train_priors(const KnowledgeGraph& g, std::size_t domain, const PriorTrainConfig& cfg, std::uint64_t seed,
                    std::vector<LossReport>* report = nullptr);

struct JointTrainConfig {
  std::size_t epochs = 500;
  double lr = 0.1;
  double lr_decay = 0.001;
  double reg_lambda = 0.001;
  double small_box_lambda = 0.01;
  double beta_neg = 0.5;
  double gamma_random = 1.0;
  double l0 = 1.0;
  double neg_ratio = 1.0;
  double gumbel_temp = 0.25;
  NormKind norm = NormKind::L2;
  bool include_prior_layer = true;
  bool exclude_descendants = true;
  /// Domains receiving losses; empty means every domain.
  std::vector<std::size_t> domains;
};

/// Minimizes L_pos + beta (L_neg_data + gamma L_neg_random) + lambda_s R_small
/// + lambda ||w||^2 over priors and GNN weights, with per-epoch lr decay.
void train_joint(const KnowledgeGraph& g, const HeteroGnn& gnn, ParameterSet& params, const JointTrainConfig& cfg,
                 LossKind kind, std::uint64_t seed, std::vector<LossReport>* report = nullptr);

/// Mean loss_distance_pos over the direct subclass pairs of the given
/// domains, at every layer of a forward pass.
double mean_positive_distance_loss(const KnowledgeGraph& g, const HeteroGnn& gnn, const ParameterSet& params,
                                   const std::vector<std::size_t>& domains, bool include_prior_layer);

/// Loss report lines `epoch<TAB>layer<TAB>domain<TAB>pos_loss<TAB>neg_loss`.
std::string format_loss_report(const std::vector<LossReport>& report, const KnowledgeGraph& g);

}  // namespace boxgnn
