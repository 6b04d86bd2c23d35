#pragma once

// Heterogeneous GraphSAGE with max aggregation. Every relation with edges gets
// its own module per layer; a node's output is the mean over the relations
// that send it messages.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/box_ops.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/params.hpp"
#include "boxgnn/rng.hpp"

namespace boxgnn {

struct DomainDims {
  std::size_t prior_dim = 16;   // box dimension of the prior (latent width 2 * prior_dim)
  std::size_t gnn_width = 64;   // latent width of GNN layers; even
  bool operator==(const DomainDims&) const = default;
};

/// A module is keyed by its relation, or is the self-only module of a domain
/// that no relation targets.
struct ModuleKey {
  std::optional<std::size_t> relation;
  std::size_t source_domain = 0;
  std::size_t target_domain = 0;
  bool operator==(const ModuleKey&) const = default;
};

struct SageParams {
  std::size_t w_self = 0;
  std::optional<std::size_t> w_neigh;
  std::size_t bias = 0;
};

/// Message-passing structure of a graph for a fixed module layout.
struct GnnIndex {
  struct RelationEdges {
    std::vector<Edge> edges;                       // sorted
    std::vector<std::size_t> source_rows;          // per edge, local index of the subject
    std::vector<std::size_t> targets;              // sorted distinct local indices of objects
    std::vector<std::vector<std::size_t>> groups;  // per target, positions in `edges`
  };
  std::vector<RelationEdges> modules;              // aligned with HeteroGnn::modules()
  std::vector<std::vector<double>> relation_count; // [domain][node] relations with incoming edges
  std::vector<std::vector<std::size_t>> isolated;  // [domain] nodes without incoming edges
  std::vector<std::size_t> domain_sizes;
};

/// Per-edge messages (gathered source rows) of one module at layer 1.
struct EdgeMessages {
  std::size_t module = 0;
  const std::vector<Edge>* edges = nullptr;
  ad::Var rows;
};

struct GnnOutput {
  std::vector<std::vector<ad::Var>> layers;  // [layer 0..depth][domain]
  std::vector<EdgeMessages> first_layer_messages;
};

class HeteroGnn {
 public:
  HeteroGnn() = default;

  /// Builds modules for every relation with at least one edge in g plus
  /// self-only modules, and random priors. Parameters are appended to params.
  static HeteroGnn create(const KnowledgeGraph& g, std::size_t depth, std::vector<DomainDims> dims,
                          ParameterSet& params, Rng& rng);
  /// Rebinds an existing layout to parameters looked up by name.
  static HeteroGnn attach(const KnowledgeGraph& g, std::size_t depth, std::vector<DomainDims> dims,
                          std::vector<ModuleKey> modules, const ParameterSet& params);

  std::size_t depth() const { return depth_; }
  const std::vector<DomainDims>& dims() const { return dims_; }
  const std::vector<ModuleKey>& modules() const { return modules_; }
  /// Parameter index of domain d's prior latents (classes x 2 * prior_dim).
  std::size_t prior_param(std::size_t d) const { return priors_[d]; }
  /// Parameters of module m at layer l (1-based).
  const SageParams& module_params(std::size_t layer, std::size_t m) const { return params_[layer - 1][m]; }
  /// Latent width of domain d at layer l.
  std::size_t width(std::size_t layer, std::size_t d) const;

  /// Throws DataError when g has edges of a relation without a module.
  GnnIndex index(const KnowledgeGraph& g) const;

  GnnOutput forward(const std::vector<ad::Var>& bound, const GnnIndex& idx) const;
  /// One layer; messages, when given, receive the per-edge source rows.
  std::vector<ad::Var> forward_layer(std::size_t layer, const std::vector<ad::Var>& inputs,
                                     const std::vector<ad::Var>& bound, const GnnIndex& idx,
                                     std::vector<EdgeMessages>* messages = nullptr) const;

  /// Text form of a module key, resolvable by attach().
  static std::string key_string(const KnowledgeGraph& g, const ModuleKey& k);
  static ModuleKey parse_key(const KnowledgeGraph& g, const std::string& s);

  /// Names of weight matrices (excludes biases and priors).
  std::vector<std::size_t> weight_params() const;

 private:
  std::size_t depth_ = 0;
  std::vector<DomainDims> dims_;
  std::vector<ModuleKey> modules_;
  std::vector<std::vector<SageParams>> params_;  // [layer-1][module]
  std::vector<std::size_t> priors_;
};

/// Fan-based uniform initialization, U(-a, a) with a = sqrt(6 / (rows + cols)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
/// Prior latents: lower corners U[-1, 1], widths U[-1, 0].
Tensor random_prior_latents(std::size_t n, std::size_t dim, Rng& rng);

/// Latents of every domain at one layer as boxes.
std::vector<BoxBatch> boxes_at_layer(const std::vector<ad::Var>& latents);

}  // namespace boxgnn
