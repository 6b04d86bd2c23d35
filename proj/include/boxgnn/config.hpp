#pragma once

// Run configuration: a strict JSON document. Unknown keys, wrong types and
// out-of-range values raise ConfigError naming the offending key.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boxgnn/embed_trainer.hpp"
#include "boxgnn/gnn.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/link_eval.hpp"
#include "boxgnn/predictor.hpp"
#include "boxgnn/synthetic.hpp"
#include "json.hpp"

namespace boxgnn {

namespace fs = std::filesystem;

struct GraphConfig {
  fs::path axioms = "axioms.tsv";
  fs::path domains = "domains.tsv";
  std::size_t min_edge_count = 1;
  bool add_reverse = true;
  /// Roots whose children (and their subtrees) are made mutually disjoint.
  std::vector<std::string> sibling_disjointness;
};

enum class PriorMode { Random, Frozen, FineTune };
PriorMode parse_prior_mode(const std::string& s);
std::string to_string(PriorMode m);

struct FitnessSection {
  TrainConfig train;
  CombinerKind combiner = CombinerKind::Product;
  std::vector<std::size_t> hidden = {64};
  /// Domain names receiving the semantic loss; unset means all but the gene domain.
  std::optional<std::vector<std::string>> semantic_domains;
  PriorMode prior_mode = PriorMode::Random;
  std::optional<fs::path> prior_checkpoint;
};

struct JointSection {
  JointTrainConfig train;
  LossKind loss = LossKind::Distance;
  std::vector<std::string> domains;
  double test_fraction = 0.2;
};

struct AttributionSection {
  std::optional<fs::path> pairs;
  std::vector<std::string> allow_predicates;
  std::vector<std::string> allow_superclasses;
  std::size_t top_k = 0;
};

struct LinkEvalSection {
  DisplacementMode mode = DisplacementMode::Corner;
};

struct RunConfig {
  fs::path base_dir = ".";
  GraphConfig graph;
  std::optional<fs::path> fitness;
  std::string gene_domain = "gene";
  fs::path output = "out";
  std::optional<fs::path> checkpoint;
  std::uint64_t seed = 0;
  int jobs = 1;
  DomainDims default_dims{5, 32};
  std::map<std::string, DomainDims> domain_dims;
  std::size_t depth = 2;
  PriorTrainConfig priors;
  std::map<std::string, PriorTrainConfig> prior_overrides;
  FitnessSection fitness_training;
  JointSection joint;
  AttributionSection attribution;
  LinkEvalSection link_eval;
  SyntheticSpec synthetic;

  fs::path resolve(const fs::path& p) const;
};

/// Parses and validates; relative paths are resolved against base_dir.
RunConfig parse_config(std::string_view json_text, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

/// Complete snapshot with every default filled in; parse_config() inverts it.
nlohmann::json config_to_json(const RunConfig& c);

/// Graph preprocessing shared by all commands: rare-relation filter, removal
/// of held-out edges, reverse edges, sibling disjointness.
KnowledgeGraph prepare_graph(const KnowledgeGraph& raw, const RunConfig& c, const std::vector<Edge>& held_out = {});

/// Per-domain dimensions of g; throws ConfigError for dimension keys naming
/// unknown domains.
std::vector<DomainDims> resolve_dims(const RunConfig& c, const KnowledgeGraph& g);
/// Domain index by name; throws ConfigError naming `key` when unknown.
std::size_t resolve_domain(const KnowledgeGraph& g, const std::string& name, const std::string& key);

}  // namespace boxgnn
