#pragma once

// Knowledge graph in TBox form: classes (and nominals) partitioned into
// domains, existential-restriction edges between them, and per-domain
// subclass and disjointness axioms.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "boxgnn/rng.hpp"

namespace boxgnn {

inline constexpr std::string_view kSubClassOf = "subClassOf";
inline constexpr std::string_view kDisjointWith = "disjointWith";
inline constexpr std::string_view kReverseSuffix = "_rev";

struct Relation {
  std::string name;
  std::size_t source_domain = 0;
  std::size_t target_domain = 0;

  bool is_reverse() const;
  bool operator==(const Relation&) const = default;
};

/// Directed edge subject --relation--> object, by class and relation index.
struct Edge {
  std::size_t subject = 0;
  std::size_t relation = 0;
  std::size_t object = 0;
  auto operator<=>(const Edge&) const = default;
};

using ClassPair = std::pair<std::size_t, std::size_t>;

/// Immutable after build(); safe to share across threads.
class KnowledgeGraph {
 public:
  class Builder;

  std::size_t num_domains() const { return domains_.size(); }
  const std::string& domain_name(std::size_t d) const { return domains_[d]; }
  std::optional<std::size_t> find_domain(std::string_view name) const;

  std::size_t num_classes() const { return class_ids_.size(); }
  const std::string& class_id(std::size_t c) const { return class_ids_[c]; }
  std::optional<std::size_t> find_class(std::string_view id) const;
  std::size_t domain_of(std::size_t c) const { return class_domain_[c]; }
  /// Position of c among the classes of its domain.
  std::size_t local_index(std::size_t c) const { return class_local_[c]; }
  const std::vector<std::size_t>& classes_in(std::size_t d) const { return domain_classes_[d]; }

  const std::vector<Relation>& relations() const { return relations_; }
  std::optional<std::size_t> find_relation(std::string_view name, std::size_t source_domain,
                                           std::size_t target_domain) const;

  /// Sorted, duplicate-free.
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(const Edge& e) const;
  std::size_t edge_count(std::size_t relation) const;

  /// Direct (sub, super) pairs of domain d, sorted.
  const std::vector<ClassPair>& hierarchy(std::size_t d) const { return hierarchy_[d]; }
  /// Unordered disjoint pairs of domain d stored as (min, max), sorted.
  const std::vector<ClassPair>& disjoint(std::size_t d) const { return disjoint_[d]; }
  const std::vector<std::size_t>& parents(std::size_t c) const { return parents_[c]; }
  const std::vector<std::size_t>& children(std::size_t c) const { return children_[c]; }

  /// Text in the axiom / domain file formats; parse_graph() inverts these.
  std::string axiom_text() const;
  std::string domain_text() const;

  bool operator==(const KnowledgeGraph& o) const;

 private:
  std::vector<std::string> domains_;
  std::vector<std::string> class_ids_;
  std::vector<std::size_t> class_domain_;
  std::vector<std::size_t> class_local_;
  std::vector<std::vector<std::size_t>> domain_classes_;
  std::vector<Relation> relations_;
  std::vector<Edge> edges_;
  std::vector<std::vector<ClassPair>> hierarchy_;
  std::vector<std::vector<ClassPair>> disjoint_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::map<std::string, std::size_t, std::less<>> class_lookup_;
};

class KnowledgeGraph::Builder {
 public:
  Builder() = default;
  /// Starts from a copy of an existing graph.
  explicit Builder(const KnowledgeGraph& g);

  std::size_t add_domain(std::string_view name);
  std::size_t add_class(std::string_view id, std::size_t domain);
  std::size_t add_relation(std::string_view name, std::size_t source_domain, std::size_t target_domain);
  void add_edge(const Edge& e);
  void add_subclass(std::size_t sub, std::size_t super);
  void add_disjoint(std::size_t a, std::size_t b);

  template <class Pred>
  void remove_edges_if(Pred pred) {
    std::erase_if(edges_, pred);
  }

  std::optional<std::size_t> find_domain(std::string_view name) const;
  std::optional<std::size_t> find_class(std::string_view id) const;
  std::size_t domain_of(std::size_t c) const { return class_domain_[c]; }
  const std::vector<Relation>& relations() const { return relations_; }

  /// Validates every graph invariant; throws DataError on violation.
  KnowledgeGraph build() const;

 private:
  std::vector<std::string> domains_;
  std::vector<std::string> class_ids_;
  std::vector<std::size_t> class_domain_;
  std::vector<Relation> relations_;
  std::vector<Edge> edges_;
  std::vector<ClassPair> hierarchy_;
  std::vector<ClassPair> disjoint_;
  std::map<std::string, std::size_t, std::less<>> class_lookup_;
};

/// Parses the axiom and domain files. Errors (DataError) name the file and line.
KnowledgeGraph parse_graph(std::string_view axiom_text, std::string_view domain_text);

/// Adds (o, r_rev, s) for every edge (s, r, o) of a base relation. Idempotent.
KnowledgeGraph add_reverse_edges(const KnowledgeGraph& g);

/// Drops edges of relations with fewer than min_count edges. Declarations and
/// nodes are kept.
KnowledgeGraph filter_rare_relations(const KnowledgeGraph& g, std::size_t min_count);

/// Reflexive-transitive closure of the subclass relation, sorted.
std::vector<std::size_t> ancestors(const KnowledgeGraph& g, std::size_t c);
/// All strict and non-strict subclasses of c, sorted.
std::vector<std::size_t> descendants(const KnowledgeGraph& g, std::size_t c);
/// ancestors() for every class, indexed by class.
std::vector<std::vector<std::size_t>> ancestor_table(const KnowledgeGraph& g);

/// round(ratio) classes from c's domain outside ancestors(c), uniform with
/// replacement. Throws DataError when the complement is empty.
std::vector<std::size_t> sample_negatives(const KnowledgeGraph& g, std::size_t c, double ratio,
                                          std::uint64_t seed);
std::vector<std::size_t> sample_negatives(const KnowledgeGraph& g, std::size_t c, double ratio,
                                          const std::vector<std::size_t>& sorted_ancestors, Rng& rng);

/// Disjointness among the direct children of `root` and between each child
/// and every subclass of its siblings.
KnowledgeGraph augment_sibling_disjointness(const KnowledgeGraph& g, std::size_t root);

/// 80:20-style split stratified by base relation: round(fraction * count)
/// edges of each relation go to the test list.
struct EdgeSplit {
  KnowledgeGraph train;
  std::vector<Edge> test;
};
EdgeSplit split_edges_stratified(const KnowledgeGraph& g, double test_fraction, std::uint64_t seed);

/// Copy of g with extra edges (and their reverses when `with_reverse`).
KnowledgeGraph with_edges(const KnowledgeGraph& g, const std::vector<Edge>& extra, bool with_reverse);

// ---------------------------------------------------------------------------
// Fitness data

struct FitnessRecord {
  std::size_t gene_a = 0;  // lexicographically smaller class id
  std::size_t gene_b = 0;
  double fitness = 0.0;
  bool operator==(const FitnessRecord&) const = default;
};

struct FitnessDataset {
  std::vector<FitnessRecord> records;
  bool operator==(const FitnessDataset&) const = default;
};

/// Parses `gene_a<TAB>gene_b<TAB>fitness` lines; pairs are canonicalized.
FitnessDataset parse_fitness(std::string_view text, const KnowledgeGraph& g, std::size_t gene_domain);
/// Builds a record with canonical gene order.
FitnessRecord make_fitness_record(const KnowledgeGraph& g, std::size_t a, std::size_t b, double fitness);

struct FoldSplit {
  FitnessDataset train;
  FitnessDataset valid;
  std::vector<std::size_t> train_genes;
  std::vector<std::size_t> valid_genes;
};

/// Gene-disjoint cross-validation. Genes are shuffled by seed and dealt into
/// `folds` sets; fold k validates on set k. Mixed pairs are discarded.
std::vector<FoldSplit> split_by_genes(const FitnessDataset& d, std::size_t folds, std::uint64_t seed);
/// Same, with the gene partition given explicitly.
std::vector<FoldSplit> split_with_partition(const FitnessDataset& d,
                                            const std::vector<std::vector<std::size_t>>& gene_sets);

}  // namespace boxgnn
