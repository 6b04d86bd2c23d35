#include "boxgnn/kg.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

bool Relation::is_reverse() const { return name.ends_with(kReverseSuffix); }

// ---------------------------------------------------------------------------
// KnowledgeGraph

std::optional<std::size_t> KnowledgeGraph::find_domain(std::string_view name) const {
  for (std::size_t d = 0; d < domains_.size(); ++d)
    if (domains_[d] == name) return d;
  return std::nullopt;
}

std::optional<std::size_t> KnowledgeGraph::find_class(std::string_view id) const {
  auto it = class_lookup_.find(id);
  if (it == class_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> KnowledgeGraph::find_relation(std::string_view name, std::size_t src,
                                                         std::size_t dst) const {
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& rel = relations_[r];
    if (rel.name == name && rel.source_domain == src && rel.target_domain == dst) return r;
  }
  return std::nullopt;
}

bool KnowledgeGraph::has_edge(const Edge& e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

std::size_t KnowledgeGraph::edge_count(std::size_t relation) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.relation == relation; }));
}

std::string KnowledgeGraph::domain_text() const {
  std::string out;
  for (std::size_t c = 0; c < class_ids_.size(); ++c) {
    out += class_ids_[c] + "\t" + domains_[class_domain_[c]] + "\n";
  }
  for (const auto& r : relations_) {
    out += "@rel\t" + r.name + "\t" + domains_[r.source_domain] + "\t" + domains_[r.target_domain] + "\n";
  }
  return out;
}

std::string KnowledgeGraph::axiom_text() const {
  std::string out;
  for (std::size_t d = 0; d < domains_.size(); ++d) {
    for (const auto& [sub, super] : hierarchy_[d]) {
      out += class_ids_[sub] + "\t" + std::string(kSubClassOf) + "\t" + class_ids_[super] + "\n";
    }
    for (const auto& [a, b] : disjoint_[d]) {
      out += class_ids_[a] + "\t" + std::string(kDisjointWith) + "\t" + class_ids_[b] + "\n";
    }
  }
  for (const auto& e : edges_) {
    out += class_ids_[e.subject] + "\t" + relations_[e.relation].name + "\t" + class_ids_[e.object] + "\n";
  }
  return out;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& o) const {
  return domains_ == o.domains_ && class_ids_ == o.class_ids_ && class_domain_ == o.class_domain_ &&
         relations_ == o.relations_ && edges_ == o.edges_ && hierarchy_ == o.hierarchy_ &&
         disjoint_ == o.disjoint_;
}

// ---------------------------------------------------------------------------
// Builder

KnowledgeGraph::Builder::Builder(const KnowledgeGraph& g)
    : domains_(g.domains_),
      class_ids_(g.class_ids_),
      class_domain_(g.class_domain_),
      relations_(g.relations_),
      edges_(g.edges_),
      class_lookup_(g.class_lookup_) {
  for (const auto& h : g.hierarchy_) hierarchy_.insert(hierarchy_.end(), h.begin(), h.end());
  for (const auto& h : g.disjoint_) disjoint_.insert(disjoint_.end(), h.begin(), h.end());
}

std::size_t KnowledgeGraph::Builder::add_domain(std::string_view name) {
  if (name.empty()) throw DataError("empty domain name");
  if (auto d = find_domain(name)) return *d;
  domains_.emplace_back(name);
  return domains_.size() - 1;
}

std::optional<std::size_t> KnowledgeGraph::Builder::find_domain(std::string_view name) const {
  for (std::size_t d = 0; d < domains_.size(); ++d)
    if (domains_[d] == name) return d;
  return std::nullopt;
}

std::optional<std::size_t> KnowledgeGraph::Builder::find_class(std::string_view id) const {
  auto it = class_lookup_.find(id);
  if (it == class_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t KnowledgeGraph::Builder::add_class(std::string_view id, std::size_t domain) {
  if (id.empty()) throw DataError("empty class id");
  if (domain >= domains_.size()) throw DataError("class '" + std::string(id) + "' in unknown domain");
  if (class_lookup_.contains(id)) throw DataError("class '" + std::string(id) + "' declared twice");
  class_lookup_.emplace(std::string(id), class_ids_.size());
  class_ids_.emplace_back(id);
  class_domain_.push_back(domain);
  return class_ids_.size() - 1;
}

std::size_t KnowledgeGraph::Builder::add_relation(std::string_view name, std::size_t src, std::size_t dst) {
  if (name.empty()) throw DataError("empty relation name");
  if (name == kSubClassOf || name == kDisjointWith) {
    throw DataError("relation name '" + std::string(name) + "' is reserved");
  }
  if (src >= domains_.size() || dst >= domains_.size()) {
    throw DataError("relation '" + std::string(name) + "' references an unknown domain");
  }
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& rel = relations_[r];
    if (rel.name == name && rel.source_domain == src && rel.target_domain == dst) return r;
  }
  relations_.push_back(Relation{std::string(name), src, dst});
  return relations_.size() - 1;
}

void KnowledgeGraph::Builder::add_edge(const Edge& e) { edges_.push_back(e); }
void KnowledgeGraph::Builder::add_subclass(std::size_t sub, std::size_t super) {
  hierarchy_.emplace_back(sub, super);
}
void KnowledgeGraph::Builder::add_disjoint(std::size_t a, std::size_t b) {
  disjoint_.emplace_back(std::min(a, b), std::max(a, b));
}

KnowledgeGraph KnowledgeGraph::Builder::build() const {
  KnowledgeGraph g;
  g.domains_ = domains_;
  g.class_ids_ = class_ids_;
  g.class_domain_ = class_domain_;
  g.relations_ = relations_;
  g.class_lookup_ = class_lookup_;
  const std::size_t nd = domains_.size();
  const std::size_t nc = class_ids_.size();

  g.domain_classes_.assign(nd, {});
  g.class_local_.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    g.class_local_[c] = g.domain_classes_[class_domain_[c]].size();
    g.domain_classes_[class_domain_[c]].push_back(c);
  }

  auto name = [&](std::size_t c) { return "'" + class_ids_[c] + "'"; };

  for (const auto& e : edges_) {
    if (e.subject >= nc || e.object >= nc || e.relation >= relations_.size()) {
      throw DataError("edge references an unknown class or relation");
    }
    const auto& rel = relations_[e.relation];
    if (class_domain_[e.subject] != rel.source_domain || class_domain_[e.object] != rel.target_domain) {
      throw DataError("edge " + name(e.subject) + " " + rel.name + " " + name(e.object) +
                      " does not match the relation's declared domains");
    }
  }
  g.edges_ = edges_;
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

  g.hierarchy_.assign(nd, {});
  g.parents_.assign(nc, {});
  g.children_.assign(nc, {});
  std::vector<ClassPair> hier = hierarchy_;
  std::sort(hier.begin(), hier.end());
  hier.erase(std::unique(hier.begin(), hier.end()), hier.end());
  for (const auto& [sub, super] : hier) {
    if (sub >= nc || super >= nc) throw DataError("hierarchy pair references an unknown class");
    if (class_domain_[sub] != class_domain_[super]) {
      throw DataError("subClassOf crosses domains: " + name(sub) + " (" + domains_[class_domain_[sub]] +
                      ") and " + name(super) + " (" + domains_[class_domain_[super]] + ")");
    }
    g.hierarchy_[class_domain_[sub]].emplace_back(sub, super);
    g.parents_[sub].push_back(super);
    g.children_[super].push_back(sub);
  }

  // Cycle check: iterative three-colour DFS over parent links.
  std::vector<std::uint8_t> colour(nc, 0);
  for (std::size_t start = 0; start < nc; ++start) {
    if (colour[start] != 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
    colour[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < g.parents_[node].size()) {
        const std::size_t p = g.parents_[node][next++];
        if (colour[p] == 1) throw DataError("subClassOf cycle through " + name(p));
        if (colour[p] == 0) {
          colour[p] = 1;
          stack.emplace_back(p, 0);
        }
      } else {
        colour[node] = 2;
        stack.pop_back();
      }
    }
  }

  g.disjoint_.assign(nd, {});
  std::vector<ClassPair> dis = disjoint_;
  std::sort(dis.begin(), dis.end());
  dis.erase(std::unique(dis.begin(), dis.end()), dis.end());
  for (const auto& [a, b] : dis) {
    if (a >= nc || b >= nc) throw DataError("disjointness pair references an unknown class");
    if (a == b) throw DataError("class " + name(a) + " declared disjoint with itself");
    if (class_domain_[a] != class_domain_[b]) {
      throw DataError("disjointWith crosses domains: " + name(a) + " and " + name(b));
    }
    g.disjoint_[class_domain_[a]].emplace_back(a, b);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Parsing

KnowledgeGraph parse_graph(std::string_view axiom_text, std::string_view domain_text) {
  KnowledgeGraph::Builder b;
  struct RelLine {
    std::size_t line;
    std::string name, src, dst;
  };
  std::vector<RelLine> rel_lines;

  tsv::for_each_record(domain_text, [&](std::size_t line, std::string_view text) {
    const auto f = tsv::split(text);
    const std::string where = "domain file line " + std::to_string(line);
    if (f[0] == "@rel") {
      if (f.size() != 4 || f[1].empty() || f[2].empty() || f[3].empty()) {
        throw DataError(where + ": expected '@rel<TAB>name<TAB>source_domain<TAB>target_domain'");
      }
      rel_lines.push_back({line, std::string(f[1]), std::string(f[2]), std::string(f[3])});
      return;
    }
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw DataError(where + ": expected 'class<TAB>domain'");
    }
    if (b.find_class(f[0])) throw DataError(where + ": class '" + std::string(f[0]) + "' declared twice");
    b.add_class(f[0], b.add_domain(f[1]));
  });
  for (const auto& r : rel_lines) {
    const auto src = b.find_domain(r.src);
    const auto dst = b.find_domain(r.dst);
    if (!src || !dst) {
      throw DataError("domain file line " + std::to_string(r.line) + ": relation '" + r.name +
                      "' references unknown domain '" + (src ? r.dst : r.src) + "'");
    }
    b.add_relation(r.name, *src, *dst);
  }

  tsv::for_each_record(axiom_text, [&](std::size_t line, std::string_view text) {
    const auto f = tsv::split(text);
    const std::string where = "axiom file line " + std::to_string(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw DataError(where + ": expected 'subject<TAB>predicate<TAB>object'");
    }
    const auto s = b.find_class(f[0]);
    const auto o = b.find_class(f[2]);
    if (!s) throw DataError(where + ": undeclared class '" + std::string(f[0]) + "'");
    if (!o) throw DataError(where + ": undeclared class '" + std::string(f[2]) + "'");
    if (f[1] == kSubClassOf) {
      if (b.domain_of(*s) != b.domain_of(*o)) {
        throw DataError(where + ": subClassOf crosses domains");
      }
      b.add_subclass(*s, *o);
    } else if (f[1] == kDisjointWith) {
      if (b.domain_of(*s) != b.domain_of(*o)) throw DataError(where + ": disjointWith crosses domains");
      if (*s == *o) throw DataError(where + ": class disjoint with itself");
      b.add_disjoint(*s, *o);
    } else {
      std::optional<std::size_t> rel;
      const auto& rels = b.relations();
      for (std::size_t r = 0; r < rels.size(); ++r) {
        if (rels[r].name == f[1] && rels[r].source_domain == b.domain_of(*s) &&
            rels[r].target_domain == b.domain_of(*o)) {
          rel = r;
        }
      }
      if (!rel) {
        throw DataError(where + ": relation '" + std::string(f[1]) +
                        "' is not declared between the domains of its endpoints");
      }
      b.add_edge(Edge{*s, *rel, *o});
    }
  });
  return b.build();
}

// ---------------------------------------------------------------------------
// Transformations

KnowledgeGraph add_reverse_edges(const KnowledgeGraph& g) {
  KnowledgeGraph::Builder b(g);
  const auto& rels = g.relations();
  std::vector<std::optional<std::size_t>> reverse_of(rels.size());
  for (std::size_t r = 0; r < rels.size(); ++r) {
    if (rels[r].is_reverse()) continue;
    reverse_of[r] =
        b.add_relation(rels[r].name + std::string(kReverseSuffix), rels[r].target_domain, rels[r].source_domain);
  }
  for (const auto& e : g.edges()) {
    if (reverse_of[e.relation]) b.add_edge(Edge{e.object, *reverse_of[e.relation], e.subject});
  }
  return b.build();
}

KnowledgeGraph filter_rare_relations(const KnowledgeGraph& g, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("filter_rare_relations: min_count must be >= 1");
  std::vector<std::size_t> counts(g.relations().size(), 0);
  for (const auto& e : g.edges()) counts[e.relation]++;
  KnowledgeGraph::Builder b(g);
  b.remove_edges_if([&](const Edge& e) { return counts[e.relation] < min_count; });
  return b.build();
}

std::vector<std::size_t> ancestors(const KnowledgeGraph& g, std::size_t c) {
  if (c >= g.num_classes()) throw std::out_of_range("ancestors: undeclared class");
  std::vector<bool> seen(g.num_classes(), false);
  std::vector<std::size_t> stack{c}, out;
  seen[c] = true;
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    out.push_back(x);
    for (auto p : g.parents(x)) {
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> descendants(const KnowledgeGraph& g, std::size_t c) {
  if (c >= g.num_classes()) throw std::out_of_range("descendants: undeclared class");
  std::vector<bool> seen(g.num_classes(), false);
  std::vector<std::size_t> stack{c}, out;
  seen[c] = true;
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    out.push_back(x);
    for (auto ch : g.children(x)) {
      if (!seen[ch]) {
        seen[ch] = true;
        stack.push_back(ch);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> ancestor_table(const KnowledgeGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.num_classes());
  for (std::size_t c = 0; c < g.num_classes(); ++c) out[c] = ancestors(g, c);
  return out;
}

std::vector<std::size_t> sample_negatives(const KnowledgeGraph& g, std::size_t c, double ratio,
                                          const std::vector<std::size_t>& anc, Rng& rng) {
  if (!(ratio > 0)) throw std::invalid_argument("sample_negatives: ratio must be positive");
  const auto& pool = g.classes_in(g.domain_of(c));
  const std::size_t n_complement = pool.size() - anc.size();
  if (n_complement == 0) {
    throw DataError("cannot sample negatives for '" + g.class_id(c) + "': every class in domain '" +
                    g.domain_name(g.domain_of(c)) + "' is an ancestor");
  }
  const auto count = static_cast<std::size_t>(std::llround(ratio));
  std::vector<std::size_t> out;
  out.reserve(count);
  // Draw the k-th non-ancestor directly; no rejection loop.
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t k = rng.below(n_complement);
    for (auto cand : pool) {
      if (std::binary_search(anc.begin(), anc.end(), cand)) continue;
      if (k-- == 0) {
        out.push_back(cand);
        break;
      }
    }
  }
  return out;
}

std::vector<std::size_t> sample_negatives(const KnowledgeGraph& g, std::size_t c, double ratio,
                                          std::uint64_t seed) {
  Rng rng(seed);
  return sample_negatives(g, c, ratio, ancestors(g, c), rng);
}

KnowledgeGraph augment_sibling_disjointness(const KnowledgeGraph& g, std::size_t root) {
  if (root >= g.num_classes()) throw std::out_of_range("augment_sibling_disjointness: unknown root");
  KnowledgeGraph::Builder b(g);
  const auto& kids = g.children(root);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    for (std::size_t j = 0; j < kids.size(); ++j) {
      if (i == j) continue;
      for (auto d : descendants(g, kids[j])) {
        if (d != kids[i]) b.add_disjoint(kids[i], d);
      }
    }
  }
  return b.build();
}

EdgeSplit split_edges_stratified(const KnowledgeGraph& g, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split_edges_stratified: fraction must be in [0, 1)");
  }
  Rng rng(seed);
  std::vector<Edge> test;
  for (std::size_t r = 0; r < g.relations().size(); ++r) {
    if (g.relations()[r].is_reverse()) continue;
    std::vector<Edge> es;
    for (const auto& e : g.edges())
      if (e.relation == r) es.push_back(e);
    rng.shuffle(es);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(es.size())));
    test.insert(test.end(), es.begin(), es.begin() + static_cast<std::ptrdiff_t>(n_test));
  }
  std::sort(test.begin(), test.end());
  KnowledgeGraph::Builder b(g);
  b.remove_edges_if([&](const Edge& e) { return std::binary_search(test.begin(), test.end(), e); });
  return {b.build(), std::move(test)};
}

KnowledgeGraph with_edges(const KnowledgeGraph& g, const std::vector<Edge>& extra, bool with_reverse) {
  KnowledgeGraph::Builder b(g);
  for (const auto& e : extra) {
    b.add_edge(e);
    if (!with_reverse) continue;
    const auto& rel = g.relations()[e.relation];
    if (rel.is_reverse()) continue;
    const auto rev = g.find_relation(rel.name + std::string(kReverseSuffix), rel.target_domain, rel.source_domain);
    if (rev) b.add_edge(Edge{e.object, *rev, e.subject});
  }
  return b.build();
}

// ---------------------------------------------------------------------------
// Fitness data

FitnessRecord make_fitness_record(const KnowledgeGraph& g, std::size_t a, std::size_t b, double fitness) {
  if (g.class_id(b) < g.class_id(a)) std::swap(a, b);
  return FitnessRecord{a, b, fitness};
}

FitnessDataset parse_fitness(std::string_view text, const KnowledgeGraph& g, std::size_t gene_domain) {
  FitnessDataset d;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  tsv::for_each_record(text, [&](std::size_t line, std::string_view row) {
    const auto f = tsv::split(row);
    const std::string where = "fitness file line " + std::to_string(line);
    if (f.size() != 3) throw DataError(where + ": expected 'gene_a<TAB>gene_b<TAB>fitness'");
    std::size_t genes[2];
    for (int i = 0; i < 2; ++i) {
      const auto c = g.find_class(f[i]);
      if (!c) throw DataError(where + ": unknown gene '" + std::string(f[i]) + "'");
      if (g.domain_of(*c) != gene_domain) {
        throw DataError(where + ": '" + std::string(f[i]) + "' is not in the gene domain");
      }
      genes[i] = *c;
    }
    if (genes[0] == genes[1]) throw DataError(where + ": a gene cannot pair with itself");
    const double y = tsv::parse_double(f[2], where);
    if (y < 0) throw DataError(where + ": fitness must be non-negative");
    auto rec = make_fitness_record(g, genes[0], genes[1], y);
    if (!seen.emplace(rec.gene_a, rec.gene_b).second) throw DataError(where + ": duplicate gene pair");
    d.records.push_back(rec);
  });
  return d;
}

std::vector<FoldSplit> split_with_partition(const FitnessDataset& d,
                                            const std::vector<std::vector<std::size_t>>& gene_sets) {
  std::map<std::size_t, std::size_t> fold_of;
  for (std::size_t k = 0; k < gene_sets.size(); ++k) {
    for (auto gene : gene_sets[k]) {
      if (!fold_of.emplace(gene, k).second) throw std::invalid_argument("gene assigned to two folds");
    }
  }
  std::vector<FoldSplit> out(gene_sets.size());
  for (std::size_t k = 0; k < gene_sets.size(); ++k) {
    auto& fs = out[k];
    fs.valid_genes = gene_sets[k];
    std::sort(fs.valid_genes.begin(), fs.valid_genes.end());
    for (const auto& [gene, fold] : fold_of)
      if (fold != k) fs.train_genes.push_back(gene);
    for (const auto& rec : d.records) {
      const auto fa = fold_of.find(rec.gene_a);
      const auto fb = fold_of.find(rec.gene_b);
      if (fa == fold_of.end() || fb == fold_of.end()) continue;
      const bool va = fa->second == k, vb = fb->second == k;
      if (va && vb) fs.valid.records.push_back(rec);
      else if (!va && !vb) fs.train.records.push_back(rec);
    }
  }
  return out;
}

std::vector<FoldSplit> split_by_genes(const FitnessDataset& d, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("split_by_genes: folds must be >= 2");
  if (d.records.empty()) throw DataError("split_by_genes: empty dataset");
  std::set<std::size_t> gene_set;
  for (const auto& r : d.records) {
    gene_set.insert(r.gene_a);
    gene_set.insert(r.gene_b);
  }
  if (gene_set.size() < folds) {
    throw DataError("split_by_genes: " + std::to_string(gene_set.size()) + " genes cannot fill " +
                    std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> genes(gene_set.begin(), gene_set.end());
  Rng rng(seed);
  rng.shuffle(genes);
  std::vector<std::vector<std::size_t>> sets(folds);
  for (std::size_t i = 0; i < genes.size(); ++i) sets[i % folds].push_back(genes[i]);
  return split_with_partition(d, sets);
}

}  // namespace boxgnn
