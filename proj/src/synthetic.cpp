#include "boxgnn/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "boxgnn/errors.hpp"
#include "boxgnn/rng.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

namespace {

std::string numbered(const std::string& prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return prefix + buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.genes < 2 || spec.gene_categories == 0 || spec.trait_groups == 0 || spec.leaves_per_group == 0 ||
      spec.traits_per_gene == 0 || spec.traits_per_gene > spec.leaves_per_group) {
    throw ConfigError("synthetic: invalid sizes");
  }
  Rng rng(spec.seed);
  KnowledgeGraph::Builder b;
  const std::size_t gene_dom = b.add_domain("gene");
  const std::size_t trait_dom = b.add_domain("trait");

  const std::size_t gene_root = b.add_class("gene_root", gene_dom);
  std::vector<std::size_t> categories;
  for (std::size_t c = 0; c < spec.gene_categories; ++c) {
    categories.push_back(b.add_class(numbered("gene_category_", c, 2), gene_dom));
    b.add_subclass(categories.back(), gene_root);
  }
  std::vector<std::size_t> genes;
  for (std::size_t i = 0; i < spec.genes; ++i) {
    genes.push_back(b.add_class(numbered("gene_", i, 3), gene_dom));
    b.add_subclass(genes.back(), categories[rng.below(categories.size())]);
  }

  const std::size_t trait_root = b.add_class("trait_root", trait_dom);
  std::vector<std::size_t> groups;
  std::vector<std::vector<std::size_t>> leaves(spec.trait_groups);
  for (std::size_t gi = 0; gi < spec.trait_groups; ++gi) {
    groups.push_back(b.add_class(numbered("trait_group_", gi, 2), trait_dom));
    b.add_subclass(groups.back(), trait_root);
    for (std::size_t li = 0; li < spec.leaves_per_group; ++li) {
      leaves[gi].push_back(b.add_class(numbered("trait_group_", gi, 2) + numbered("_leaf_", li, 2), trait_dom));
      b.add_subclass(leaves[gi].back(), groups.back());
    }
  }
  const std::size_t has_trait = b.add_relation("hasTrait", gene_dom, trait_dom);

  std::vector<std::size_t> group_of(spec.genes);
  std::vector<std::set<std::size_t>> traits(spec.genes);
  for (std::size_t i = 0; i < spec.genes; ++i) {
    group_of[i] = rng.below(spec.trait_groups);
    std::vector<std::size_t> pool = leaves[group_of[i]];
    rng.shuffle(pool);
    for (std::size_t k = 0; k < spec.traits_per_gene; ++k) {
      traits[i].insert(pool[k]);
      b.add_edge(Edge{genes[i], has_trait, pool[k]});
    }
  }
  KnowledgeGraph g = b.build();
  if (spec.sibling_disjointness) g = augment_sibling_disjointness(g, trait_root);

  SyntheticData out;
  out.gene_domain = gene_dom;
  for (std::size_t i = 0; i < spec.genes; ++i) {
    for (std::size_t j = i + 1; j < spec.genes; ++j) {
      std::size_t shared = 0;
      for (std::size_t t : traits[i]) shared += traits[j].count(t);
      double y = 1.0;
      if (group_of[i] == group_of[j]) y -= spec.same_group_penalty;
      y -= spec.same_leaf_penalty * static_cast<double>(shared);
      if (spec.noise > 0.0) y += rng.uniform(-spec.noise, spec.noise);
      out.fitness.records.push_back(make_fitness_record(g, genes[i], genes[j], std::max(0.0, y)));
    }
  }
  out.graph = std::move(g);
  return out;
}

KnowledgeGraph hierarchy_fixture(std::size_t domains, std::size_t children, std::size_t grandchildren,
                                 std::uint64_t seed) {
  if (domains == 0 || children == 0) throw ConfigError("hierarchy fixture: invalid sizes");
  Rng rng(seed);
  KnowledgeGraph::Builder b;
  std::vector<std::size_t> roots;
  std::vector<std::vector<std::size_t>> members(domains);
  for (std::size_t d = 0; d < domains; ++d) {
    const std::string name = numbered("d", d, 1);
    const std::size_t dom = b.add_domain(name);
    const std::size_t root = b.add_class(name + "_root", dom);
    roots.push_back(root);
    members[d].push_back(root);
    for (std::size_t c = 0; c < children; ++c) {
      const std::size_t child = b.add_class(name + numbered("_c", c, 1), dom);
      b.add_subclass(child, root);
      members[d].push_back(child);
      for (std::size_t k = 0; k < grandchildren; ++k) {
        const std::size_t leaf = b.add_class(name + numbered("_c", c, 1) + numbered("_", k, 1), dom);
        b.add_subclass(leaf, child);
        members[d].push_back(leaf);
      }
    }
  }
  if (domains > 1) {
    for (std::size_t d = 0; d < domains; ++d) {
      const std::size_t next = (d + 1) % domains;
      const std::size_t r = b.add_relation("linkedTo", d, next);
      for (std::size_t c : members[d]) b.add_edge(Edge{c, r, members[next][rng.below(members[next].size())]});
    }
  }
  KnowledgeGraph g = b.build();
  for (std::size_t root : roots) g = augment_sibling_disjointness(g, root);
  return g;
}

std::string fitness_text(const FitnessDataset& d, const KnowledgeGraph& g) {
  std::string out;
  for (const auto& r : d.records) {
    out += g.class_id(r.gene_a) + "\t" + g.class_id(r.gene_b) + "\t" + tsv::format_double(r.fitness) + "\n";
  }
  return out;
}

}  // namespace boxgnn
