#include "boxgnn/link_eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

DisplacementMode parse_displacement_mode(const std::string& s) {
  if (s == "box_distance") return DisplacementMode::BoxDistance;
  if (s == "corner") return DisplacementMode::Corner;
  throw ConfigError("unknown displacement mode '" + s + "' (expected box_distance or corner)");
}

std::string to_string(DisplacementMode m) { return m == DisplacementMode::Corner ? "corner" : "box_distance"; }

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Real: return "real";
    case BaselineKind::Constrained: return "constrained";
    case BaselineKind::Random: return "random";
  }
  return "real";
}

FinalBoxes final_boxes(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g) {
  ad::Tape tape;
  auto bound = params.bind(tape);
  auto out = gnn.forward(bound, gnn.index(g));
  FinalBoxes fb;
  for (const auto& latent : out.layers.back()) {
    auto b = boxes_from_latents(latent);
    fb.lower.push_back(b.lower.value());
    fb.upper.push_back(b.upper.value());
  }
  return fb;
}

double displacement(const FinalBoxes& before, const FinalBoxes& after, DisplacementMode mode) {
  if (before.lower.size() != after.lower.size()) throw ShapeError("displacement: domain count differs");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t d = 0; d < before.lower.size(); ++d) {
    const Tensor& z0 = before.lower[d];
    const Tensor& Z0 = before.upper[d];
    const Tensor& z1 = after.lower[d];
    const Tensor& Z1 = after.upper[d];
    if (z0.shape() != z1.shape()) throw ShapeError("displacement: box shapes differ");
    for (std::size_t i = 0; i < z0.size(); ++i) {
      if (mode == DisplacementMode::Corner) {
        sum += std::abs(z1[i] - z0[i]) + std::abs(Z1[i] - Z0[i]);
      } else {
        const double c0 = 0.5 * (z0[i] + Z0[i]), o0 = 0.5 * (Z0[i] - z0[i]);
        const double c1 = 0.5 * (z1[i] + Z1[i]), o1 = 0.5 * (Z1[i] - z1[i]);
        const double d_revised = std::abs(c0 - c1) - o0 - o1;
        const double d_self = -2.0 * o0;
        sum += std::abs(d_revised - d_self);
      }
    }
    count += z0.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

void validate_edge(const KnowledgeGraph& g, const Edge& e) {
  if (e.subject >= g.num_classes() || e.object >= g.num_classes()) throw DataError("edge endpoint is not a node");
  if (e.relation >= g.relations().size()) throw DataError("edge relation is not declared");
  const auto& rel = g.relations()[e.relation];
  if (g.domain_of(e.subject) != rel.source_domain || g.domain_of(e.object) != rel.target_domain) {
    throw DataError("edge endpoints do not match the domains of relation '" + rel.name + "'");
  }
}

}  // namespace

double embedding_displacement(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g_train,
                              const FinalBoxes& before, const Edge& edge, DisplacementMode mode, bool with_reverse) {
  validate_edge(g_train, edge);
  const auto revised = with_edges(g_train, {edge}, with_reverse);
  return displacement(before, final_boxes(gnn, params, revised), mode);
}

Edge constrained_baseline(const KnowledgeGraph& g, const Edge& e, Rng& rng) {
  const auto& rel = g.relations()[e.relation];
  const auto& src = g.classes_in(rel.source_domain);
  const auto& dst = g.classes_in(rel.target_domain);
  const std::size_t s = src[rng.below(src.size())];
  const std::size_t o = dst[rng.below(dst.size())];
  return {s, e.relation, o};
}

Edge random_baseline(const KnowledgeGraph& g, const std::vector<std::size_t>& allowed_relations, Rng& rng,
                     std::size_t max_draws) {
  std::vector<std::size_t> fits;
  for (std::size_t t = 0; t < max_draws; ++t) {
    const std::size_t s = rng.below(g.num_classes());
    const std::size_t o = rng.below(g.num_classes());
    fits.clear();
    for (std::size_t r : allowed_relations) {
      const auto& rel = g.relations()[r];
      if (rel.source_domain == g.domain_of(s) && rel.target_domain == g.domain_of(o)) fits.push_back(r);
    }
    if (!fits.empty()) return {s, fits[rng.below(fits.size())], o};
  }
  throw DataError("no relation connects randomly drawn nodes after " + std::to_string(max_draws) + " draws");
}

LinkEvalReport evaluate_revisions(const HeteroGnn& gnn, const ParameterSet& params, const KnowledgeGraph& g_train,
                                  const std::vector<Edge>& test_edges, const LinkEvalOptions& opt) {
  std::vector<std::size_t> allowed;
  for (const auto& k : gnn.modules()) {
    if (!k.relation) continue;
    if (opt.with_reverse && g_train.relations()[*k.relation].is_reverse()) continue;
    allowed.push_back(*k.relation);
  }
  std::sort(allowed.begin(), allowed.end());

  // Baselines are drawn serially so the stream does not depend on scheduling.
  Rng rng(opt.seed);
  struct Job {
    Edge edge;
    BaselineKind kind;
    std::size_t test_index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < test_edges.size(); ++i) {
    validate_edge(g_train, test_edges[i]);
    jobs.push_back({test_edges[i], BaselineKind::Real, i});
    jobs.push_back({constrained_baseline(g_train, test_edges[i], rng), BaselineKind::Constrained, i});
    jobs.push_back({random_baseline(g_train, allowed, rng, opt.max_random_draws), BaselineKind::Random, i});
  }

  const FinalBoxes before = final_boxes(gnn, params, g_train);
  std::vector<double> dist(jobs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    try {
      dist[j] = embedding_displacement(gnn, params, g_train, before, jobs[j].edge, opt.mode, opt.with_reverse);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Group by the relation of the test edge.
  std::map<std::size_t, std::vector<std::size_t>> by_relation;
  for (std::size_t j = 0; j < jobs.size(); ++j) by_relation[test_edges[jobs[j].test_index].relation].push_back(j);

  LinkEvalReport report;
  for (const auto& [rel, members] : by_relation) {
    std::vector<double> per_kind[3];
    for (BaselineKind kind : {BaselineKind::Real, BaselineKind::Constrained, BaselineKind::Random}) {
      std::vector<std::size_t> group;
      for (std::size_t j : members) {
        if (jobs[j].kind == kind) group.push_back(j);
      }
      std::vector<std::size_t> order(group.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return dist[group[a]] > dist[group[b]]; });
      std::vector<std::size_t> rank(group.size());
      for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
      for (std::size_t i = 0; i < group.size(); ++i) {
        const std::size_t j = group[i];
        report.results.push_back({jobs[j].edge, kind, dist[j], rank[i]});
        per_kind[static_cast<int>(kind)].push_back(dist[j]);
      }
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    RelationSummary s;
    s.relation = rel;
    s.n_test = per_kind[0].size();
    s.mean_real = mean(per_kind[0]);
    s.mean_constrained = mean(per_kind[1]);
    s.mean_random = mean(per_kind[2]);
    s.real_vs_random = mann_whitney_u(per_kind[0], per_kind[2]);
    s.real_vs_constrained = mann_whitney_u(per_kind[0], per_kind[1]);
    report.summary.push_back(s);
  }
  return report;
}

std::string format_results(const LinkEvalReport& r, const KnowledgeGraph& g) {
  std::string out = "relation\tkind\tedge\tdistance\n";
  for (const auto& x : r.results) {
    out += g.relations()[x.edge.relation].name;
    out += "\t" + to_string(x.kind) + "\t" + g.class_id(x.edge.subject) + "|" + g.relations()[x.edge.relation].name +
           "|" + g.class_id(x.edge.object) + "\t" + tsv::format_double(x.distance) + "\n";
  }
  return out;
}

std::string format_summary(const LinkEvalReport& r, const KnowledgeGraph& g) {
  std::string out =
      "relation\tn_test\tmean_real\tmean_constrained\tmean_random\tu_real_vs_random\tp_real_vs_random\t"
      "u_real_vs_constrained\tp_real_vs_constrained\n";
  for (const auto& s : r.summary) {
    out += g.relations()[s.relation].name + "\t" + std::to_string(s.n_test) + "\t" + tsv::format_double(s.mean_real) +
           "\t" + tsv::format_double(s.mean_constrained) + "\t" + tsv::format_double(s.mean_random) + "\t" +
           tsv::format_double(s.real_vs_random.u) + "\t" + tsv::format_double(s.real_vs_random.p) + "\t" +
           tsv::format_double(s.real_vs_constrained.u) + "\t" + tsv::format_double(s.real_vs_constrained.p) + "\n";
  }
  return out;
}

}  // namespace boxgnn
