#include "boxgnn/attribution.hpp"

#include <algorithm>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

PairAttribution input_x_gradient(const FitnessModel& m, const KnowledgeGraph& g, const GnnIndex& idx,
                                 std::size_t gene_a, std::size_t gene_b) {
  for (std::size_t x : {gene_a, gene_b}) {
    if (x >= g.num_classes() || g.domain_of(x) != m.gene_domain) throw DataError("attribution target is not a gene");
  }
  ad::Tape tape;
  auto bound = m.params.bind(tape, true);
  auto out = m.gnn.forward(bound, idx);
  auto genes = out.layers.back()[m.gene_domain];
  std::optional<ad::Var> w;
  if (m.bilinear) w = bound[*m.bilinear];
  auto feats = combine(ad::gather_rows(genes, {g.local_index(gene_a)}), ad::gather_rows(genes, {g.local_index(gene_b)}),
                       m.combiner, w);
  auto pred = head_forward(m, bound, feats);
  tape.backward(pred);

  PairAttribution result;
  result.prediction = pred.value().item();
  for (const auto& msg : out.first_layer_messages) {
    const Tensor& value = msg.rows.value();
    const Tensor grad = msg.rows.grad();
    const auto& edges = *msg.edges;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Edge& e = edges[i];
      if (e.object != gene_a && e.object != gene_b) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < value.cols(); ++c) s += value(i, c) * grad(i, c);
      const EdgeScore score{{e.subject, e.relation}, s};
      if (e.object == gene_a) result.gene_a.push_back(score);
      if (e.object == gene_b) result.gene_b.push_back(score);
    }
  }
  auto by_key = [](const EdgeScore& x, const EdgeScore& y) { return x.key < y.key; };
  std::sort(result.gene_a.begin(), result.gene_a.end(), by_key);
  std::sort(result.gene_b.begin(), result.gene_b.end(), by_key);
  return result;
}

void accumulate_pair(PairImportanceTable& table, const PairAttribution& a) {
  for (const auto& l1 : a.gene_a) {
    for (const auto& l2 : a.gene_b) table[{l1.key, l2.key}] += l1.score * l2.score;
  }
}

PairImportanceTable accumulate_pair_importances(const FitnessModel& m, const KnowledgeGraph& g,
                                                std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  for (auto& p : pairs) {
    if (p.second < p.first) std::swap(p.first, p.second);
  }
  std::sort(pairs.begin(), pairs.end());
  const GnnIndex idx = m.gnn.index(g);
  std::vector<PairAttribution> scores(pairs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      scores[i] = input_x_gradient(m, g, idx, pairs[i].first, pairs[i].second);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  PairImportanceTable table;
  for (const auto& s : scores) accumulate_pair(table, s);
  return table;
}

PairImportanceTable filter_importances(const PairImportanceTable& table, const std::set<std::size_t>& allow_predicates,
                                       const std::set<std::size_t>& allow_superclasses, const KnowledgeGraph& g) {
  auto allowed = [&](const EdgeKey& k) {
    if (allow_predicates.count(k.predicate)) return true;
    if (allow_superclasses.empty()) return false;
    for (std::size_t a : ancestors(g, k.subject)) {
      if (allow_superclasses.count(a)) return true;
    }
    return false;
  };
  PairImportanceTable out;
  for (const auto& [key, score] : table) {
    if (allowed(key.first) || allowed(key.second)) out.emplace(key, score);
  }
  return out;
}

std::vector<RankedPair> symmetrized_ranking(const PairImportanceTable& table) {
  std::map<std::pair<EdgeKey, EdgeKey>, double> sym;
  for (const auto& [key, score] : table) {
    auto k = key.second < key.first ? std::make_pair(key.second, key.first) : key;
    sym[k] += score;
  }
  std::vector<RankedPair> out;
  for (const auto& [key, score] : sym) out.push_back({key.first, key.second, score});
  std::stable_sort(out.begin(), out.end(), [](const RankedPair& x, const RankedPair& y) { return x.score > y.score; });
  return out;
}

std::string format_importances(const std::vector<RankedPair>& ranking, const KnowledgeGraph& g, std::size_t top_k) {
  std::string out = "rank\tscore\tpred1\tclass1\tpred2\tclass2\n";
  const std::size_t n = top_k == 0 ? ranking.size() : std::min(top_k, ranking.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ranking[i];
    out += std::to_string(i + 1) + "\t" + tsv::format_double(r.score) + "\t" + g.relations()[r.first.predicate].name +
           "\t" + g.class_id(r.first.subject) + "\t" + g.relations()[r.second.predicate].name + "\t" +
           g.class_id(r.second.subject) + "\n";
  }
  return out;
}

}  // namespace boxgnn
