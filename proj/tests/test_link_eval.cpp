#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "boxgnn/box.hpp"
#include "boxgnn/errors.hpp"
#include "boxgnn/link_eval.hpp"
#include "doctest.h"
#include "gnn_oracle.hpp"
#include "helpers.hpp"

using namespace boxgnn;
using doctest::Approx;
using testing::cls;

namespace {

// Two domains; genes g* take annotations from traits t*, traits form a chain
// via `next`.
const char* kAxioms =
    "t0\tannot\tg0\nt1\tannot\tg1\nt2\tannot\tg2\nt0\tnext\tt1\nt1\tnext\tt2\nt2\tnext\tt3\nt3\tnext\tt4\n"
    "t1\tsubClassOf\tt0\n";
const char* kDomains =
    "g0\tG\ng1\tG\ng2\tG\ng3\tG\nt0\tT\nt1\tT\nt2\tT\nt3\tT\nt4\tT\n@rel\tannot\tT\tG\n@rel\tnext\tT\tT\n";

struct Toy {
  KnowledgeGraph g;
  ParameterSet params;
  HeteroGnn gnn;
};

Toy toy(std::size_t depth, std::uint64_t seed, bool reverse = false) {
  Toy t;
  t.g = testing::graph(kAxioms, kDomains);
  if (reverse) t.g = add_reverse_edges(t.g);
  Rng rng(seed);
  t.gnn = HeteroGnn::create(t.g, depth, std::vector<DomainDims>(t.g.num_domains(), DomainDims{2, 4}), t.params, rng);
  return t;
}

Edge edge(const KnowledgeGraph& g, const std::string& s, const std::string& r, const std::string& o) {
  const std::size_t sub = cls(g, s), obj = cls(g, o);
  return {sub, *g.find_relation(r, g.domain_of(sub), g.domain_of(obj)), obj};
}

/// Final boxes from the loop oracle.
FinalBoxes oracle_boxes(const KnowledgeGraph& g, const HeteroGnn& m, const ParameterSet& p) {
  const auto o = testing::oracle_forward(g, m, p);
  FinalBoxes fb;
  for (const auto& rows : o.layers.back()) {
    const std::size_t w = rows.empty() ? 0 : rows[0].size() / 2;
    Tensor lo(rows.size(), w), hi(rows.size(), w);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Box b = make_box({{rows[i].begin(), rows[i].begin() + w}, {rows[i].begin() + w, rows[i].end()}});
      for (std::size_t j = 0; j < w; ++j) {
        lo(i, j) = b.lower[j];
        hi(i, j) = b.upper[j];
      }
    }
    fb.lower.push_back(lo);
    fb.upper.push_back(hi);
  }
  return fb;
}

/// Nodes within `hops` message-passing steps downstream of `start`.
std::set<std::size_t> downstream(const KnowledgeGraph& g, std::size_t start, std::size_t hops) {
  std::set<std::size_t> seen{start};
  std::vector<std::size_t> frontier{start};
  for (std::size_t h = 0; h < hops; ++h) {
    std::vector<std::size_t> next;
    for (std::size_t c : frontier) {
      for (const auto& e : g.edges()) {
        if (e.subject == c && seen.insert(e.object).second) next.push_back(e.object);
      }
    }
    frontier = next;
  }
  return seen;
}

}  // namespace

TEST_CASE("mann_whitney_u examples") {
  const std::vector<double> a{1, 2}, b{3, 4};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.u == 0.0);
  CHECK(r.exact);
  CHECK(r.p == Approx(1.0 / 3.0).epsilon(1e-12));

  const std::vector<double> c{1, 3}, d{2, 4};
  const auto s = mann_whitney_u(c, d);
  CHECK(s.u == 1.0);
  CHECK(s.p == Approx(2.0 / 3.0).epsilon(1e-12));

  const std::vector<double> same{0.5, 1.5, 2.5, 3.5, 4.5};
  const auto t = mann_whitney_u(same, same);
  CHECK(t.u == 12.5);
  CHECK(t.p == Approx(1.0));

  const std::vector<double> empty;
  CHECK_THROWS_AS(mann_whitney_u(empty, a), std::invalid_argument);
  CHECK_THROWS_AS(mann_whitney_u(a, empty), std::invalid_argument);
}

TEST_CASE("midranks average ties") {
  const std::vector<double> v{3, 1, 3, 2, 3};
  CHECK(midranks(v) == std::vector<double>{4, 1, 4, 2, 4});
}

TEST_CASE("mann_whitney_u swaps to the complement") {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const std::size_t na = 1 + rng.below(15), nb = 1 + rng.below(15);
    std::vector<double> a(na), b(nb);
    // coarse values so ties are common
    for (double& x : a) x = static_cast<double>(rng.below(6));
    for (double& x : b) x = static_cast<double>(rng.below(6));
    const auto ab = mann_whitney_u(a, b);
    const auto ba = mann_whitney_u(b, a);
    CHECK(ab.u + ba.u == static_cast<double>(na * nb));
    CHECK(ab.p == Approx(ba.p).epsilon(1e-12));
    CHECK(ab.p >= 0.0);
    CHECK(ab.p <= 1.0);
  }
}

TEST_CASE("exact and normal p-values agree at n = 8") {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> a(8), b(8);
    const double shift = rng.uniform(0.0, 1.5);
    for (double& x : a) x = rng.uniform();
    for (double& x : b) x = rng.uniform() + shift;
    const double exact = mann_whitney_exact_p(a, b);
    const double normal = mann_whitney_normal_p(a, b);
    CHECK(std::abs(exact - normal) < 0.05);
  }
}

TEST_CASE("exact p matches brute-force enumeration") {
  // all 70 splits of 8 pooled values into 4 + 4
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> pool(8);
    for (double& x : pool) x = static_cast<double>(rng.below(5));
    const std::vector<double> a(pool.begin(), pool.begin() + 4), b(pool.begin() + 4, pool.end());
    auto u_of = [](const std::vector<double>& x, const std::vector<double>& y) {
      double u = 0;
      for (double p : x) {
        for (double q : y) u += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
      }
      return u;
    };
    const double obs = std::abs(u_of(a, b) - 8.0);
    int hits = 0, total = 0;
    for (unsigned mask = 0; mask < 256; ++mask) {
      if (__builtin_popcount(mask) != 4) continue;
      std::vector<double> x, y;
      for (int i = 0; i < 8; ++i) (mask >> i & 1 ? x : y).push_back(pool[i]);
      ++total;
      if (std::abs(u_of(x, y) - 8.0) >= obs - 1e-12) ++hits;
    }
    CHECK(mann_whitney_exact_p(a, b) == Approx(static_cast<double>(hits) / total).epsilon(1e-12));
  }
}

TEST_CASE("displacement is zero iff boxes are identical") {
  auto t = toy(2, 1);
  const auto before = final_boxes(t.gnn, t.params, t.g);
  for (auto mode : {DisplacementMode::Corner, DisplacementMode::BoxDistance}) {
    CHECK(displacement(before, before, mode) == 0.0);
  }
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    auto after = before;
    const std::size_t d = rng.below(after.lower.size());
    Tensor& target = rng.below(2) ? after.lower[d] : after.upper[d];
    target[rng.below(target.size())] += rng.uniform(-1e-6, 1e-6);
    CHECK(displacement(before, after, DisplacementMode::Corner) > 0.0);
  }
  CHECK(parse_displacement_mode("corner") == DisplacementMode::Corner);
  CHECK(parse_displacement_mode("box_distance") == DisplacementMode::BoxDistance);
  CHECK_THROWS_AS(parse_displacement_mode("euclid"), ConfigError);
}

TEST_CASE("box-distance displacement matches a hand value") {
  FinalBoxes a, b;
  a.lower = {Tensor::from_rows({{0.0}})};
  a.upper = {Tensor::from_rows({{2.0}})};
  b.lower = {Tensor::from_rows({{1.0}})};
  b.upper = {Tensor::from_rows({{2.0}})};
  // c: 1 -> 1.5, o: 1 -> 0.5; |0.5 - 1 - 0.5 - (-2)| = 1
  CHECK(displacement(a, b, DisplacementMode::BoxDistance) == 1.0);
  // |1 - 0| + |2 - 2|
  CHECK(displacement(a, b, DisplacementMode::Corner) == 1.0);
}

TEST_CASE("existing edge gives exactly zero displacement") {
  for (bool reverse : {false, true}) {
    auto t = toy(2, 2, reverse);
    const auto before = final_boxes(t.gnn, t.params, t.g);
    for (const auto& e : t.g.edges()) {
      if (t.g.relations()[e.relation].is_reverse()) continue;
      for (auto mode : {DisplacementMode::Corner, DisplacementMode::BoxDistance}) {
        CHECK(embedding_displacement(t.gnn, t.params, t.g, before, e, mode, reverse) == 0.0);
      }
    }
  }
}

TEST_CASE("new edge only moves nodes in its receptive field") {
  for (std::size_t depth : {1, 2}) {
    auto t = toy(depth, 3);
    const Edge e = edge(t.g, "t0", "next", "t2");
    const auto before = final_boxes(t.gnn, t.params, t.g);
    const auto after = final_boxes(t.gnn, t.params, with_edges(t.g, {e}, false));
    const auto reach = downstream(t.g, e.object, depth - 1);
    for (std::size_t c = 0; c < t.g.num_classes(); ++c) {
      const std::size_t d = t.g.domain_of(c), i = t.g.local_index(c);
      const auto b0 = testing::row_of(before.lower[d], i), b1 = testing::row_of(after.lower[d], i);
      const auto u0 = testing::row_of(before.upper[d], i), u1 = testing::row_of(after.upper[d], i);
      if (!reach.count(c)) {
        CHECK_MESSAGE(b0 == b1, t.g.class_id(c));
        CHECK_MESSAGE(u0 == u1, t.g.class_id(c));
      }
    }
    CHECK(embedding_displacement(t.gnn, t.params, t.g, before, e, DisplacementMode::Corner, false) > 0.0);
  }
}

TEST_CASE("new edges move the boxes") {
  auto t = toy(2, 4, true);
  const auto before = final_boxes(t.gnn, t.params, t.g);
  Rng rng(5);
  int checked = 0;
  while (checked < 30) {
    const Edge e = constrained_baseline(t.g, edge(t.g, "t0", "annot", "g0"), rng);
    if (t.g.has_edge(e)) continue;
    CHECK(embedding_displacement(t.gnn, t.params, t.g, before, e, DisplacementMode::Corner, true) > 0.0);
    ++checked;
  }
}

TEST_CASE("displacement matches the loop oracle") {
  auto t = toy(2, 6);
  const auto before = oracle_boxes(t.g, t.gnn, t.params);
  const auto before_ad = final_boxes(t.gnn, t.params, t.g);
  for (const Edge& e : {edge(t.g, "t4", "annot", "g3"), edge(t.g, "t3", "next", "t0"), edge(t.g, "t2", "annot", "g0")}) {
    const auto after = oracle_boxes(with_edges(t.g, {e}, false), t.gnn, t.params);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t d = 0; d < before.lower.size(); ++d) {
      for (std::size_t k = 0; k < before.lower[d].size(); ++k) {
        sum += std::abs(after.lower[d][k] - before.lower[d][k]) + std::abs(after.upper[d][k] - before.upper[d][k]);
        ++n;
      }
    }
    const double manual = sum / static_cast<double>(n);
    const double got = embedding_displacement(t.gnn, t.params, t.g, before_ad, e, DisplacementMode::Corner, false);
    CHECK(got == Approx(manual).epsilon(1e-10));
    CHECK(got > 0.0);
  }
}

TEST_CASE("invalid edges are rejected") {
  auto t = toy(1, 7);
  const auto before = final_boxes(t.gnn, t.params, t.g);
  const std::size_t annot = *t.g.find_relation("annot", 1, 0);
  const std::size_t n = t.g.num_classes();
  CHECK_THROWS_AS(embedding_displacement(t.gnn, t.params, t.g, before, {n, annot, 0}, DisplacementMode::Corner, false),
                  DataError);
  CHECK_THROWS_AS(embedding_displacement(t.gnn, t.params, t.g, before, {cls(t.g, "t0"), 99, cls(t.g, "g0")},
                                         DisplacementMode::Corner, false),
                  DataError);
  // wrong endpoint domains
  CHECK_THROWS_AS(embedding_displacement(t.gnn, t.params, t.g, before, {cls(t.g, "g0"), annot, cls(t.g, "t0")},
                                         DisplacementMode::Corner, false),
                  DataError);
}

TEST_CASE("baselines respect their sampling domains") {
  const auto g = add_reverse_edges(testing::graph(kAxioms, kDomains));
  const Edge real = edge(g, "t0", "annot", "g0");
  const std::size_t annot = real.relation, next = *g.find_relation("next", 1, 1);
  Rng rng(8);
  std::set<std::size_t> seen_rel;
  for (int k = 0; k < 500; ++k) {
    const Edge c = constrained_baseline(g, real, rng);
    CHECK(c.relation == annot);
    CHECK(g.domain_of(c.subject) == 1);
    CHECK(g.domain_of(c.object) == 0);
    const Edge r = random_baseline(g, {annot, next}, rng, 1000);
    seen_rel.insert(r.relation);
    CHECK(g.domain_of(r.subject) == g.relations()[r.relation].source_domain);
    CHECK(g.domain_of(r.object) == g.relations()[r.relation].target_domain);
  }
  CHECK(seen_rel == std::set<std::size_t>{annot, next});
  // no allowed relation can fit: the draw budget runs out
  Rng r2(9);
  CHECK_THROWS_AS(random_baseline(g, {}, r2, 10), DataError);
}

TEST_CASE("evaluate_revisions bookkeeping") {
  auto full = testing::graph(kAxioms, kDomains);
  const auto split = split_edges_stratified(full, 0.4, 21);
  auto train = add_reverse_edges(split.train);
  ParameterSet params;
  Rng rng(22);
  const auto gnn = HeteroGnn::create(train, 2, std::vector<DomainDims>(2, DomainDims{2, 4}), params, rng);
  LinkEvalOptions opt;
  opt.seed = 23;
  const auto rep = evaluate_revisions(gnn, params, train, split.test, opt);

  REQUIRE(rep.results.size() == 3 * split.test.size());
  std::map<std::size_t, std::size_t> expected;
  for (const auto& e : split.test) ++expected[e.relation];
  REQUIRE(rep.summary.size() == expected.size());
  for (const auto& s : rep.summary) CHECK(s.n_test == expected.at(s.relation));

  std::size_t real_count = 0;
  for (const auto& r : rep.results) {
    CHECK(r.distance >= 0.0);
    if (r.kind != BaselineKind::Real) continue;
    CHECK(std::find(split.test.begin(), split.test.end(), r.edge) != split.test.end());
    ++real_count;
  }
  CHECK(real_count == split.test.size());
  // ranks are a permutation of 1..N within each (relation, kind), largest first
  std::size_t pos = 0;
  for (const auto& s : rep.summary) {
    for (int kind = 0; kind < 3; ++kind) {
      std::vector<const RevisionResult*> grp;
      for (std::size_t i = 0; i < s.n_test; ++i) grp.push_back(&rep.results[pos++]);
      std::vector<std::size_t> ranks;
      for (const auto* r : grp) {
        CHECK(static_cast<int>(r->kind) == kind);
        ranks.push_back(r->rank);
      }
      std::sort(ranks.begin(), ranks.end());
      for (std::size_t i = 0; i < ranks.size(); ++i) CHECK(ranks[i] == i + 1);
      for (const auto* x : grp) {
        for (const auto* y : grp) {
          if (x->distance > y->distance) CHECK(x->rank < y->rank);
        }
      }
      double mean = 0.0;
      for (const auto* r : grp) mean += r->distance;
      mean /= static_cast<double>(grp.size());
      const double want = kind == 0 ? s.mean_real : kind == 1 ? s.mean_constrained : s.mean_random;
      CHECK(mean == Approx(want).epsilon(1e-12));
    }
  }

  // deterministic per seed; independent of the order of the test edges
  CHECK(format_results(evaluate_revisions(gnn, params, train, split.test, opt), train) == format_results(rep, train));
  auto reversed = split.test;
  std::reverse(reversed.begin(), reversed.end());
  const auto rep2 = evaluate_revisions(gnn, params, train, reversed, opt);
  std::map<Edge, double> real1, real2;
  for (const auto& r : rep.results) {
    if (r.kind == BaselineKind::Real) real1[r.edge] = r.distance;
  }
  for (const auto& r : rep2.results) {
    if (r.kind == BaselineKind::Real) real2[r.edge] = r.distance;
  }
  CHECK(real1 == real2);

  const auto text = format_summary(rep, train);
  CHECK(text.starts_with("relation\tn_test\tmean_real\tmean_constrained\tmean_random\tu_real_vs_random\t"
                         "p_real_vs_random\tu_real_vs_constrained\tp_real_vs_constrained\n"));
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == rep.summary.size() + 1);
  const auto res = format_results(rep, train);
  CHECK(res.starts_with("relation\tkind\tedge\tdistance\n"));
  CHECK(static_cast<std::size_t>(std::count(res.begin(), res.end(), '\n')) == rep.results.size() + 1);
  CHECK(res.find("\treal\t") != std::string::npos);
  CHECK(res.find("\tconstrained\t") != std::string::npos);
  CHECK(res.find("\trandom\t") != std::string::npos);
}

TEST_CASE("duplicate test edges give zero distance and p = 1") {
  auto t = toy(2, 9, true);
  std::vector<Edge> dup;
  for (const auto& e : t.g.edges()) {
    if (!t.g.relations()[e.relation].is_reverse() && t.g.relations()[e.relation].name == "next") dup.push_back(e);
  }
  REQUIRE(dup.size() == 4);
  LinkEvalOptions opt;
  opt.seed = 1;
  const auto rep = evaluate_revisions(t.gnn, t.params, t.g, dup, opt);
  for (const auto& r : rep.results) {
    if (r.kind == BaselineKind::Real) CHECK(r.distance == 0.0);
  }
  REQUIRE(rep.summary.size() == 1);
  CHECK(rep.summary[0].mean_real == 0.0);

  // every kind zero: identical samples
  const std::vector<double> zeros(4, 0.0);
  const auto u = mann_whitney_u(zeros, zeros);
  CHECK(u.u == 8.0);
  CHECK(u.p == Approx(1.0).epsilon(1e-12));
  CHECK(mann_whitney_normal_p(std::vector<double>(20, 0.0), std::vector<double>(20, 0.0)) == Approx(1.0));
}
