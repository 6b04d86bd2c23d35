#include <cmath>

#include "boxgnn/box_ops.hpp"
#include "boxgnn/embed_trainer.hpp"
#include "boxgnn/errors.hpp"
#include "boxgnn/link_eval.hpp"
#include "boxgnn/synthetic.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace boxgnn;
using doctest::Approx;
using testing::cls;

namespace {

std::vector<Box> prior_boxes(const Tensor& latents) {
  ad::Tape tape;
  return to_boxes(boxes_from_latents(tape.leaf(latents)));
}

Box final_box(const FinalBoxes& fb, const KnowledgeGraph& g, std::size_t c) {
  const std::size_t d = g.domain_of(c), i = g.local_index(c);
  const auto lo = fb.lower[d].row_span(i), hi = fb.upper[d].row_span(i);
  return Box{{lo.begin(), lo.end()}, {hi.begin(), hi.end()}};
}

double sibling_overlap(const KnowledgeGraph& g, const FinalBoxes& fb) {
  double v = 0.0;
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    for (const auto& [a, b] : g.disjoint(d)) v += hard_volume(intersect(final_box(fb, g, a), final_box(fb, g, b)));
  }
  return v;
}

struct Joint {
  ParameterSet params;
  HeteroGnn gnn;
};

Joint joint_model(const KnowledgeGraph& g, std::size_t depth, std::size_t dim, std::uint64_t seed) {
  Joint j;
  Rng rng(seed);
  j.gnn = HeteroGnn::create(g, depth, std::vector<DomainDims>(g.num_domains(), DomainDims{dim, 2 * dim}), j.params, rng);
  return j;
}

std::vector<std::size_t> all_domains(const KnowledgeGraph& g) {
  std::vector<std::size_t> d(g.num_domains());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = i;
  return d;
}

}  // namespace

TEST_CASE("default configurations") {
  const PriorTrainConfig p;
  CHECK(p.dim == 10);
  CHECK(p.epochs == 1000);
  CHECK(p.lr == 1e-2);
  CHECK(p.reg_lambda == 1e-3);
  CHECK(p.gumbel_temp == 0.25);
  CHECK(p.neg_ratio == 2.0);

  const JointTrainConfig j;
  CHECK(j.epochs == 500);
  CHECK(j.lr == 0.1);
  CHECK(j.lr_decay == 0.001);
  CHECK(j.reg_lambda == 0.001);
  CHECK(j.small_box_lambda == 0.01);
  CHECK(j.beta_neg == 0.5);
  CHECK(j.gamma_random == 1.0);
  CHECK(j.l0 == 1.0);
}

TEST_CASE("prior training nests a chain of three classes") {
  const auto g = testing::graph("b\tsubClassOf\ta\nc\tsubClassOf\tb\n", "a\tD\nb\tD\nc\tD\n");
  for (std::uint64_t seed : {1, 2, 3}) {
    PriorTrainConfig cfg;
    cfg.dim = 4;
    const auto boxes = prior_boxes(train_priors(g, 0, cfg, seed));
    for (const auto& [sub, super] : g.hierarchy(0)) {
      CHECK(loss_distance_pos(boxes[g.local_index(sub)], boxes[g.local_index(super)]) < 1e-2);
    }
  }
}

TEST_CASE("single-class domain only shrinks") {
  const auto g = testing::graph("", "a\tD\n");
  PriorTrainConfig cfg;
  cfg.dim = 3;
  cfg.epochs = 200;
  Rng rng(4);
  const auto before = prior_boxes(random_prior_latents(1, cfg.dim, rng))[0];
  std::vector<LossReport> report;
  const auto after = prior_boxes(train_priors(g, 0, cfg, 4, &report))[0];
  for (std::size_t i = 0; i < cfg.dim; ++i) CHECK(after.upper[i] - after.lower[i] < before.upper[i] - before.lower[i]);
  for (const auto& r : report) {
    CHECK(r.pos == 0.0);
    CHECK(r.neg == 0.0);
  }
}

TEST_CASE("prior training is reproducible and seed dependent") {
  const auto g = hierarchy_fixture(1, 3, 2, 5);
  PriorTrainConfig cfg;
  cfg.dim = 3;
  cfg.epochs = 50;
  const auto a = train_priors(g, 0, cfg, 7);
  CHECK(train_priors(g, 0, cfg, 7).values() == a.values());
  CHECK(train_priors(g, 0, cfg, 8).values() != a.values());
}

TEST_CASE("prior training errors") {
  KnowledgeGraph::Builder b;
  b.add_domain("empty");
  const auto g = b.build();
  CHECK_THROWS_AS(train_priors(g, 0, PriorTrainConfig{}, 1), DataError);
  CHECK_THROWS_AS(train_priors(g, 3, PriorTrainConfig{}, 1), DataError);
  const auto h = testing::graph("", "a\tD\n");
  PriorTrainConfig zero;
  zero.epochs = 0;
  CHECK_THROWS_AS(train_priors(h, 0, zero, 1), ConfigError);
  PriorTrainConfig huge;
  huge.lr = 1e300;
  huge.epochs = 5;
  CHECK_THROWS_AS(train_priors(testing::graph("b\tsubClassOf\ta\n", "a\tD\nb\tD\n"), 0, huge, 1), DivergenceError);
}

TEST_CASE("learning rate decay") {
  for (long k : {0L, 1L, 7L, 499L}) {
    double iterated = 0.1;
    for (long i = 0; i < k; ++i) iterated *= 1.0 - 0.001;
    CHECK(decayed_lr(0.1, 0.001, k) == Approx(iterated).epsilon(1e-13));
    CHECK(decayed_lr(0.1, 0.001, k) == 0.1 * std::pow(0.999, static_cast<double>(k)));
  }
  CHECK(decayed_lr(0.1, 0.001, 0) == 0.1);

  // decay 1 leaves a zero rate after the first epoch: further epochs are no-ops
  const auto g = hierarchy_fixture(2, 2, 1, 9);
  JointTrainConfig cfg;
  cfg.lr_decay = 1.0;
  cfg.epochs = 1;
  auto one = joint_model(g, 1, 2, 10);
  train_joint(g, one.gnn, one.params, cfg, LossKind::Distance, 11);
  cfg.epochs = 4;
  auto four = joint_model(g, 1, 2, 10);
  train_joint(g, four.gnn, four.params, cfg, LossKind::Distance, 11);
  auto untouched = joint_model(g, 1, 2, 10);
  bool moved = false;
  for (std::size_t p = 0; p < one.params.size(); ++p) {
    CHECK(four.params.value(p).values() == one.params.value(p).values());
    moved = moved || one.params.value(p).values() != untouched.params.value(p).values();
  }
  CHECK(moved);
}

TEST_CASE("positive-only joint training lowers the positive loss") {
  const auto g = hierarchy_fixture(2, 3, 2, 12);
  for (LossKind kind : {LossKind::Distance, LossKind::Overlap}) {
    auto m = joint_model(g, 1, 3, 13);
    JointTrainConfig cfg;
    cfg.epochs = 100;
    cfg.beta_neg = 0.0;
    cfg.gamma_random = 0.0;
    cfg.small_box_lambda = 0.0;
    std::vector<LossReport> report;
    train_joint(g, m.gnn, m.params, cfg, kind, 14, &report);
    double first = 0.0, last = 0.0;
    for (const auto& r : report) {
      if (r.epoch == 1) first += r.pos;
      if (r.epoch == cfg.epochs) last += r.pos;
    }
    CHECK(last < first);
  }
}

TEST_CASE("sibling boxes separate under joint training") {
  const auto g = hierarchy_fixture(1, 3, 0, 15);
  REQUIRE(g.disjoint(0).size() == 3);
  // five initializations with overlapping siblings
  int runs = 0;
  for (std::uint64_t seed = 1; runs < 5; ++seed) {
    auto m = joint_model(g, 1, 2, seed);
    const double before = sibling_overlap(g, final_boxes(m.gnn, m.params, g));
    if (before == 0.0) continue;
    ++runs;
    JointTrainConfig cfg;
    cfg.epochs = 200;
    train_joint(g, m.gnn, m.params, cfg, LossKind::Overlap, seed);
    const double after = sibling_overlap(g, final_boxes(m.gnn, m.params, g));
    CHECK_MESSAGE(after < before, "seed " << seed << ": " << before << " -> " << after);
  }
}

TEST_CASE("distance training fits a small hierarchy") {
  // two domains of 10 classes over three levels
  const auto g = hierarchy_fixture(2, 3, 2, 16);
  REQUIRE(g.num_classes() == 20);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = joint_model(g, 1, 4, 100 + seed);
    JointTrainConfig cfg;
    cfg.epochs = 2000;
    train_joint(g, m.gnn, m.params, cfg, LossKind::Distance, seed);
    const double loss = mean_positive_distance_loss(g, m.gnn, m.params, all_domains(g), true);
    CHECK_MESSAGE(loss < 1e-3, "seed " << seed << ": " << loss);
  }
}

TEST_CASE("two-dimensional demo configuration") {
  auto g = hierarchy_fixture(1, 4, 2, 17);
  g = augment_sibling_disjointness(g, g.classes_in(0)[0]);
  auto m = joint_model(g, 1, 2, 18);
  std::vector<LossReport> report;
  train_joint(g, m.gnn, m.params, JointTrainConfig{}, LossKind::Overlap, 19, &report);
  // one line per epoch and layer for the single domain
  CHECK(report.size() == 500 * 2);
  const auto text = format_loss_report(report, g);
  CHECK(text.starts_with("epoch\tlayer\tdomain\tpos_loss\tneg_loss\n1\t0\t" + g.domain_name(0) + "\t"));
  for (const auto& r : report) {
    CHECK(std::isfinite(r.pos));
    CHECK(std::isfinite(r.neg));
  }
}

TEST_CASE("joint training is reproducible") {
  const auto g = hierarchy_fixture(2, 2, 2, 20);
  JointTrainConfig cfg;
  cfg.epochs = 30;
  auto a = joint_model(g, 2, 2, 21);
  auto b = joint_model(g, 2, 2, 21);
  train_joint(g, a.gnn, a.params, cfg, LossKind::Overlap, 22);
  train_joint(g, b.gnn, b.params, cfg, LossKind::Overlap, 22);
  for (std::size_t p = 0; p < a.params.size(); ++p) CHECK(a.params.value(p).values() == b.params.value(p).values());
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_joint(g, a.gnn, a.params, cfg, LossKind::Overlap, 22), ConfigError);
}
