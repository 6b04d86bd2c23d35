#include "boxgnn/embed_trainer.hpp"

#include <cmath>
#include <numeric>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

namespace {

struct NegativeTables {
  std::vector<std::vector<std::size_t>> ancestors;
  std::vector<std::vector<std::size_t>> descendants;
};

NegativeTables negative_tables(const KnowledgeGraph& g) {
  NegativeTables t;
  t.ancestors = ancestor_table(g);
  t.descendants.resize(g.num_classes());
  for (std::size_t c = 0; c < g.num_classes(); ++c) t.descendants[c] = descendants(g, c);
  return t;
}

void append_report(std::vector<LossReport>* report, std::size_t epoch, const std::vector<SemanticTerm>& terms) {
  if (!report) return;
  for (const auto& t : terms) {
    const double n = t.num_classes > 0 ? static_cast<double>(t.num_classes) : 1.0;
    report->push_back({epoch, t.layer, t.domain, t.positive / n, t.negative / n});
  }
}

}  // namespace

Tensor train_priors(const KnowledgeGraph& g, std::size_t domain, const PriorTrainConfig& cfg, std::uint64_t seed,
                    std::vector<LossReport>* report) {
  if (domain >= g.num_domains()) throw DataError("prior training: domain index out of range");
  const std::size_t n = g.classes_in(domain).size();
  if (n == 0) throw DataError("prior training: domain " + g.domain_name(domain) + " has no classes");
  if (cfg.dim == 0 || cfg.epochs == 0) throw ConfigError("prior training needs dim >= 1 and epochs >= 1");

  Rng rng(seed);
  ParameterSet params;
  params.add("prior", random_prior_latents(n, cfg.dim, rng));
  auto pairs = hierarchy_pairs(g, {domain}, cfg.transitive);
  const auto tables = negative_tables(g);
  const NegativeSampling sampling{cfg.neg_ratio, cfg.exclude_descendants};

  SemanticLossSpec spec;
  spec.kind = cfg.loss_kind;
  spec.volume = VolumeMode::smoothed(cfg.gumbel_temp);
  spec.beta_neg = 1.0;
  spec.gamma_random = 1.0;

  AdamState adam;
  adam.lr = cfg.lr;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    resample_random_negatives(g, pairs, sampling, tables.ancestors, tables.descendants, rng);
    ad::Tape tape;
    auto bound = params.bind(tape);
    std::vector<std::vector<BoxBatch>> boxes(1);
    boxes[0].resize(g.num_domains(), boxes_from_latents(bound[0]));
    auto sem = semantic_loss_total(tape, boxes, {0}, pairs, spec);
    auto total = ad::add(sem.total, ad::scale(ad::sum(reg_big_box(boxes[0][domain])), cfg.reg_lambda));
    if (!std::isfinite(total.value().item())) {
      throw DivergenceError("non-finite prior loss at epoch " + std::to_string(epoch));
    }
    tape.backward(total);
    adam_step(params, ParameterSet::gradients(bound), adam);
    append_report(report, epoch, sem.terms);
  }
  return params.value(0);
}

void train_joint(const KnowledgeGraph& g, const HeteroGnn& gnn, ParameterSet& params, const JointTrainConfig& cfg,
                 LossKind kind, std::uint64_t seed, std::vector<LossReport>* report) {
  if (cfg.epochs == 0) throw ConfigError("joint training needs epochs >= 1");
  std::vector<std::size_t> domains = cfg.domains;
  if (domains.empty()) {
    domains.resize(g.num_domains());
    std::iota(domains.begin(), domains.end(), 0);
  }
  const GnnIndex idx = gnn.index(g);
  auto pairs = hierarchy_pairs(g, domains, false);
  const auto tables = negative_tables(g);
  const NegativeSampling sampling{cfg.neg_ratio, cfg.exclude_descendants};
  std::vector<std::size_t> layers;
  for (std::size_t l = cfg.include_prior_layer ? 0 : 1; l <= gnn.depth(); ++l) layers.push_back(l);

  SemanticLossSpec spec;
  spec.kind = kind;
  spec.volume = VolumeMode::smoothed(cfg.gumbel_temp);
  spec.norm = cfg.norm;
  spec.beta_neg = cfg.beta_neg;
  spec.gamma_random = cfg.gamma_random;
  const auto weights = gnn.weight_params();

  Rng rng(seed);
  AdamState adam;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.lr = decayed_lr(cfg.lr, cfg.lr_decay, static_cast<long>(epoch - 1));
    if (cfg.gamma_random > 0.0) resample_random_negatives(g, pairs, sampling, tables.ancestors, tables.descendants, rng);
    ad::Tape tape;
    auto bound = params.bind(tape);
    auto out = gnn.forward(bound, idx);
    std::vector<std::vector<BoxBatch>> boxes;
    for (const auto& layer : out.layers) boxes.push_back(boxes_at_layer(layer));
    auto sem = semantic_loss_total(tape, boxes, layers, pairs, spec);
    auto total = sem.total;
    if (cfg.small_box_lambda > 0.0) {
      for (std::size_t l : layers) {
        for (std::size_t d : domains) {
          total = ad::add(total, ad::scale(ad::sum(reg_small_box(boxes[l][d], cfg.l0)), cfg.small_box_lambda));
        }
      }
    }
    if (cfg.reg_lambda > 0.0) {
      for (std::size_t p : weights) total = ad::add(total, ad::scale(ad::sum(ad::square(bound[p])), cfg.reg_lambda));
    }
    if (!std::isfinite(total.value().item())) {
      throw DivergenceError("non-finite joint loss at epoch " + std::to_string(epoch));
    }
    tape.backward(total);
    adam_step(params, ParameterSet::gradients(bound), adam);
    append_report(report, epoch, sem.terms);
  }
}

double mean_positive_distance_loss(const KnowledgeGraph& g, const HeteroGnn& gnn, const ParameterSet& params,
                                   const std::vector<std::size_t>& domains, bool include_prior_layer) {
  ad::Tape tape;
  auto bound = params.bind(tape);
  auto out = gnn.forward(bound, gnn.index(g));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t l = include_prior_layer ? 0 : 1; l < out.layers.size(); ++l) {
    for (std::size_t d : domains) {
      const auto boxes = to_boxes(boxes_from_latents(out.layers[l][d]));
      for (const auto& [sub, super] : g.hierarchy(d)) {
        sum += loss_distance_pos(boxes[g.local_index(sub)], boxes[g.local_index(super)]);
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::string format_loss_report(const std::vector<LossReport>& report, const KnowledgeGraph& g) {
  std::string out = "epoch\tlayer\tdomain\tpos_loss\tneg_loss\n";
  for (const auto& r : report) {
    out += std::to_string(r.epoch) + "\t" + std::to_string(r.layer) + "\t" + g.domain_name(r.domain) + "\t" +
           tsv::format_double(r.pos) + "\t" + tsv::format_double(r.neg) + "\n";
  }
  return out;
}

}  // namespace boxgnn
