#include "boxgnn/predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "boxgnn/errors.hpp"

namespace boxgnn {

CombinerKind parse_combiner(const std::string& s) {
  if (s == "product") return CombinerKind::Product;
  if (s == "bilinear") return CombinerKind::Bilinear;
  if (s == "intersection") return CombinerKind::Intersection;
  if (s == "concatenation") return CombinerKind::Concatenation;
  throw ConfigError("unknown combiner '" + s + "' (expected product, bilinear, intersection or concatenation)");
}

std::string to_string(CombinerKind k) {
  switch (k) {
    case CombinerKind::Product: return "product";
    case CombinerKind::Bilinear: return "bilinear";
    case CombinerKind::Intersection: return "intersection";
    case CombinerKind::Concatenation: return "concatenation";
  }
  return "product";
}

bool is_symmetric(CombinerKind k) { return k != CombinerKind::Concatenation; }

std::size_t combined_width(CombinerKind k, std::size_t w) { return k == CombinerKind::Concatenation ? 2 * w : w; }

std::vector<double> combine(const std::vector<double>& x1, const std::vector<double>& x2, CombinerKind kind,
                            const Tensor* w) {
  const std::size_t n = x1.size();
  if (kind == CombinerKind::Concatenation) {
    std::vector<double> out(x1);
    out.insert(out.end(), x2.begin(), x2.end());
    return out;
  }
  if (x2.size() != n) throw ShapeError("combine: embedding widths differ");
  std::vector<double> out(n);
  switch (kind) {
    case CombinerKind::Product:
      for (std::size_t i = 0; i < n; ++i) out[i] = x1[i] * x2[i];
      break;
    case CombinerKind::Bilinear: {
      if (!w || w->rows() != n || w->cols() != n) throw ShapeError("combine: bilinear matrix must be square");
      // Row-vector convention: (x W)_j = sum_i x_i W(i, j).
      std::vector<double> w1(n, 0.0), w2(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          w1[j] += x1[i] * (*w)(i, j);
          w2[j] += x2[i] * (*w)(i, j);
        }
      }
      for (std::size_t i = 0; i < n; ++i) out[i] = x1[i] * w2[i] + x2[i] * w1[i];
      break;
    }
    case CombinerKind::Intersection: {
      if (n % 2 != 0) throw ShapeError("combine: intersection needs even-width latents");
      const std::size_t h = n / 2;
      for (std::size_t i = 0; i < h; ++i) {
        const double z1 = x1[i], z2 = x2[i];
        out[i] = std::max(z1, z2);
        out[h + i] = std::min(z1 + softplus(x1[h + i]), z2 + softplus(x2[h + i]));
      }
      break;
    }
    case CombinerKind::Concatenation: break;
  }
  return out;
}

ad::Var combine(ad::Var x1, ad::Var x2, CombinerKind kind, std::optional<ad::Var> w) {
  if (kind == CombinerKind::Concatenation) return ad::concat(x1, x2);
  if (x1.cols() != x2.cols() || x1.rows() != x2.rows()) throw ShapeError("combine: embedding shapes differ");
  switch (kind) {
    case CombinerKind::Product: return ad::mul(x1, x2);
    case CombinerKind::Bilinear: {
      if (!w || w->rows() != x1.cols() || w->cols() != x1.cols()) {
        throw ShapeError("combine: bilinear matrix must be square");
      }
      return ad::add(ad::mul(x1, ad::matmul(x2, *w)), ad::mul(x2, ad::matmul(x1, *w)));
    }
    case CombinerKind::Intersection: {
      auto b1 = boxes_from_latents(x1);
      auto b2 = boxes_from_latents(x2);
      auto inter = intersection(b1, b2);
      return ad::concat(inter.lower, inter.upper);
    }
    case CombinerKind::Concatenation: break;
  }
  return ad::concat(x1, x2);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FitnessModel::decay_params() const {
  auto out = gnn.weight_params();
  if (bilinear) out.push_back(*bilinear);
  for (const auto& [w, b] : head) out.push_back(w);
  return out;
}

namespace {

void check_model_config(const KnowledgeGraph& g, const FitnessModelConfig& cfg) {
  if (cfg.gene_domain >= g.num_domains()) throw ConfigError("gene domain index out of range");
}

void add_head(FitnessModel& m, const FitnessModelConfig& cfg, Rng& rng) {
  const std::size_t w = m.gnn.width(m.gnn.depth(), m.gene_domain);
  if (cfg.combiner == CombinerKind::Bilinear) m.bilinear = m.params.add("combiner/w", glorot_uniform(w, w, rng));
  std::size_t in = combined_width(cfg.combiner, w);
  std::vector<std::size_t> sizes = cfg.hidden;
  sizes.push_back(1);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::string prefix = "head/" + std::to_string(i) + "/";
    const std::size_t wi = m.params.add(prefix + "w", glorot_uniform(in, sizes[i], rng));
    const std::size_t bi = m.params.add(prefix + "bias", Tensor(1, sizes[i], 0.0));
    m.head.emplace_back(wi, bi);
    in = sizes[i];
  }
}

}  // namespace

FitnessModel create_fitness_model(const KnowledgeGraph& g, const FitnessModelConfig& cfg, std::uint64_t seed) {
  check_model_config(g, cfg);
  FitnessModel m;
  Rng rng(seed);
  m.gnn = HeteroGnn::create(g, cfg.depth, cfg.dims, m.params, rng);
  m.combiner = cfg.combiner;
  m.gene_domain = cfg.gene_domain;
  add_head(m, cfg, rng);
  return m;
}

FitnessModel attach_fitness_model(const KnowledgeGraph& g, const FitnessModelConfig& cfg,
                                  std::vector<ModuleKey> modules, ParameterSet params) {
  check_model_config(g, cfg);
  FitnessModel m;
  m.params = std::move(params);
  m.gnn = HeteroGnn::attach(g, cfg.depth, cfg.dims, std::move(modules), m.params);
  m.combiner = cfg.combiner;
  m.gene_domain = cfg.gene_domain;
  auto find = [&](const std::string& name) {
    if (!m.params.contains(name)) throw DataError("checkpoint lacks parameter '" + name + "'");
    return m.params.index(name);
  };
  if (cfg.combiner == CombinerKind::Bilinear) m.bilinear = find("combiner/w");
  for (std::size_t i = 0; i <= cfg.hidden.size(); ++i) {
    const std::string prefix = "head/" + std::to_string(i) + "/";
    m.head.emplace_back(find(prefix + "w"), find(prefix + "bias"));
  }
  return m;
}

ad::Var head_forward(const FitnessModel& m, const std::vector<ad::Var>& bound, ad::Var features) {
  ad::Var h = features;
  for (std::size_t i = 0; i < m.head.size(); ++i) {
    auto pre = ad::matmul(h, bound[m.head[i].first]);
    h = ad::add(pre, ad::broadcast(bound[m.head[i].second], pre.rows(), pre.cols()));
    if (i + 1 < m.head.size()) h = ad::relu(h);
  }
  return h;
}

double head_value(const FitnessModel& m, const std::vector<double>& features) {
  ad::Tape tape;
  auto bound = m.params.bind(tape);
  auto out = head_forward(m, bound, tape.constant(Tensor(1, features.size(), features)));
  return out.value().item();
}

Tensor gene_embeddings(const FitnessModel& m, const GnnIndex& idx) {
  ad::Tape tape;
  auto bound = m.params.bind(tape);
  auto out = m.gnn.forward(bound, idx);
  return out.layers.back()[m.gene_domain].value();
}

namespace {

std::vector<double> embedding_row(const Tensor& emb, const KnowledgeGraph& g, std::size_t gene, std::size_t domain) {
  if (gene >= g.num_classes() || g.domain_of(gene) != domain) {
    throw DataError("class is not a gene: " + (gene < g.num_classes() ? g.class_id(gene) : std::to_string(gene)));
  }
  auto r = emb.row_span(g.local_index(gene));
  return {r.begin(), r.end()};
}

}  // namespace

double predict_pair(const FitnessModel& m, const KnowledgeGraph& g, std::size_t gene_a, std::size_t gene_b) {
  const auto emb = gene_embeddings(m, m.gnn.index(g));
  auto x1 = embedding_row(emb, g, gene_a, m.gene_domain);
  auto x2 = embedding_row(emb, g, gene_b, m.gene_domain);
  const Tensor* w = m.bilinear ? &m.params.value(*m.bilinear) : nullptr;
  return head_value(m, combine(x1, x2, m.combiner, w));
}

std::vector<double> predict_pairs(const FitnessModel& m, const KnowledgeGraph& g, const GnnIndex& idx,
                                  const std::vector<FitnessRecord>& pairs) {
  if (pairs.empty()) return {};
  ad::Tape tape;
  auto bound = m.params.bind(tape);
  auto out = m.gnn.forward(bound, idx);
  auto genes = out.layers.back()[m.gene_domain];
  std::vector<std::size_t> ia, ib;
  for (const auto& r : pairs) {
    for (std::size_t x : {r.gene_a, r.gene_b}) {
      if (x >= g.num_classes() || g.domain_of(x) != m.gene_domain) throw DataError("class is not a gene");
    }
    ia.push_back(g.local_index(r.gene_a));
    ib.push_back(g.local_index(r.gene_b));
  }
  std::optional<ad::Var> w;
  if (m.bilinear) w = bound[*m.bilinear];
  auto feats = combine(ad::gather_rows(genes, ia), ad::gather_rows(genes, ib), m.combiner, w);
  const auto& v = head_forward(m, bound, feats).value();
  return v.values();
}

double predict_triple(const FitnessModel& m, const KnowledgeGraph& g, std::size_t g1, std::size_t g2,
                      std::size_t g3) {
  if (m.combiner != CombinerKind::Product) throw ConfigError("triple prediction requires the product combiner");
  std::array<std::size_t, 3> genes{g1, g2, g3};
  std::sort(genes.begin(), genes.end());
  const auto emb = gene_embeddings(m, m.gnn.index(g));
  auto x = embedding_row(emb, g, genes[0], m.gene_domain);
  for (std::size_t k = 1; k < 3; ++k) {
    auto y = embedding_row(emb, g, genes[k], m.gene_domain);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
  }
  return head_value(m, x);
}

double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.size() != y_hat.size() || y.size() < 2) throw std::invalid_argument("r_squared: need two equal-length series");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  }
  if (ss_tot == 0.0) throw std::domain_error("r_squared: y is constant");
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------

FitnessObjective::FitnessObjective(const FitnessModel& m, const KnowledgeGraph& g, const TrainConfig& cfg)
    : m_(&m), g_(&g), idx_(m.gnn.index(g)), sampling_(cfg.sampling), decay_(m.decay_params()),
      alpha_(cfg.weights.alpha), lambda_(cfg.weights.lambda_wd) {
  const bool semantic_on = cfg.weights.alpha > 0.0 || cfg.record_semantic;
  if (semantic_on && !cfg.semantic_domains.empty()) {
    pairs_ = hierarchy_pairs(g, cfg.semantic_domains, false);
    if (cfg.weights.gamma_random > 0.0) {
      anc_ = ancestor_table(g);
      desc_.resize(g.num_classes());
      for (std::size_t c = 0; c < g.num_classes(); ++c) desc_[c] = descendants(g, c);
    }
  }
  for (std::size_t l = cfg.include_prior_layer ? 0 : 1; l <= m.gnn.depth(); ++l) layers_.push_back(l);
  spec_.kind = cfg.loss_kind;
  spec_.volume = VolumeMode::smoothed(cfg.gumbel_temp);
  spec_.norm = cfg.norm;
  spec_.beta_neg = cfg.weights.beta_neg;
  spec_.gamma_random = cfg.weights.gamma_random;
}

void FitnessObjective::resample(Rng& rng) {
  if (!anc_.empty()) resample_random_negatives(*g_, pairs_, sampling_, anc_, desc_, rng);
}

FitnessObjective::Value FitnessObjective::operator()(ad::Tape& tape, const std::vector<ad::Var>& bound,
                                                     const std::vector<FitnessRecord>& batch) const {
  const FitnessModel& m = *m_;
  std::vector<std::size_t> ia, ib;
  Tensor y(batch.size(), 1);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    ia.push_back(g_->local_index(batch[k].gene_a));
    ib.push_back(g_->local_index(batch[k].gene_b));
    y(k, 0) = batch[k].fitness;
  }
  auto out = m.gnn.forward(bound, idx_);
  auto genes = out.layers.back()[m.gene_domain];
  std::optional<ad::Var> w;
  if (m.bilinear) w = bound[*m.bilinear];
  auto feats = combine(ad::gather_rows(genes, ia), ad::gather_rows(genes, ib), m.combiner, w);
  auto pred = head_forward(m, bound, feats);
  Value v;
  v.mse = ad::mean(ad::square(ad::sub(pred, tape.constant(std::move(y)))));
  v.total = v.mse;
  if (!pairs_.empty()) {
    std::vector<std::vector<BoxBatch>> boxes;
    for (const auto& layer : out.layers) boxes.push_back(boxes_at_layer(layer));
    auto sem = semantic_loss_total(tape, boxes, layers_, pairs_, spec_);
    if (alpha_ > 0.0) v.total = ad::add(v.total, ad::scale(sem.total, alpha_));
    v.semantic = std::move(sem.terms);
  }
  if (lambda_ > 0.0) {
    for (std::size_t p : decay_) v.total = ad::add(v.total, ad::scale(ad::sum(ad::square(bound[p])), lambda_));
  }
  return v;
}

std::vector<EpochMetrics> train_fitness(FitnessModel& m, const KnowledgeGraph& g, const FitnessDataset& train,
                                        const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (train.records.empty()) throw DataError("no training pairs");
  FitnessObjective objective(m, g, cfg);

  Rng neg_rng(Rng::derive(cfg.seed, 1));
  Rng batch_rng(Rng::derive(cfg.seed, 2));
  AdamState adam;
  adam.lr = cfg.lr;
  std::vector<std::size_t> order(train.records.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : std::min(cfg.batch_size, order.size());

  std::vector<EpochMetrics> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = decayed_lr(cfg.lr, cfg.lr_decay, static_cast<long>(epoch));
    objective.resample(neg_rng);
    if (batch < order.size()) batch_rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch + 1;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<FitnessRecord> records;
      for (std::size_t k = start; k < end; ++k) records.push_back(train.records[order[k]]);
      ad::Tape tape;
      auto bound = m.params.bind(tape);
      auto v = objective(tape, bound, records);
      const double tv = v.total.value().item();
      if (!std::isfinite(tv)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      tape.backward(v.total);
      adam_step(m.params, ParameterSet::gradients(bound), adam);
      em.mse += v.mse.value().item();
      em.total += tv;
      em.semantic = std::move(v.semantic);
      ++n_batches;
    }
    em.mse /= static_cast<double>(n_batches);
    em.total /= static_cast<double>(n_batches);
    history.push_back(std::move(em));
  }
  return history;
}

}  // namespace boxgnn
