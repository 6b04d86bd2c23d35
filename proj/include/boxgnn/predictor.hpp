#pragma once

// Double-deletion fitness regression on top of the heterogeneous GNN.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/gnn.hpp"
#include "boxgnn/kg.hpp"
#include "boxgnn/params.hpp"
#include "boxgnn/semantic_loss.hpp"

namespace boxgnn {

enum class CombinerKind { Product, Bilinear, Intersection, Concatenation };

CombinerKind parse_combiner(const std::string& s);
std::string to_string(CombinerKind k);
bool is_symmetric(CombinerKind k);

/// Width of the combined vector for gene embeddings of width w.
std::size_t combined_width(CombinerKind k, std::size_t w);

/// Plain-vector combiner. Bilinear needs the square matrix `w`; Intersection
/// reads both inputs as box latents and returns the corners of the
/// intersection (lower corners then upper corners, possibly inverted).
std::vector<double> combine(const std::vector<double>& x1, const std::vector<double>& x2, CombinerKind kind,
                            const Tensor* w = nullptr);
/// Batched combiner over rows.
ad::Var combine(ad::Var x1, ad::Var x2, CombinerKind kind, std::optional<ad::Var> w = std::nullopt);

struct FitnessModelConfig {
  std::size_t depth = 2;
  std::vector<DomainDims> dims;
  CombinerKind combiner = CombinerKind::Product;
  std::vector<std::size_t> hidden = {64};
  std::size_t gene_domain = 0;
};

struct FitnessModel {
  ParameterSet params;
  HeteroGnn gnn;
  CombinerKind combiner = CombinerKind::Product;
  std::optional<std::size_t> bilinear;
  std::vector<std::pair<std::size_t, std::size_t>> head;  // (weights, bias), relu between layers
  std::size_t gene_domain = 0;

  /// Weight matrices of the GNN, combiner and head.
  std::vector<std::size_t> decay_params() const;
};

FitnessModel create_fitness_model(const KnowledgeGraph& g, const FitnessModelConfig& cfg, std::uint64_t seed);
/// Rebinds a stored parameter set (see HeteroGnn::attach).
FitnessModel attach_fitness_model(const KnowledgeGraph& g, const FitnessModelConfig& cfg,
                                  std::vector<ModuleKey> modules, ParameterSet params);

/// Head applied to combined feature rows; returns rows x 1.
ad::Var head_forward(const FitnessModel& m, const std::vector<ad::Var>& bound, ad::Var features);
/// Head on one plain feature vector.
double head_value(const FitnessModel& m, const std::vector<double>& features);

/// Final-layer gene embeddings (rows follow the gene domain's class order).
Tensor gene_embeddings(const FitnessModel& m, const GnnIndex& idx);

double predict_pair(const FitnessModel& m, const KnowledgeGraph& g, std::size_t gene_a, std::size_t gene_b);
std::vector<double> predict_pairs(const FitnessModel& m, const KnowledgeGraph& g, const GnnIndex& idx,
                                  const std::vector<FitnessRecord>& pairs);
/// Product combiner only: head(x1 * x2 * x3), with genes taken in index order.
double predict_triple(const FitnessModel& m, const KnowledgeGraph& g, std::size_t g1, std::size_t g2,
                      std::size_t g3);

/// 1 - SS_res / SS_tot. Throws std::domain_error for constant y.
double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat);

struct TrainConfig {
  std::size_t epochs = 160;
  double lr = 1e-4;
  double lr_decay = 0.0;
  SemanticLossWeights weights;
  LossKind loss_kind = LossKind::Distance;
  double gumbel_temp = 0.25;
  NormKind norm = NormKind::L2;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  /// 0 trains full-batch.
  std::size_t batch_size = 0;
  /// Domains receiving the semantic loss.
  std::vector<std::size_t> semantic_domains;
  bool include_prior_layer = true;
  NegativeSampling sampling{1.0, true};
  /// Record semantic loss values even when alpha is 0.
  bool record_semantic = true;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mse = 0.0;
  double total = 0.0;
  std::vector<SemanticTerm> semantic;
};

/// Training objective MSE + alpha * semantic + lambda * ||w||^2 of one batch.
class FitnessObjective {
 public:
  FitnessObjective(const FitnessModel& m, const KnowledgeGraph& g, const TrainConfig& cfg);

  struct Value {
    ad::Var total;
    ad::Var mse;
    std::vector<SemanticTerm> semantic;
  };
  Value operator()(ad::Tape& tape, const std::vector<ad::Var>& bound, const std::vector<FitnessRecord>& batch) const;
  /// Redraws random negatives when they carry weight.
  void resample(Rng& rng);

  const GnnIndex& index() const { return idx_; }

 private:
  const FitnessModel* m_;
  const KnowledgeGraph* g_;
  GnnIndex idx_;
  std::vector<DomainPairs> pairs_;
  std::vector<std::vector<std::size_t>> anc_, desc_;
  std::vector<std::size_t> layers_;
  SemanticLossSpec spec_;
  NegativeSampling sampling_;
  std::vector<std::size_t> decay_;
  double alpha_ = 0.0;
  double lambda_ = 0.0;
};

/// Minimizes MSE + alpha * semantic + lambda * ||w||^2 with Adam.
/// Throws DivergenceError on a non-finite loss.
std::vector<EpochMetrics> train_fitness(FitnessModel& m, const KnowledgeGraph& g, const FitnessDataset& train,
                                        const TrainConfig& cfg);

}  // namespace boxgnn
