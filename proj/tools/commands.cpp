#include "commands.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <numeric>
#include <set>

#include "boxgnn/attribution.hpp"
#include "boxgnn/checkpoint.hpp"
#include "boxgnn/config.hpp"
#include "boxgnn/embed_trainer.hpp"
#include "boxgnn/errors.hpp"
#include "boxgnn/kernels.hpp"
#include "boxgnn/link_eval.hpp"
#include "boxgnn/predictor.hpp"
#include "boxgnn/synthetic.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn::cli {

using nlohmann::json;

namespace {

RunConfig load(const CommandOptions& o, bool config_required = true) {
  RunConfig c;
  if (o.config) {
    c = load_config(*o.config);
  } else if (config_required) {
    throw ConfigError("--config is required");
  } else {
    c.base_dir = fs::current_path();
  }
  if (o.seed) {
    c.seed = *o.seed;
    c.synthetic.seed = *o.seed;
  }
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("--jobs must be at least 1");
    c.jobs = *o.jobs;
  }
  if (o.output) c.output = fs::absolute(*o.output);
  if (o.checkpoint) c.checkpoint = fs::absolute(*o.checkpoint);
  kernels::set_num_threads(c.jobs);
  omp_set_num_threads(c.jobs);
  return c;
}

fs::path output_dir(const RunConfig& c) { return c.resolve(c.output); }

fs::path checkpoint_path(const RunConfig& c) {
  return c.checkpoint ? c.resolve(*c.checkpoint) : output_dir(c) / "checkpoint.json";
}

KnowledgeGraph load_raw_graph(const RunConfig& c) {
  return parse_graph(tsv::read_file(c.resolve(c.graph.axioms)), tsv::read_file(c.resolve(c.graph.domains)));
}

std::string edge_string(const KnowledgeGraph& g, const Edge& e) {
  return g.class_id(e.subject) + "|" + g.relations()[e.relation].name + "|" + g.class_id(e.object);
}

Edge parse_edge_string(const KnowledgeGraph& g, const std::string& s) {
  const auto f = tsv::split(s, '|');
  if (f.size() != 3) throw DataError("malformed edge '" + s + "'");
  const auto a = g.find_class(f[0]);
  const auto b = g.find_class(f[2]);
  if (!a || !b) throw DataError("edge '" + s + "' names an unknown class");
  const auto r = g.find_relation(f[1], g.domain_of(*a), g.domain_of(*b));
  if (!r) throw DataError("edge '" + s + "' names an unknown relation");
  return {*a, *r, *b};
}

json module_list(const KnowledgeGraph& g, const HeteroGnn& gnn) {
  json out = json::array();
  for (const auto& k : gnn.modules()) out.push_back(HeteroGnn::key_string(g, k));
  return out;
}

std::vector<ModuleKey> parse_modules(const KnowledgeGraph& g, const json& list) {
  std::vector<ModuleKey> out;
  try {
    for (const auto& s : list) out.push_back(HeteroGnn::parse_key(g, s.get<std::string>()));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint module list is malformed: ") + e.what());
  }
  return out;
}

/// Configuration stored in a checkpoint, relative to the current config's directory.
RunConfig snapshot_config(const Checkpoint& ck, const RunConfig& current) {
  try {
    return parse_config(ck.config.dump(), current.base_dir);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
}

void require_kind(const Checkpoint& ck, std::initializer_list<std::string_view> kinds) {
  for (auto k : kinds) {
    if (ck.kind == k) return;
  }
  throw DataError("checkpoint kind '" + ck.kind + "' is not usable by this command");
}

std::vector<Edge> held_out_edges(const Checkpoint& ck, const KnowledgeGraph& raw_filtered) {
  std::vector<Edge> out;
  if (!ck.metadata.contains("held_out_edges")) return out;
  for (const auto& s : ck.metadata.at("held_out_edges")) out.push_back(parse_edge_string(raw_filtered, s.get<std::string>()));
  return out;
}

template <class F>
void parallel_for(std::size_t n, F f) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::string training_curve(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch\tmse\ttotal\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "\t" + tsv::format_double(e.mse) + "\t" + tsv::format_double(e.total) + "\n";
  }
  return out;
}

std::vector<LossReport> semantic_report(const std::vector<EpochMetrics>& history) {
  std::vector<LossReport> out;
  for (const auto& e : history) {
    for (const auto& t : e.semantic) {
      const double n = t.num_classes > 0 ? static_cast<double>(t.num_classes) : 1.0;
      out.push_back({e.epoch, t.layer, t.domain, t.positive / n, t.negative / n});
    }
  }
  return out;
}

FitnessModelConfig model_config(const RunConfig& c, const KnowledgeGraph& g) {
  FitnessModelConfig mc;
  mc.depth = c.depth;
  mc.dims = resolve_dims(c, g);
  mc.combiner = c.fitness_training.combiner;
  mc.hidden = c.fitness_training.hidden;
  mc.gene_domain = resolve_domain(g, c.gene_domain, "gene_domain");
  return mc;
}

std::string prediction_lines(const KnowledgeGraph& g, const std::vector<FitnessRecord>& recs,
                             const std::vector<double>& pred) {
  std::string out;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    out += g.class_id(recs[i].gene_a) + "\t" + g.class_id(recs[i].gene_b) + "\t" +
           tsv::format_double(recs[i].fitness) + "\t" + tsv::format_double(pred[i]) + "\n";
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void gen_synthetic(const CommandOptions& o) {
  const RunConfig c = load(o, false);
  const auto data = generate_synthetic(c.synthetic);
  const fs::path dir = output_dir(c);
  tsv::write_file(dir / "axioms.tsv", data.graph.axiom_text());
  tsv::write_file(dir / "domains.tsv", data.graph.domain_text());
  tsv::write_file(dir / "fitness.tsv", fitness_text(data.fitness, data.graph));
  std::cout << "wrote " << data.graph.num_classes() << " classes, " << data.graph.edges().size() << " edges, "
            << data.fitness.records.size() << " fitness pairs to " << dir.string() << "\n";
}

void train_priors(const CommandOptions& o) {
  const RunConfig c = load(o);
  const KnowledgeGraph g = prepare_graph(load_raw_graph(c), c);
  const auto dims = resolve_dims(c, g);
  for (const auto& [name, p] : c.prior_overrides) resolve_domain(g, name, "priors.domains." + name);

  const std::size_t nd = g.num_domains();
  std::vector<Tensor> latents(nd);
  std::vector<std::vector<LossReport>> reports(nd);
  std::vector<PriorTrainConfig> cfgs(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    auto it = c.prior_overrides.find(g.domain_name(d));
    cfgs[d] = it == c.prior_overrides.end() ? c.priors : it->second;
    cfgs[d].dim = dims[d].prior_dim;
  }
  parallel_for(nd, [&](std::size_t d) {
    latents[d] = boxgnn::train_priors(g, d, cfgs[d], Rng::derive(c.seed, d), &reports[d]);
  });

  Checkpoint ck;
  ck.kind = "priors";
  ck.config = config_to_json(c);
  ck.metadata["domains"] = json::object();
  std::vector<LossReport> all;
  for (std::size_t d = 0; d < nd; ++d) {
    ck.params.add("prior/" + g.domain_name(d), latents[d]);
    json info = {{"classes", g.classes_in(d).size()}, {"epochs", cfgs[d].epochs}, {"dim", cfgs[d].dim}};
    double pos = 0.0, neg = 0.0;
    for (const auto& r : reports[d]) {
      if (r.epoch == cfgs[d].epochs) {
        pos += r.pos;
        neg += r.neg;
      }
    }
    info["final_pos_loss"] = pos;
    info["final_neg_loss"] = neg;
    ck.metadata["domains"][g.domain_name(d)] = info;
    all.insert(all.end(), reports[d].begin(), reports[d].end());
  }
  const fs::path dir = output_dir(c);
  save_checkpoint(dir / "checkpoint.json", ck);
  tsv::write_file(dir / "metrics.tsv", format_loss_report(all, g));
  std::cout << "trained priors for " << nd << " domains; checkpoint " << (dir / "checkpoint.json").string() << "\n";
}

void train_fitness(const CommandOptions& o) {
  const RunConfig c = load(o);
  if (!c.fitness) throw ConfigError("config key 'fitness' is required for train-fitness");
  const KnowledgeGraph g = prepare_graph(load_raw_graph(c), c);
  const FitnessModelConfig mc = model_config(c, g);
  const FitnessDataset data = parse_fitness(tsv::read_file(c.resolve(*c.fitness)), g, mc.gene_domain);

  TrainConfig tc = c.fitness_training.train;
  tc.seed = c.seed;
  tc.semantic_domains.clear();
  if (c.fitness_training.semantic_domains) {
    for (const auto& name : *c.fitness_training.semantic_domains) {
      tc.semantic_domains.push_back(resolve_domain(g, name, "fitness_training.semantic_domains"));
    }
  } else {
    for (std::size_t d = 0; d < g.num_domains(); ++d) {
      if (d != mc.gene_domain) tc.semantic_domains.push_back(d);
    }
  }

  std::optional<Checkpoint> priors;
  if (c.fitness_training.prior_mode != PriorMode::Random) {
    priors = load_checkpoint(c.resolve(*c.fitness_training.prior_checkpoint));
    require_kind(*priors, {"priors"});
  }

  const auto folds = split_by_genes(data, tc.folds, c.seed);
  struct FoldResult {
    FitnessModel model;
    std::vector<EpochMetrics> history;
    std::vector<double> pred;
    double r2 = 0.0;
  };
  std::vector<FoldResult> results(folds.size());
  parallel_for(folds.size(), [&](std::size_t k) {
    FoldResult& r = results[k];
    r.model = create_fitness_model(g, mc, Rng::derive(c.seed, 100 + k));
    if (priors) {
      for (std::size_t d = 0; d < g.num_domains(); ++d) {
        const std::string name = "prior/" + g.domain_name(d);
        if (!priors->params.contains(name)) throw DataError("prior checkpoint lacks '" + name + "'");
        const Tensor& src = priors->params.value(priors->params.index(name));
        const std::size_t dst = r.model.gnn.prior_param(d);
        if (src.shape() != r.model.params.value(dst).shape()) {
          throw DataError("prior '" + name + "' has shape " + src.shape_string() + ", model expects " +
                          r.model.params.value(dst).shape_string());
        }
        r.model.params.value(dst) = src;
        r.model.params.set_trainable(dst, c.fitness_training.prior_mode == PriorMode::FineTune);
      }
    }
    TrainConfig fold_cfg = tc;
    fold_cfg.seed = Rng::derive(c.seed, 200 + k);
    r.history = boxgnn::train_fitness(r.model, g, folds[k].train, fold_cfg);
    r.pred = predict_pairs(r.model, g, r.model.gnn.index(g), folds[k].valid.records);
    std::vector<double> y;
    for (const auto& rec : folds[k].valid.records) y.push_back(rec.fitness);
    r.r2 = r_squared(y, r.pred);
  });

  const fs::path dir = output_dir(c);
  const std::string header = "gene_a\tgene_b\ty_true\ty_pred\n";
  std::string all_pred = header;
  std::string summary = "fold\tn_valid\tr2\tsd\n";
  std::vector<double> r2s;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const auto& r = results[k];
    const std::string lines = prediction_lines(g, folds[k].valid.records, r.pred);
    all_pred += lines;
    const std::string suffix = "_fold" + std::to_string(k);
    tsv::write_file(dir / ("predictions" + suffix + ".tsv"), header + lines);
    tsv::write_file(dir / ("training" + suffix + ".tsv"), training_curve(r.history));
    tsv::write_file(dir / ("metrics" + suffix + ".tsv"), format_loss_report(semantic_report(r.history), g));
    summary += std::to_string(k) + "\t" + std::to_string(folds[k].valid.records.size()) + "\t" +
               tsv::format_double(r.r2) + "\t-\n";
    r2s.push_back(r.r2);

    Checkpoint ck;
    ck.kind = "fitness";
    ck.config = config_to_json(c);
    ck.metadata = {{"fold", k},
                   {"folds", folds.size()},
                   {"epochs", tc.epochs},
                   {"final_mse", r.history.back().mse},
                   {"final_loss", r.history.back().total},
                   {"r2", r.r2},
                   {"modules", module_list(g, r.model.gnn)}};
    ck.params = r.model.params;
    save_checkpoint(dir / ("checkpoint" + suffix + ".json"), ck);
    if (k == 0) save_checkpoint(dir / "checkpoint.json", ck);
  }
  const double mean = std::accumulate(r2s.begin(), r2s.end(), 0.0) / static_cast<double>(r2s.size());
  double var = 0.0;
  for (double x : r2s) var += (x - mean) * (x - mean);
  const double sd = r2s.size() > 1 ? std::sqrt(var / static_cast<double>(r2s.size() - 1)) : 0.0;
  summary += "mean\t" + std::to_string(data.records.size()) + "\t" + tsv::format_double(mean) + "\t" +
             tsv::format_double(sd) + "\n";
  tsv::write_file(dir / "predictions.tsv", all_pred);
  tsv::write_file(dir / "folds.tsv", summary);
  std::cout << "mean R2 " << mean << " (sd " << sd << ") over " << folds.size() << " folds\n";
}

void train_joint(const CommandOptions& o) {
  const RunConfig c = load(o);
  const KnowledgeGraph filtered = filter_rare_relations(load_raw_graph(c), c.graph.min_edge_count);
  const auto split = split_edges_stratified(filtered, c.joint.test_fraction, Rng::derive(c.seed, 1));
  const KnowledgeGraph g = prepare_graph(filtered, c, split.test);
  const auto dims = resolve_dims(c, g);
  JointTrainConfig jc = c.joint.train;
  jc.domains.clear();
  for (const auto& name : c.joint.domains) jc.domains.push_back(resolve_domain(g, name, "joint.domains"));

  ParameterSet params;
  Rng rng(Rng::derive(c.seed, 2));
  const HeteroGnn gnn = HeteroGnn::create(g, c.depth, dims, params, rng);
  std::vector<LossReport> report;
  boxgnn::train_joint(g, gnn, params, jc, c.joint.loss, Rng::derive(c.seed, 3), &report);

  std::vector<std::size_t> domains = jc.domains;
  if (domains.empty()) {
    domains.resize(g.num_domains());
    std::iota(domains.begin(), domains.end(), 0);
  }
  Checkpoint ck;
  ck.kind = "joint";
  ck.config = config_to_json(c);
  ck.params = params;
  json held = json::array();
  for (const auto& e : split.test) held.push_back(edge_string(filtered, e));
  ck.metadata = {{"epochs", jc.epochs},
                 {"held_out_edges", held},
                 {"modules", module_list(g, gnn)},
                 {"final_mean_pos_distance",
                  mean_positive_distance_loss(g, gnn, params, domains, jc.include_prior_layer)}};
  const fs::path dir = output_dir(c);
  save_checkpoint(dir / "checkpoint.json", ck);
  tsv::write_file(dir / "metrics.tsv", format_loss_report(report, g));
  std::cout << "joint training done; " << split.test.size() << " edges held out\n";
}

void attribute(const CommandOptions& o) {
  const RunConfig c = load(o);
  const Checkpoint ck = load_checkpoint(checkpoint_path(c));
  require_kind(ck, {"fitness"});
  const RunConfig mcfg = snapshot_config(ck, c);
  const KnowledgeGraph g = prepare_graph(load_raw_graph(c), mcfg);
  const FitnessModelConfig mc = model_config(mcfg, g);
  const FitnessModel model = attach_fitness_model(g, mc, parse_modules(g, ck.metadata.at("modules")), ck.params);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (c.attribution.pairs) {
    tsv::for_each_record(tsv::read_file(c.resolve(*c.attribution.pairs)), [&](std::size_t line, std::string_view row) {
      const auto f = tsv::split(row);
      if (f.size() < 2) throw DataError("pairs file line " + std::to_string(line) + ": expected two genes");
      const auto a = g.find_class(f[0]);
      const auto b = g.find_class(f[1]);
      if (!a || !b) throw DataError("pairs file line " + std::to_string(line) + ": unknown gene");
      pairs.emplace_back(*a, *b);
    });
  } else {
    if (!c.fitness) throw ConfigError("attribution needs 'attribution.pairs' or 'fitness'");
    const auto data = parse_fitness(tsv::read_file(c.resolve(*c.fitness)), g, mc.gene_domain);
    for (const auto& r : data.records) pairs.emplace_back(r.gene_a, r.gene_b);
  }

  PairImportanceTable table = accumulate_pair_importances(model, g, pairs);
  const auto& ac = c.attribution;
  if (!ac.allow_predicates.empty() || !ac.allow_superclasses.empty()) {
    std::set<std::size_t> preds, supers;
    for (const auto& name : ac.allow_predicates) {
      bool found = false;
      for (std::size_t r = 0; r < g.relations().size(); ++r) {
        if (g.relations()[r].name == name) {
          preds.insert(r);
          found = true;
        }
      }
      if (!found) throw ConfigError("config key 'attribution.allow_predicates' names unknown relation '" + name + "'");
    }
    for (const auto& id : ac.allow_superclasses) {
      auto cl = g.find_class(id);
      if (!cl) throw ConfigError("config key 'attribution.allow_superclasses' names unknown class '" + id + "'");
      supers.insert(*cl);
    }
    table = filter_importances(table, preds, supers, g);
  }
  const fs::path dir = output_dir(c);
  tsv::write_file(dir / "importances.tsv", format_importances(symmetrized_ranking(table), g, ac.top_k));
  std::cout << "attributed " << pairs.size() << " pairs; " << table.size() << " edge pairs scored\n";
}

void link_eval(const CommandOptions& o) {
  const RunConfig c = load(o);
  const Checkpoint ck = load_checkpoint(checkpoint_path(c));
  require_kind(ck, {"joint"});
  const RunConfig mcfg = snapshot_config(ck, c);
  const KnowledgeGraph filtered = filter_rare_relations(load_raw_graph(c), mcfg.graph.min_edge_count);
  const auto test = held_out_edges(ck, filtered);
  if (test.empty()) throw DataError("checkpoint has no held-out edges to evaluate");
  const KnowledgeGraph g = prepare_graph(filtered, mcfg, test);
  const HeteroGnn gnn =
      HeteroGnn::attach(g, mcfg.depth, resolve_dims(mcfg, g), parse_modules(g, ck.metadata.at("modules")), ck.params);

  LinkEvalOptions opt;
  opt.mode = c.link_eval.mode;
  opt.with_reverse = mcfg.graph.add_reverse;
  opt.seed = Rng::derive(c.seed, 4);
  const auto report = evaluate_revisions(gnn, ck.params, g, test, opt);
  const fs::path dir = output_dir(c);
  tsv::write_file(dir / "link_results.tsv", format_results(report, g));
  tsv::write_file(dir / "link_summary.tsv", format_summary(report, g));
  std::cout << "evaluated " << test.size() << " held-out edges over " << report.summary.size() << " relations\n";
}

void export_boxes(const CommandOptions& o) {
  const RunConfig c = load(o);
  const Checkpoint ck = load_checkpoint(checkpoint_path(c));
  require_kind(ck, {"priors", "fitness", "joint"});
  const RunConfig mcfg = snapshot_config(ck, c);
  const KnowledgeGraph filtered = filter_rare_relations(load_raw_graph(c), mcfg.graph.min_edge_count);
  const KnowledgeGraph g = prepare_graph(filtered, mcfg, held_out_edges(ck, filtered));

  std::vector<std::vector<Tensor>> layers;
  if (ck.kind == "priors") {
    std::vector<Tensor> l0;
    for (std::size_t d = 0; d < g.num_domains(); ++d) {
      const std::string name = "prior/" + g.domain_name(d);
      if (!ck.params.contains(name)) throw DataError("checkpoint lacks '" + name + "'");
      l0.push_back(ck.params.value(ck.params.index(name)));
    }
    layers.push_back(std::move(l0));
  } else {
    const HeteroGnn gnn = HeteroGnn::attach(g, mcfg.depth, resolve_dims(mcfg, g),
                                            parse_modules(g, ck.metadata.at("modules")), ck.params);
    ad::Tape tape;
    auto bound = ck.params.bind(tape);
    const auto out = gnn.forward(bound, gnn.index(g));
    for (const auto& l : out.layers) {
      std::vector<Tensor> vals;
      for (const auto& v : l) vals.push_back(v.value());
      layers.push_back(std::move(vals));
    }
  }
  std::string text;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t d = 0; d < g.num_domains(); ++d) {
      ad::Tape tape;
      const auto boxes = to_boxes(boxes_from_latents(tape.constant(layers[l][d])));
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        text += format_box_row({g.class_id(g.classes_in(d)[i]), g.domain_name(d), l, boxes[i]}) + "\n";
      }
    }
  }
  const fs::path dir = output_dir(c);
  tsv::write_file(dir / "boxes.tsv", text);
  std::cout << "exported " << layers.size() << " layers of boxes\n";
}

}  // namespace boxgnn::cli
