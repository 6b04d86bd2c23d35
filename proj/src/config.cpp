#include "boxgnn/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

using nlohmann::json;

PriorMode parse_prior_mode(const std::string& s) {
  if (s == "random") return PriorMode::Random;
  if (s == "frozen") return PriorMode::Frozen;
  if (s == "fine_tune") return PriorMode::FineTune;
  throw ConfigError("unknown prior mode '" + s + "' (expected random, frozen or fine_tune)");
}

std::string to_string(PriorMode m) {
  switch (m) {
    case PriorMode::Random: return "random";
    case PriorMode::Frozen: return "frozen";
    case PriorMode::FineTune: return "fine_tune";
  }
  return "random";
}

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

namespace {

NormKind parse_norm(const std::string& s) {
  if (s == "l2") return NormKind::L2;
  if (s == "l1") return NormKind::L1;
  throw ConfigError("unknown norm '" + s + "' (expected l2 or l1)");
}

std::string norm_name(NormKind n) { return n == NormKind::L1 ? "l1" : "l2"; }

/// Reads keys of one JSON object and rejects the ones never read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config key '" + path_ + "' must be an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json* find(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  std::optional<Section> section(const std::string& k) {
    const json* v = find(k);
    if (!v) return std::nullopt;
    return Section(*v, key(k));
  }

  void number(const std::string& k, double& out, double lo, bool lo_open = false) {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_number()) throw ConfigError("config key '" + key(k) + "' must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < lo || (lo_open && x == lo)) {
      throw ConfigError("config key '" + key(k) + "' must be " + (lo_open ? "> " : ">= ") + tsv::format_double(lo));
    }
    out = x;
  }

  void fraction(const std::string& k, double& out) {
    number(k, out, 0.0);
    if (out >= 1.0) throw ConfigError("config key '" + key(k) + "' must be < 1");
  }

  template <class Int>
  void integer(const std::string& k, Int& out, long long lo) {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError("config key '" + key(k) + "' must be an integer");
    const long long x = v->get<long long>();
    if (x < lo) throw ConfigError("config key '" + key(k) + "' must be >= " + std::to_string(lo));
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& k, bool& out) {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError("config key '" + key(k) + "' must be true or false");
    out = v->get<bool>();
  }

  bool string(const std::string& k, std::string& out) {
    const json* v = find(k);
    if (!v) return false;
    if (!v->is_string()) throw ConfigError("config key '" + key(k) + "' must be a string");
    out = v->get<std::string>();
    return true;
  }

  void path(const std::string& k, fs::path& out) {
    std::string s;
    if (string(k, s)) out = s;
  }

  void optional_path(const std::string& k, std::optional<fs::path>& out) {
    const json* v = find(k);
    if (!v || v->is_null()) return;
    if (!v->is_string()) throw ConfigError("config key '" + key(k) + "' must be a string");
    out = v->get<std::string>();
  }

  template <class T, class F>
  void parsed(const std::string& k, T& out, F parse) {
    std::string s;
    if (!string(k, s)) return;
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key(k) + "': " + e.what());
    }
  }

  bool strings(const std::string& k, std::vector<std::string>& out) {
    const json* v = find(k);
    if (!v || v->is_null()) return false;
    if (!v->is_array()) throw ConfigError("config key '" + key(k) + "' must be a list of strings");
    out.clear();
    for (const auto& x : *v) {
      if (!x.is_string()) throw ConfigError("config key '" + key(k) + "' must be a list of strings");
      out.push_back(x.get<std::string>());
    }
    return true;
  }

  void sizes(const std::string& k, std::vector<std::size_t>& out) {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_array()) throw ConfigError("config key '" + key(k) + "' must be a list of positive integers");
    out.clear();
    for (const auto& x : *v) {
      if (!x.is_number_integer() || x.get<long long>() < 1) {
        throw ConfigError("config key '" + key(k) + "' must be a list of positive integers");
      }
      out.push_back(x.get<std::size_t>());
    }
  }

  std::vector<std::string> member_names() const {
    std::vector<std::string> out;
    for (auto it = j_.begin(); it != j_.end(); ++it) out.push_back(it.key());
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + key(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_dims(Section& s, DomainDims& d) {
  s.integer("prior", d.prior_dim, 1);
  s.integer("gnn", d.gnn_width, 2);
  if (d.gnn_width % 2 != 0) throw ConfigError("config key '" + s.key("gnn") + "' must be even");
  s.finish();
}

void read_prior(Section& s, PriorTrainConfig& p) {
  s.integer("epochs", p.epochs, 1);
  s.number("lr", p.lr, 0.0, true);
  s.number("reg_lambda", p.reg_lambda, 0.0);
  s.number("gumbel_temp", p.gumbel_temp, 0.0, true);
  s.number("neg_ratio", p.neg_ratio, 0.0);
  s.parsed("loss", p.loss_kind, parse_loss_kind);
  s.boolean("transitive", p.transitive);
  s.boolean("exclude_descendants", p.exclude_descendants);
}

json prior_json(const PriorTrainConfig& p) {
  return {{"epochs", p.epochs},
          {"lr", p.lr},
          {"reg_lambda", p.reg_lambda},
          {"gumbel_temp", p.gumbel_temp},
          {"neg_ratio", p.neg_ratio},
          {"loss", to_string(p.loss_kind)},
          {"transitive", p.transitive},
          {"exclude_descendants", p.exclude_descendants}};
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  c.base_dir = base_dir;
  Section top(root, "");

  if (auto g = top.section("graph")) {
    g->path("axioms", c.graph.axioms);
    g->path("domains", c.graph.domains);
    g->integer("min_edge_count", c.graph.min_edge_count, 0);
    g->boolean("add_reverse", c.graph.add_reverse);
    g->strings("sibling_disjointness", c.graph.sibling_disjointness);
    g->finish();
  }
  top.optional_path("fitness", c.fitness);
  top.string("gene_domain", c.gene_domain);
  top.path("output", c.output);
  top.optional_path("checkpoint", c.checkpoint);
  top.integer("seed", c.seed, 0);
  top.integer("jobs", c.jobs, 1);
  if (auto d = top.section("default_dims")) read_dims(*d, c.default_dims);
  if (auto d = top.section("domain_dims")) {
    for (const auto& name : d->member_names()) {
      auto s = d->section(name);
      DomainDims dims = c.default_dims;
      read_dims(*s, dims);
      c.domain_dims[name] = dims;
    }
    d->finish();
  }
  if (auto g = top.section("gnn")) {
    g->integer("depth", c.depth, 1);
    g->finish();
  }
  if (auto p = top.section("priors")) {
    read_prior(*p, c.priors);
    std::optional<Section> overrides = p->section("domains");
    if (overrides) {
      for (const auto& name : overrides->member_names()) {
        auto s = overrides->section(name);
        PriorTrainConfig pc = c.priors;
        read_prior(*s, pc);
        s->finish();
        c.prior_overrides[name] = pc;
      }
      overrides->finish();
    }
    p->finish();
  }
  if (auto f = top.section("fitness_training")) {
    auto& t = c.fitness_training.train;
    f->integer("epochs", t.epochs, 1);
    f->number("lr", t.lr, 0.0, true);
    f->fraction("lr_decay", t.lr_decay);
    f->number("alpha", t.weights.alpha, 0.0);
    f->number("beta_neg", t.weights.beta_neg, 0.0);
    f->number("gamma_random", t.weights.gamma_random, 0.0);
    f->number("lambda_wd", t.weights.lambda_wd, 0.0);
    f->parsed("loss", t.loss_kind, parse_loss_kind);
    f->number("gumbel_temp", t.gumbel_temp, 0.0, true);
    f->parsed("norm", t.norm, parse_norm);
    f->integer("folds", t.folds, 2);
    f->integer("batch_size", t.batch_size, 0);
    f->boolean("include_prior_layer", t.include_prior_layer);
    f->number("neg_ratio", t.sampling.ratio, 0.0);
    f->parsed("combiner", c.fitness_training.combiner, parse_combiner);
    f->sizes("hidden", c.fitness_training.hidden);
    std::vector<std::string> names;
    if (f->strings("semantic_domains", names)) c.fitness_training.semantic_domains = names;
    f->parsed("prior_mode", c.fitness_training.prior_mode, parse_prior_mode);
    f->optional_path("prior_checkpoint", c.fitness_training.prior_checkpoint);
    f->finish();
  }
  if (c.fitness_training.prior_mode != PriorMode::Random && !c.fitness_training.prior_checkpoint) {
    throw ConfigError("config key 'fitness_training.prior_mode' needs 'fitness_training.prior_checkpoint'");
  }
  if (auto j = top.section("joint")) {
    auto& t = c.joint.train;
    j->integer("epochs", t.epochs, 1);
    j->number("lr", t.lr, 0.0, true);
    j->fraction("lr_decay", t.lr_decay);
    j->number("reg_lambda", t.reg_lambda, 0.0);
    j->number("small_box_lambda", t.small_box_lambda, 0.0);
    j->number("beta_neg", t.beta_neg, 0.0);
    j->number("gamma_random", t.gamma_random, 0.0);
    j->number("l0", t.l0, 0.0, true);
    j->number("neg_ratio", t.neg_ratio, 0.0);
    j->number("gumbel_temp", t.gumbel_temp, 0.0, true);
    j->parsed("norm", t.norm, parse_norm);
    j->boolean("include_prior_layer", t.include_prior_layer);
    j->boolean("exclude_descendants", t.exclude_descendants);
    j->parsed("loss", c.joint.loss, parse_loss_kind);
    j->strings("domains", c.joint.domains);
    j->fraction("test_fraction", c.joint.test_fraction);
    j->finish();
  }
  if (auto a = top.section("attribution")) {
    a->optional_path("pairs", c.attribution.pairs);
    a->strings("allow_predicates", c.attribution.allow_predicates);
    a->strings("allow_superclasses", c.attribution.allow_superclasses);
    a->integer("top_k", c.attribution.top_k, 0);
    a->finish();
  }
  if (auto l = top.section("link_eval")) {
    l->parsed("mode", c.link_eval.mode, parse_displacement_mode);
    l->finish();
  }
  if (auto s = top.section("synthetic")) {
    auto& y = c.synthetic;
    s->integer("genes", y.genes, 2);
    s->integer("gene_categories", y.gene_categories, 1);
    s->integer("trait_groups", y.trait_groups, 1);
    s->integer("leaves_per_group", y.leaves_per_group, 1);
    s->integer("traits_per_gene", y.traits_per_gene, 1);
    s->number("same_group_penalty", y.same_group_penalty, 0.0);
    s->number("same_leaf_penalty", y.same_leaf_penalty, 0.0);
    s->number("noise", y.noise, 0.0);
    s->boolean("sibling_disjointness", y.sibling_disjointness);
    s->finish();
    if (y.traits_per_gene > y.leaves_per_group) {
      throw ConfigError("config key 'synthetic.traits_per_gene' exceeds 'synthetic.leaves_per_group'");
    }
  }
  top.finish();
  c.synthetic.seed = c.seed;
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = tsv::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json config_to_json(const RunConfig& c) {
  json j;
  j["graph"] = {{"axioms", c.graph.axioms.string()},
                {"domains", c.graph.domains.string()},
                {"min_edge_count", c.graph.min_edge_count},
                {"add_reverse", c.graph.add_reverse},
                {"sibling_disjointness", c.graph.sibling_disjointness}};
  j["fitness"] = c.fitness ? json(c.fitness->string()) : json(nullptr);
  j["gene_domain"] = c.gene_domain;
  j["output"] = c.output.string();
  j["checkpoint"] = c.checkpoint ? json(c.checkpoint->string()) : json(nullptr);
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["default_dims"] = {{"prior", c.default_dims.prior_dim}, {"gnn", c.default_dims.gnn_width}};
  j["domain_dims"] = json::object();
  for (const auto& [name, d] : c.domain_dims) j["domain_dims"][name] = {{"prior", d.prior_dim}, {"gnn", d.gnn_width}};
  j["gnn"] = {{"depth", c.depth}};
  j["priors"] = prior_json(c.priors);
  j["priors"]["domains"] = json::object();
  for (const auto& [name, p] : c.prior_overrides) j["priors"]["domains"][name] = prior_json(p);

  const auto& t = c.fitness_training.train;
  j["fitness_training"] = {{"epochs", t.epochs},
                           {"lr", t.lr},
                           {"lr_decay", t.lr_decay},
                           {"alpha", t.weights.alpha},
                           {"beta_neg", t.weights.beta_neg},
                           {"gamma_random", t.weights.gamma_random},
                           {"lambda_wd", t.weights.lambda_wd},
                           {"loss", to_string(t.loss_kind)},
                           {"gumbel_temp", t.gumbel_temp},
                           {"norm", norm_name(t.norm)},
                           {"folds", t.folds},
                           {"batch_size", t.batch_size},
                           {"include_prior_layer", t.include_prior_layer},
                           {"neg_ratio", t.sampling.ratio},
                           {"combiner", to_string(c.fitness_training.combiner)},
                           {"hidden", c.fitness_training.hidden},
                           {"prior_mode", to_string(c.fitness_training.prior_mode)}};
  j["fitness_training"]["semantic_domains"] =
      c.fitness_training.semantic_domains ? json(*c.fitness_training.semantic_domains) : json(nullptr);
  j["fitness_training"]["prior_checkpoint"] =
      c.fitness_training.prior_checkpoint ? json(c.fitness_training.prior_checkpoint->string()) : json(nullptr);

  const auto& jt = c.joint.train;
  j["joint"] = {{"epochs", jt.epochs},
                {"lr", jt.lr},
                {"lr_decay", jt.lr_decay},
                {"reg_lambda", jt.reg_lambda},
                {"small_box_lambda", jt.small_box_lambda},
                {"beta_neg", jt.beta_neg},
                {"gamma_random", jt.gamma_random},
                {"l0", jt.l0},
                {"neg_ratio", jt.neg_ratio},
                {"gumbel_temp", jt.gumbel_temp},
                {"norm", norm_name(jt.norm)},
                {"include_prior_layer", jt.include_prior_layer},
                {"exclude_descendants", jt.exclude_descendants},
                {"loss", to_string(c.joint.loss)},
                {"domains", c.joint.domains},
                {"test_fraction", c.joint.test_fraction}};
  j["attribution"] = {{"pairs", c.attribution.pairs ? json(c.attribution.pairs->string()) : json(nullptr)},
                      {"allow_predicates", c.attribution.allow_predicates},
                      {"allow_superclasses", c.attribution.allow_superclasses},
                      {"top_k", c.attribution.top_k}};
  j["link_eval"] = {{"mode", to_string(c.link_eval.mode)}};
  const auto& y = c.synthetic;
  j["synthetic"] = {{"genes", y.genes},
                    {"gene_categories", y.gene_categories},
                    {"trait_groups", y.trait_groups},
                    {"leaves_per_group", y.leaves_per_group},
                    {"traits_per_gene", y.traits_per_gene},
                    {"same_group_penalty", y.same_group_penalty},
                    {"same_leaf_penalty", y.same_leaf_penalty},
                    {"noise", y.noise},
                    {"sibling_disjointness", y.sibling_disjointness}};
  return j;
}

std::size_t resolve_domain(const KnowledgeGraph& g, const std::string& name, const std::string& key) {
  auto d = g.find_domain(name);
  if (!d) throw ConfigError("config key '" + key + "' names unknown domain '" + name + "'");
  return *d;
}

std::vector<DomainDims> resolve_dims(const RunConfig& c, const KnowledgeGraph& g) {
  for (const auto& [name, d] : c.domain_dims) resolve_domain(g, name, "domain_dims." + name);
  std::vector<DomainDims> out;
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    auto it = c.domain_dims.find(g.domain_name(d));
    out.push_back(it == c.domain_dims.end() ? c.default_dims : it->second);
  }
  return out;
}

KnowledgeGraph prepare_graph(const KnowledgeGraph& raw, const RunConfig& c, const std::vector<Edge>& held_out) {
  KnowledgeGraph g = filter_rare_relations(raw, c.graph.min_edge_count);
  if (!held_out.empty()) {
    std::vector<Edge> sorted = held_out;
    std::sort(sorted.begin(), sorted.end());
    KnowledgeGraph::Builder b(g);
    b.remove_edges_if([&](const Edge& e) { return std::binary_search(sorted.begin(), sorted.end(), e); });
    g = b.build();
  }
  if (c.graph.add_reverse) g = add_reverse_edges(g);
  for (const auto& root : c.graph.sibling_disjointness) {
    auto r = g.find_class(root);
    if (!r) throw ConfigError("config key 'graph.sibling_disjointness' names unknown class '" + root + "'");
    g = augment_sibling_disjointness(g, *r);
  }
  return g;
}

}  // namespace boxgnn
