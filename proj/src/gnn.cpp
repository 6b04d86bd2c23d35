#include "boxgnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

Tensor random_prior_latents(std::size_t n, std::size_t dim, Rng& rng) {
  Tensor t(n, 2 * dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dim; ++c) t(r, c) = rng.uniform(-1.0, 1.0);
    for (std::size_t c = 0; c < dim; ++c) t(r, dim + c) = rng.uniform(-1.0, 0.0);
  }
  return t;
}

std::vector<BoxBatch> boxes_at_layer(const std::vector<ad::Var>& latents) {
  std::vector<BoxBatch> out;
  out.reserve(latents.size());
  for (const auto& l : latents) out.push_back(boxes_from_latents(l));
  return out;
}

namespace {

void check_dims(const KnowledgeGraph& g, std::size_t depth, const std::vector<DomainDims>& dims) {
  if (depth < 1) throw ConfigError("GNN depth must be at least 1");
  if (dims.size() != g.num_domains()) {
    throw ConfigError("dimension settings given for " + std::to_string(dims.size()) + " domains, graph has " +
                      std::to_string(g.num_domains()));
  }
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (dims[d].prior_dim == 0) throw ConfigError("prior dimension of domain " + g.domain_name(d) + " is 0");
    if (dims[d].gnn_width == 0 || dims[d].gnn_width % 2 != 0) {
      throw ConfigError("GNN width of domain " + g.domain_name(d) + " must be even and positive");
    }
  }
}

std::string prior_name(const KnowledgeGraph& g, std::size_t d) { return "prior/" + g.domain_name(d); }

std::string module_prefix(const KnowledgeGraph& g, std::size_t layer, const ModuleKey& k) {
  return "gnn/" + std::to_string(layer) + "/" + HeteroGnn::key_string(g, k) + "/";
}

}  // namespace

std::size_t HeteroGnn::width(std::size_t layer, std::size_t d) const {
  return layer == 0 ? 2 * dims_[d].prior_dim : dims_[d].gnn_width;
}

std::string HeteroGnn::key_string(const KnowledgeGraph& g, const ModuleKey& k) {
  if (!k.relation) return "self|" + g.domain_name(k.target_domain);
  return g.domain_name(k.source_domain) + "|" + g.relations()[*k.relation].name + "|" +
         g.domain_name(k.target_domain);
}

ModuleKey HeteroGnn::parse_key(const KnowledgeGraph& g, const std::string& s) {
  const auto parts = tsv::split(s, '|');
  auto domain = [&](std::string_view name) {
    auto d = g.find_domain(name);
    if (!d) throw DataError("module '" + s + "' names unknown domain '" + std::string(name) + "'");
    return *d;
  };
  if (parts.size() == 2 && parts[0] == "self") {
    const std::size_t d = domain(parts[1]);
    return {std::nullopt, d, d};
  }
  if (parts.size() != 3) throw DataError("malformed module key '" + s + "'");
  const std::size_t src = domain(parts[0]);
  const std::size_t dst = domain(parts[2]);
  auto r = g.find_relation(parts[1], src, dst);
  if (!r) throw DataError("module '" + s + "' names an unknown relation");
  return {*r, src, dst};
}

HeteroGnn HeteroGnn::create(const KnowledgeGraph& g, std::size_t depth, std::vector<DomainDims> dims,
                            ParameterSet& params, Rng& rng) {
  check_dims(g, depth, dims);
  std::vector<ModuleKey> modules;
  std::vector<bool> targeted(g.num_domains(), false);
  for (std::size_t r = 0; r < g.relations().size(); ++r) {
    if (g.edge_count(r) == 0) continue;
    const auto& rel = g.relations()[r];
    modules.push_back({r, rel.source_domain, rel.target_domain});
    targeted[rel.target_domain] = true;
  }
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    if (!targeted[d]) modules.push_back({std::nullopt, d, d});
  }

  HeteroGnn m;
  m.depth_ = depth;
  m.dims_ = std::move(dims);
  m.modules_ = std::move(modules);
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    m.priors_.push_back(
        params.add(prior_name(g, d), random_prior_latents(g.classes_in(d).size(), m.dims_[d].prior_dim, rng)));
  }
  for (std::size_t l = 1; l <= depth; ++l) {
    std::vector<SageParams> layer;
    for (const auto& k : m.modules_) {
      const std::size_t in_dst = m.width(l - 1, k.target_domain);
      const std::size_t out = m.width(l, k.target_domain);
      const std::string prefix = module_prefix(g, l, k);
      SageParams p;
      p.w_self = params.add(prefix + "w_self", glorot_uniform(in_dst, out, rng));
      if (k.relation) {
        const std::size_t in_src = m.width(l - 1, k.source_domain);
        p.w_neigh = params.add(prefix + "w_neigh", glorot_uniform(in_src, out, rng));
      }
      p.bias = params.add(prefix + "bias", Tensor(1, out, 0.0));
      layer.push_back(p);
    }
    m.params_.push_back(std::move(layer));
  }
  return m;
}

HeteroGnn HeteroGnn::attach(const KnowledgeGraph& g, std::size_t depth, std::vector<DomainDims> dims,
                            std::vector<ModuleKey> modules, const ParameterSet& params) {
  check_dims(g, depth, dims);
  HeteroGnn m;
  m.depth_ = depth;
  m.dims_ = std::move(dims);
  m.modules_ = std::move(modules);
  auto lookup = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    if (!params.contains(name)) throw DataError("checkpoint lacks parameter '" + name + "'");
    const std::size_t i = params.index(name);
    if (params.value(i).rows() != rows || params.value(i).cols() != cols) {
      throw DataError("parameter '" + name + "' has shape " + params.value(i).shape_string() + ", expected " +
                      std::to_string(rows) + "x" + std::to_string(cols));
    }
    return i;
  };
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    m.priors_.push_back(lookup(prior_name(g, d), g.classes_in(d).size(), 2 * m.dims_[d].prior_dim));
  }
  for (std::size_t l = 1; l <= depth; ++l) {
    std::vector<SageParams> layer;
    for (const auto& k : m.modules_) {
      const std::size_t out = m.width(l, k.target_domain);
      const std::string prefix = module_prefix(g, l, k);
      SageParams p;
      p.w_self = lookup(prefix + "w_self", m.width(l - 1, k.target_domain), out);
      if (k.relation) p.w_neigh = lookup(prefix + "w_neigh", m.width(l - 1, k.source_domain), out);
      p.bias = lookup(prefix + "bias", 1, out);
      layer.push_back(p);
    }
    m.params_.push_back(std::move(layer));
  }
  return m;
}

std::vector<std::size_t> HeteroGnn::weight_params() const {
  std::vector<std::size_t> out;
  for (const auto& layer : params_) {
    for (const auto& p : layer) {
      out.push_back(p.w_self);
      if (p.w_neigh) out.push_back(*p.w_neigh);
    }
  }
  return out;
}

GnnIndex HeteroGnn::index(const KnowledgeGraph& g) const {
  GnnIndex idx;
  idx.modules.resize(modules_.size());
  for (std::size_t d = 0; d < g.num_domains(); ++d) idx.domain_sizes.push_back(g.classes_in(d).size());
  std::map<std::size_t, std::size_t> module_of;
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    if (modules_[m].relation) module_of[*modules_[m].relation] = m;
  }
  for (const Edge& e : g.edges()) {
    auto it = module_of.find(e.relation);
    if (it == module_of.end()) {
      throw DataError("no GNN module for relation '" + g.relations()[e.relation].name + "'");
    }
    idx.modules[it->second].edges.push_back(e);
  }
  idx.relation_count.resize(g.num_domains());
  for (std::size_t d = 0; d < g.num_domains(); ++d) idx.relation_count[d].assign(idx.domain_sizes[d], 0.0);
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    auto& re = idx.modules[m];
    std::map<std::size_t, std::vector<std::size_t>> by_target;
    for (std::size_t i = 0; i < re.edges.size(); ++i) {
      re.source_rows.push_back(g.local_index(re.edges[i].subject));
      by_target[g.local_index(re.edges[i].object)].push_back(i);
    }
    for (auto& [t, group] : by_target) {
      re.targets.push_back(t);
      re.groups.push_back(std::move(group));
      idx.relation_count[modules_[m].target_domain][t] += 1.0;
    }
  }
  idx.isolated.resize(g.num_domains());
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    for (std::size_t v = 0; v < idx.domain_sizes[d]; ++v) {
      if (idx.relation_count[d][v] == 0.0) idx.isolated[d].push_back(v);
    }
  }
  return idx;
}

std::vector<ad::Var> HeteroGnn::forward_layer(std::size_t layer, const std::vector<ad::Var>& inputs,
                                              const std::vector<ad::Var>& bound, const GnnIndex& idx,
                                              std::vector<EdgeMessages>* messages) const {
  const std::size_t nd = dims_.size();
  if (inputs.size() != nd || idx.domain_sizes.size() != nd) throw ShapeError("GNN layer: domain count mismatch");
  for (std::size_t d = 0; d < nd; ++d) {
    if (inputs[d].cols() != width(layer - 1, d) || inputs[d].rows() != idx.domain_sizes[d]) {
      throw ShapeError("GNN layer " + std::to_string(layer) + ": input of domain " + std::to_string(d) +
                       " has shape " + inputs[d].value().shape_string());
    }
  }
  ad::Tape& tape = *inputs.front().tape;
  const auto& lp = params_[layer - 1];

  std::vector<std::optional<ad::Var>> acc(nd);
  std::vector<std::vector<std::size_t>> targeting(nd);
  std::vector<std::optional<std::size_t>> self_only(nd);
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    const ModuleKey& k = modules_[m];
    if (!k.relation) {
      self_only[k.target_domain] = m;
      continue;
    }
    targeting[k.target_domain].push_back(m);
    const auto& re = idx.modules[m];
    if (re.edges.empty()) continue;
    const SageParams& p = lp[m];
    auto msg = ad::gather_rows(inputs[k.source_domain], re.source_rows);
    if (messages) messages->push_back({m, &re.edges, msg});
    auto agg = ad::segment_max_rows(msg, re.groups);
    auto self = ad::gather_rows(inputs[k.target_domain], re.targets);
    auto pre = ad::add(ad::matmul(self, bound[p.w_self]), ad::matmul(agg, bound[*p.w_neigh]));
    pre = ad::add(pre, ad::broadcast(bound[p.bias], pre.rows(), pre.cols()));
    auto out = ad::scatter_add_rows(ad::relu(pre), re.targets, idx.domain_sizes[k.target_domain]);
    acc[k.target_domain] = acc[k.target_domain] ? ad::add(*acc[k.target_domain], out) : out;
  }

  std::vector<ad::Var> result(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const std::size_t n = idx.domain_sizes[d];
    const std::size_t w = width(layer, d);
    auto self_path = [&](std::size_t m, ad::Var x) {
      const SageParams& p = lp[m];
      auto pre = ad::matmul(x, bound[p.w_self]);
      return ad::relu(ad::add(pre, ad::broadcast(bound[p.bias], pre.rows(), pre.cols())));
    };
    if (self_only[d]) {
      result[d] = self_path(*self_only[d], inputs[d]);
      continue;
    }
    const auto& iso = idx.isolated[d];
    if (!iso.empty()) {
      auto x = ad::gather_rows(inputs[d], iso);
      std::optional<ad::Var> sum;
      for (std::size_t m : targeting[d]) {
        auto y = self_path(m, x);
        sum = sum ? ad::add(*sum, y) : y;
      }
      auto fallback = ad::scale(*sum, 1.0 / static_cast<double>(targeting[d].size()));
      auto out = ad::scatter_add_rows(fallback, iso, n);
      acc[d] = acc[d] ? ad::add(*acc[d], out) : out;
    }
    Tensor inv(n, 1);
    for (std::size_t v = 0; v < n; ++v) {
      const double c = idx.relation_count[d][v];
      inv(v, 0) = c > 0.0 ? 1.0 / c : 1.0;
    }
    result[d] = ad::mul(*acc[d], ad::broadcast(tape.constant(std::move(inv)), n, w));
  }
  return result;
}

GnnOutput HeteroGnn::forward(const std::vector<ad::Var>& bound, const GnnIndex& idx) const {
  GnnOutput out;
  std::vector<ad::Var> layer0;
  for (std::size_t p : priors_) layer0.push_back(bound[p]);
  out.layers.push_back(std::move(layer0));
  for (std::size_t l = 1; l <= depth_; ++l) {
    out.layers.push_back(forward_layer(l, out.layers.back(), bound, idx, l == 1 ? &out.first_layer_messages : nullptr));
  }
  return out;
}

}  // namespace boxgnn
