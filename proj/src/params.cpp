#include "boxgnn/params.hpp"

#include <stdexcept>

namespace boxgnn {

std::size_t ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (lookup_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  lookup_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  trainable_.push_back(trainable);
  return values_.size() - 1;
}

bool ParameterSet::contains(std::string_view name) const { return lookup_.find(name) != lookup_.end(); }

std::size_t ParameterSet::index(std::string_view name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::vector<ad::Var> ParameterSet::bind(ad::Tape& tape, bool all_leaves) const {
  std::vector<ad::Var> out;
  out.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out.push_back(trainable_[i] || all_leaves ? tape.leaf(values_[i]) : tape.constant(values_[i]));
  }
  return out;
}

std::vector<Tensor> ParameterSet::gradients(const std::vector<ad::Var>& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.size());
  for (const auto& v : bound) out.push_back(v.grad());
  return out;
}

}  // namespace boxgnn
