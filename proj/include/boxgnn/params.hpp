#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "boxgnn/autodiff.hpp"
#include "boxgnn/tensor.hpp"

namespace boxgnn {

/// Named model parameters in insertion order. Models refer to entries by index.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const { return values_.size(); }
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  bool trainable(std::size_t i) const { return trainable_[i]; }
  void set_trainable(std::size_t i, bool t) { trainable_[i] = t; }

  /// Places every parameter on the tape: trainable ones as leaves, frozen
  /// ones as constants (or as leaves when `all_leaves` is set).
  std::vector<ad::Var> bind(ad::Tape& tape, bool all_leaves = false) const;
  /// Gradients of bound parameters, aligned with indices.
  static std::vector<Tensor> gradients(const std::vector<ad::Var>& bound);

  bool operator==(const ParameterSet& o) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<bool> trainable_;
  std::map<std::string, std::size_t, std::less<>> lookup_;
};

/// Bias-corrected Adam. Moments are created on the first step.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// Updates every trainable parameter in place and increments state.step.
void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state);

/// Learning rate after `epoch` decays of (1 - decay).
double decayed_lr(double initial_lr, double decay, long epoch);

}  // namespace boxgnn
