#pragma once

#include <map>
#include <string>
#include <vector>

#include "hibehrt/rng.hpp"
#include "hibehrt/tape.hpp"
#include "hibehrt/tensor.hpp"

namespace hibehrt {

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
};

// Named weight tensors with per-parameter gradient accumulators. std::map
// keeps iteration order deterministic (sorted by name), which the optimizer,
// EMA update, and checkpoint writer all rely on.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> init) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw ConfigMismatch("duplicate parameter name: " + name);
    it->second.value = std::move(init);
    it->second.grad = Tensor<T>::zeros(it->second.value.shape);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigMismatch("unknown parameter: " + name);
    return it->second;
  }
  const Parameter<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigMismatch("unknown parameter: " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, p] : params_)
      std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>());
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

// Truncated normal (resample beyond 2 std), BERT-style std 0.02.
template <typename T>
Tensor<T> truncated_normal(std::vector<std::size_t> shape, double std_dev, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (T& v : t.data) {
    double x;
    do {
      x = rng.normal(0.0, std_dev);
    } while (std::abs(x) > 2.0 * std_dev);
    v = static_cast<T>(x);
  }
  return t;
}

// Binds a ParameterStore to one tape. Fetching the same parameter twice
// returns the same tape node, so fan-out gradients accumulate correctly.
// In frozen mode parameters enter the tape as constants (no gradient flow).
template <typename T>
class ParamCtx {
 public:
  ParamCtx(Tape<T>& tape, ParameterStore<T>& store, bool frozen = false)
      : tape_(tape), store_(store), frozen_(frozen) {}

  typename Tape<T>::Ref operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Parameter<T>& p = store_.get(name);
    typename Tape<T>::Ref r = frozen_ ? tape_.constant(p.value) : tape_.leaf(p.value);
    bound_.emplace(name, r);
    return r;
  }

  // Copy tape gradients back into the store (additive).
  void accumulate_grads(double scale = 1.0) {
    if (frozen_) return;
    for (auto& [name, ref] : bound_) {
      const Tensor<T>& g = tape_.grad(ref);
      Tensor<T>& dst = store_.get(name).grad;
      for (std::size_t k = 0; k < g.size(); ++k) dst.data[k] += static_cast<T>(g.data[k] * scale);
    }
  }

  Tape<T>& tape() { return tape_; }

 private:
  Tape<T>& tape_;
  ParameterStore<T>& store_;
  bool frozen_;
  std::map<std::string, typename Tape<T>::Ref> bound_;
};

}  // namespace hibehrt
