// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "beamloop/nn/tensor.hpp"

namespace beamloop::nn {

/// Named trainable tensors with a deterministic (insertion) iteration order.
template <typename S>
class ParameterSet {
public:
  Tensor<S>& add(const std::string& name, Tensor<S> t) {
    if (by_name_.count(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    t.set_requires_grad(true);
    order_.push_back(name);
    return by_name_.emplace(name, std::move(t)).first->second;
  }

  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  Tensor<S>& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("ParameterSet: unknown parameter " + name);
    return it->second;
  }
  const Tensor<S>& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += at(name).numel();
    return n;
  }

  void drop_grads() {
    for (const auto& name : order_) at(name).drop_grad();
  }

private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor<S>> by_name_;
};

template <typename S>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::unordered_map<std::string, std::pair<std::vector<S>, std::vector<S>>> moments;
};

/// Bias-corrected Adam update over `names` (all parameters when empty).
/// Every selected parameter must carry a gradient.
template <typename S>
void adam_step(ParameterSet<S>& params, AdamState<S>& state,
               const std::vector<std::string>& names = {}) {
  const auto& selected = names.empty() ? params.names() : names;
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& name : selected) {
    auto& p = params.at(name);
    if (!p.has_grad()) throw std::runtime_error("adam_step: missing-gradient for " + name);
    auto& [m, v] = state.moments[name];
    if (m.size() != p.numel()) {
      m.assign(p.numel(), S(0));
      v.assign(p.numel(), S(0));
    }
    const auto& g = p.grad();
    auto& w = p.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = S(state.beta1) * m[i] + S(1.0 - state.beta1) * g[i];
      v[i] = S(state.beta2) * v[i] + S(1.0 - state.beta2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      w[i] -= S(state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_elems_per_param = 0; // 0 = sweep every element
  std::uint64_t seed = 17;
  // Denominator floor: elements whose analytic and numeric gradients both
  // fall below this are compared on an absolute scale instead, since the
  // central difference of a near-zero gradient is dominated by rounding.
  double rel_floor = 1e-4;
};

/// Central-difference check of d f / d params. `loss_fn` rebuilds the
/// forward graph from the current parameter values and returns a scalar.
/// Returns the maximum relative error across all probed elements.
template <typename S, typename F>
double grad_check(F&& loss_fn, ParameterSet<S>& params, GradCheckOptions opts = {}) {
  params.drop_grads();
  Tensor<S> loss = loss_fn();
  loss.backward();

  std::unordered_map<std::string, std::vector<S>> analytic;
  for (const auto& name : params.names())
    analytic[name] = params.at(name).has_grad() ? params.at(name).grad()
                                                : std::vector<S>(params.at(name).numel(), S(0));

  std::mt19937_64 rng(opts.seed);
  double worst = 0.0;
  for (const auto& name : params.names()) {
    auto& p = params.at(name);
    std::vector<std::size_t> probe(p.numel());
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = i;
    if (opts.max_elems_per_param > 0 && probe.size() > opts.max_elems_per_param) {
      std::shuffle(probe.begin(), probe.end(), rng);
      probe.resize(opts.max_elems_per_param);
    }
    for (auto i : probe) {
      const S saved = p.values()[i];
      p.values()[i] = saved + S(opts.step);
      const double lp = static_cast<double>(loss_fn().item());
      p.values()[i] = saved - S(opts.step);
      const double lm = static_cast<double>(loss_fn().item());
      p.values()[i] = saved;
      const double numeric = (lp - lm) / (2.0 * opts.step);
      const double a = static_cast<double>(analytic[name][i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.rel_floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  params.drop_grads();
  return worst;
}

/// Seed-controlled uniform Kaiming-style fan-in init.
template <typename S>
Tensor<S> kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto t = Tensor<S>::zeros(std::move(shape));
  for (auto& v : t.values()) v = static_cast<S>(dist(rng));
  return t;
}

} // namespace beamloop::nn
