// SPDX-License-Identifier: Apache-2.0
//
// Dense real tensors with reverse-mode differentiation. A Tensor is a
// shared handle to a graph node; operations allocate fresh nodes and
// record backward closures only while at least one input requires
// gradients. Graphs are single-threaded per model instance.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace beamloop::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad; // allocated lazily, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

template <typename S>
class Tensor {
public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape) { return filled(std::move(shape), S(0)); }

  static Tensor filled(Shape shape, S v) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<S>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), v);
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<S> values) {
    if (shape_numel(shape) != values.size())
      throw std::invalid_argument("Tensor: shape-mismatch between shape and value count");
    Tensor t;
    t.node_ = std::make_shared<TensorNode<S>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    return t;
  }

  static Tensor scalar(S v) { return from_values({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }

  std::vector<S>& values() { return node_->value; }
  const std::vector<S>& values() const { return node_->value; }
  S item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }

  const std::vector<S>& grad() const {
    if (node_->grad.size() != node_->value.size())
      throw std::logic_error("Tensor::grad accessed before backward populated it");
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }
  void drop_grad() { node_->grad.clear(); }

  std::shared_ptr<TensorNode<S>>& node() { return node_; }
  const std::shared_ptr<TensorNode<S>>& node() const { return node_; }

  /// Reverse-mode sweep from this scalar; accumulates into .grad of every
  /// reachable node that requires gradients.
  void backward() const {
    if (numel() != 1) throw std::logic_error("backward: output must be scalar");
    std::vector<TensorNode<S>*> order;
    topo_sort(order);
    node_->ensure_grad();
    node_->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }

private:
  void topo_sort(std::vector<TensorNode<S>*>& order) const {
    // Iterative post-order; graphs can be deep for long conv stacks.
    std::unordered_set<TensorNode<S>*> seen;
    std::vector<std::pair<TensorNode<S>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        TensorNode<S>* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<TensorNode<S>> node_;
};

/// Wires `out` as the child of `parents` with the given pull-style
/// backward closure. No-op when no parent requires gradients.
template <typename S, typename Fn>
void attach_backward(Tensor<S>& out, std::initializer_list<Tensor<S>> parents, Fn&& fn) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return;
  out.node()->requires_grad = true;
  for (const auto& p : parents) out.node()->parents.push_back(p.node());
  out.node()->backward_fn = std::forward<Fn>(fn);
}

} // namespace beamloop::nn
