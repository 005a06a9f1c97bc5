#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mmfuse/core/error.hpp"

namespace mmfuse {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline void check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + where);
    }
  }
}

inline void check_shape(const Shape& shape, std::size_t n, const char* where) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError(std::string(where) + ": zero-length axis in shape " + shape_str(shape));
  }
  if (numel(shape) != n) {
    throw DimensionError(std::string(where) + ": shape " + shape_str(shape) + " holds " +
                         std::to_string(numel(shape)) + " values, got " + std::to_string(n));
  }
}

}  // namespace detail

// Dense row-major array of doubles with an optional gradient slot.
//
// Tensor is a handle: copies share the same underlying node, the way
// parameters are shared between a layer and its optimizer. Values are fixed
// once an op produces them; only leaves (parameters, inputs) are updated in
// place, and only through mutable_values().
class Tensor {
public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    detail::check_shape(shape, values.size(), "Tensor");
    detail::check_finite(values, "Tensor construction");
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) { return Tensor({1}, {v}, requires_grad); }

  static Tensor vector(std::initializer_list<double> v, bool requires_grad = false) {
    return Tensor({v.size()}, std::vector<double>(v), requires_grad);
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false) {
    std::vector<double> flat;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw DimensionError("Tensor::matrix: ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(flat), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }

  double item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  // Copy of the values with no graph history.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  const char* op() const { return node_->op; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  // Builds the result of an op. The backward closure and input links are kept
  // only when some input requires a gradient, so eval-mode forwards leave no
  // graph behind.
  static Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
    detail::check_finite(values, op);
    Tensor out;
    out.node_ = std::make_shared<detail::Node>();
    out.node_->op = op;
    out.node_->shape = std::move(shape);
    out.node_->value = std::move(values);
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->inputs.reserve(inputs.size());
      for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

private:
  std::shared_ptr<detail::Node> node_;
};

// Nodes reachable from a root that take part in differentiation, in
// topological order (every node's inputs precede it).
class Graph {
public:
  static Graph trace(const Tensor& root) {
    Graph g;
    if (!root.requires_grad()) return g;
    std::unordered_set<const detail::Node*> seen;
    // Iterative post-order DFS; deep recurrent graphs overflow the stack otherwise.
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        detail::Node* child = node->inputs[next++].get();
        if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        g.nodes_.push_back(node);
        stack.pop_back();
      }
    }
    return g;
  }

  std::span<detail::Node* const> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

private:
  std::vector<detail::Node*> nodes_;
};

// Reverse-mode sweep. Leaf gradients accumulate across calls until zeroed;
// interior gradients are reset on every call.
inline void backward(const Tensor& loss, const Graph& graph) {
  if (loss.size() != 1) throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  auto nodes = graph.nodes();
  for (auto* n : nodes) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  nodes.back()->grad.assign(1, 1.0);
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->is_leaf() && n->backward) n->backward(*n);
  }
  for (auto* n : nodes) {
    if (n->is_leaf()) detail::check_finite(n->grad, "backward");
  }
}

inline void backward(const Tensor& loss) { backward(loss, Graph::trace(loss)); }

}  // namespace mmfuse
