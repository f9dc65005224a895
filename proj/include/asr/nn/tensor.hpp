#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace asr::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// One vertex of a differentiation graph. Interior nodes hold the closure that
// pushes their gradient into their inputs; leaves hold persistent parameters.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

using NodePtr = std::shared_ptr<Node>;

// Shared handle to a graph node. Copies alias the same storage; use clone()
// for an independent leaf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  // Gradient view; empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  // Deep copy as a fresh leaf with the same requires_grad flag.
  Tensor clone() const;
  // Same values, cut from the graph, no gradient.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Builds an interior node. `backward` receives the node itself (its grad is
// populated) and must accumulate into the grads of `inputs`.
Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively into
// leaves, so several losses may be back-propagated before an optimizer step.
// Calling it twice on the same loss throws std::logic_error.
void backward(const Tensor& loss);

// Named, ordered collection of trainable leaves.
class Parameters {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return map_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void erase(const std::string& name) { map_.erase(name); }
  std::size_t size() const { return map_.size(); }
  std::size_t scalar_count() const;

  Map::iterator begin() { return map_.begin(); }
  Map::iterator end() { return map_.end(); }
  Map::const_iterator begin() const { return map_.begin(); }
  Map::const_iterator end() const { return map_.end(); }

  void zero_grad();
  Parameters clone() const;
  // Copies every tensor under `prefix` into `dst` (names unchanged).
  void copy_prefix_into(const std::string& prefix, Parameters& dst) const;

 private:
  Map map_;
};

// True when every value of both sets is bit-identical under equal names and shapes.
bool bit_equal(const Parameters& a, const Parameters& b);

}  // namespace asr::nn
