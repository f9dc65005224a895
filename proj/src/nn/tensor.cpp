#include "asr/nn/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace asr::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimension must be positive: " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + shape_string(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->backward_done = false;
}

Tensor Tensor::clone() const { return from(shape(), node_->value, node_->requires_grad); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
    node->inputs.push_back(in.node_ptr());
  }
  if (node->requires_grad) node->backward_fn = std::move(backward);
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  Node* root = loss.node();
  if (root == nullptr) throw std::logic_error("backward on undefined tensor");
  if (root->value.size() != 1) {
    throw std::logic_error("backward requires a scalar loss, got " + shape_string(root->shape));
  }
  if (root->backward_done) throw std::logic_error("backward called twice on the same graph");
  if (!root->requires_grad) throw std::logic_error("loss does not depend on any trainable tensor");

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
  root->backward_done = true;
}

Tensor& Parameters::add(const std::string& name, Tensor t) {
  if (map_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  if (!t.requires_grad()) throw std::invalid_argument("parameter must require grad: " + name);
  return map_.emplace(name, std::move(t)).first->second;
}

Tensor& Parameters::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& Parameters::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : map_) n += t.size();
  return n;
}

void Parameters::zero_grad() {
  for (auto& [_, t] : map_) t.zero_grad();
}

Parameters Parameters::clone() const {
  Parameters out;
  for (const auto& [name, t] : map_) out.add(name, t.clone());
  return out;
}

void Parameters::copy_prefix_into(const std::string& prefix, Parameters& dst) const {
  for (const auto& [name, t] : map_) {
    if (name.rfind(prefix, 0) == 0) dst.add(name, t.clone());
  }
}

bool bit_equal(const Parameters& a, const Parameters& b) {
  if (a.size() != b.size()) return false;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
    auto va = ia->second.values();
    auto vb = ib->second.values();
    if (std::memcmp(va.data(), vb.data(), va.size_bytes()) != 0) return false;
  }
  return true;
}

}  // namespace asr::nn
