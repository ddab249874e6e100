#include "lmforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "lmforge/errors.hpp"

namespace lmforge {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape)
    if (d == 0) throw DimensionError("tensor: zero-sized dimension in " + shape_to_string(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor: shape " + shape_to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("tensor: non-finite initial value");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() == 2) return s[1];
  return s.empty() ? 1 : s[0];
}

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("tensor: item() on non-scalar " + shape_to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (!node_) return;
  auto& g = node_->ensure_grad();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach(bool requires_grad) const {
  return from(shape(), node_->value, requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tape build_tape(const Tensor& root) {
  Tape order;
  if (!root.requires_grad()) return order;
  std::unordered_set<detail::Node*> seen;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be a scalar tensor");
  if (!loss.requires_grad()) throw ContractError("backward: loss is not on the tape");
  Tape tape = build_tape(loss);
  for (detail::Node* n : tape)
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = tape.rbegin(); it != tape.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  for (detail::Node* n : tape) {
    if (!n->is_leaf()) continue;
    for (double g : n->grad)
      if (!std::isfinite(g)) throw NumericalError("backward: non-finite gradient");
  }
}

}  // namespace lmforge
