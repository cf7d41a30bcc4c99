#include "hdrv/autograd.hpp"

#include <unordered_set>

#include "hdrv/errors.hpp"

namespace hdrv::ag {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor::like(value);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor::like(node_->value);
  return node_->grad;
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    auto& node = *out.node();
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& in : inputs) node.inputs.push_back(in.node());
    node.backward_fn = std::move(backward_fn);
  }
  return out;
}

Tensor* input_grad(Node& self, std::size_t i) {
  auto& in = self.inputs[i];
  if (!in->requires_grad) return nullptr;
  return &in->grad_buffer();
}

void backward(const Var& scalar) {
  if (scalar.value().size() != 1) {
    throw InvalidArgument("backward() expects a scalar output, got " +
                          scalar.value().shape_string());
  }
  if (!scalar.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(scalar.node().get(), 0);
  visited.insert(scalar.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  scalar.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
}

Var ParameterSet::add(std::string name, Tensor init, bool trainable) {
  if (find(name) != nullptr) throw InvalidArgument("duplicate parameter name: " + name);
  items_.push_back({std::move(name), Var(std::move(init), trainable)});
  return items_.back().var;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::count_scalars() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

void ParameterSet::set_requires_grad(bool on) {
  for (auto& p : items_) p.var.node()->requires_grad = on;
}

}  // namespace hdrv::ag
