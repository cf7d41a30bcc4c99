#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hdrv/tensor.hpp"

namespace hdrv::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value in the computation graph. Gradients are allocated on first
// accumulation; the backward closure pushes `grad` into the inputs.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
  bool has_grad() const { return !grad.empty(); }
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  // Zero-filled tensor of the value's shape when no gradient has arrived.
  Tensor grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad() { node_->grad = Tensor(); }

  int channels() const { return value().channels(); }
  int height() const { return value().height(); }
  int width() const { return value().width(); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Builds a graph node. The closure is recorded only when some input requires
// gradients, so pure inference leaves no graph behind.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// Suspends graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Reverse sweep from a scalar (1x1x1) output with seed gradient 1.
void backward(const Var& scalar);

// Gradient sink for input `i` of `self`, or nullptr when that input is constant.
Tensor* input_grad(Node& self, std::size_t i);

struct Parameter {
  std::string name;
  Var var;
};

// Ordered, named parameter collection. Names are unique and stable; they key
// checkpoints and optimizer state.
class ParameterSet {
 public:
  // Returns a handle sharing the stored node.
  Var add(std::string name, Tensor init, bool trainable = true);
  const std::vector<Parameter>& items() const { return items_; }
  std::vector<Parameter>& items() { return items_; }
  const Parameter* find(const std::string& name) const;
  std::size_t count_scalars() const;
  void zero_grad();
  void set_requires_grad(bool on);

 private:
  std::vector<Parameter> items_;
};

}  // namespace hdrv::ag
