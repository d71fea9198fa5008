#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "leaf/tensor.hpp"

namespace leaf {

// A learnable weight. `grad` always matches `value` in shape and accumulates
// across backward passes until the optimizer consumes it.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Ordered record of executed differentiable operations with captured
// operands. backward() replays adjoints in exact reverse execution order,
// flushes gradients into the Parameters that participated, and clears the
// tape. A tape is confined to one thread.
class Tape {
 public:
  using Id = int32_t;

  Id constant(Tensor v);
  Id param(Parameter& p);  // the same Parameter maps to one node per tape

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise
  Id scale(Id a, double s);
  Id add_scalar(Id a, double c);
  Id matmul(Id a, Id b);
  Id transpose(Id a);
  Id reshape(Id a, std::vector<int64_t> shape);
  Id relu(Id a);
  Id row_softmax(Id a);
  Id add_row_bias(Id x, Id bias);  // bias broadcast over rows
  Id row(Id a, int64_t i);         // 1 x cols slice
  // TN x d -> N x (T*d): row i gathers vertex i's T time-major rows.
  Id gather_time_major(Id a, int64_t t_steps, int64_t n_vertices);
  Id row_sum(Id a);  // n x m -> n x 1
  Id col_sum(Id a);  // n x m -> 1 x m
  Id sum(Id a);      // -> scalar
  Id mean(Id a);     // -> scalar
  // Mean elementwise Huber distance -> scalar.
  Id huber(Id a, Id b, double delta);

  const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(Id id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  // loss must be scalar. Accumulates d(loss)/d(param) into every Parameter
  // reachable from it, then resets the tape.
  void backward(Id loss);
  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated only when requires_grad
    bool requires_grad = false;
    Parameter* owner = nullptr;
  };

  Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }
  Tensor& grad_ref(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
  Id emplace(Tensor value, bool requires_grad, const char* op);
  void record(std::function<void(Tape&)> step);

  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&)>> steps_;
  std::unordered_map<const Parameter*, Id> param_nodes_;
};

}  // namespace leaf
