#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "barcodelm/tensor.hpp"

namespace barcodelm {

template <typename T>
using NamedTensors = std::map<std::string, TensorData<T>>;

// Reverse-mode tape. Ops append nodes; backward() runs the recorded
// closures in reverse topological order from a scalar loss node. One tape
// per training step; tapes are not thread-safe.
template <typename T>
class Tape {
 public:
  struct Node {
    TensorData<T> value;
    TensorData<T> grad;  // allocated on first accumulation
    bool grad_allocated = false;
    bool requires_grad = false;
    std::vector<int> parents;
    std::function<void(Tape&)> backward;
  };

  int add_node(TensorData<T> value, std::vector<int> parents,
               std::function<void(Tape&)> backward_fn) {
    Node node;
    node.value = std::move(value);
    node.parents = std::move(parents);
    for (int p : node.parents) {
      if (nodes_[static_cast<std::size_t>(p)].requires_grad) {
        node.requires_grad = true;
        break;
      }
    }
    node.backward = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int add_leaf(TensorData<T> value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  const TensorData<T>& value(int id) const { return node(id).value; }

  // Gradient buffer, zero-initialized on first access.
  TensorData<T>& grad(int id) {
    Node& n = node(id);
    if (!n.grad_allocated) {
      n.grad = TensorData<T>::zeros(n.value.shape);
      n.grad_allocated = true;
    }
    return n.grad;
  }

  bool has_grad(int id) const { return node(id).grad_allocated; }

  void backward(int loss_id) {
    Node& loss = node(loss_id);
    if (loss.value.size() != 1) {
      throw MathError("backward: loss must be scalar, got shape " + loss.value.shape_string());
    }
    if (!loss.requires_grad) return;
    grad(loss_id).v[0] = T(1);

    // Iterative DFS post-order over the requires_grad subgraph.
    std::vector<int> order;
    std::vector<char> state(nodes_.size(), 0);  // 0 unvisited, 1 on stack, 2 done
    std::vector<int> stack = {loss_id};
    while (!stack.empty()) {
      const int id = stack.back();
      if (state[static_cast<std::size_t>(id)] == 0) {
        state[static_cast<std::size_t>(id)] = 1;
        for (int p : node(id).parents) {
          if (state[static_cast<std::size_t>(p)] == 0 && node(p).requires_grad) {
            stack.push_back(p);
          }
        }
      } else {
        stack.pop_back();
        if (state[static_cast<std::size_t>(id)] == 1) {
          state[static_cast<std::size_t>(id)] = 2;
          order.push_back(id);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node& n = node(*it);
      if (n.backward && n.grad_allocated) n.backward(*this);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// Lightweight handle to a tape node.
template <typename T>
struct Value {
  Tape<T>* tape = nullptr;
  int id = -1;

  const TensorData<T>& data() const { return tape->value(id); }
  const std::vector<std::int64_t>& shape() const { return data().shape; }
  TensorData<T>& grad() const { return tape->grad(id); }
  bool requires_grad() const { return tape->node(id).requires_grad; }
};

template <typename T>
Value<T> make_leaf(Tape<T>& tape, TensorData<T> value, bool requires_grad) {
  return Value<T>{&tape, tape.add_leaf(std::move(value), requires_grad)};
}

// Binds named parameters as tape leaves (sorted name order).
template <typename T>
std::map<std::string, Value<T>> bind_parameters(Tape<T>& tape, const NamedTensors<T>& params,
                                                bool requires_grad) {
  std::map<std::string, Value<T>> bound;
  for (const auto& [name, tensor] : params) {
    bound.emplace(name, make_leaf(tape, tensor, requires_grad));
  }
  return bound;
}

// Collects gradients of bound parameters after backward(). Parameters that
// received no gradient get zeros.
template <typename T>
NamedTensors<T> collect_gradients(Tape<T>& tape, const std::map<std::string, Value<T>>& bound) {
  NamedTensors<T> grads;
  for (const auto& [name, value] : bound) {
    if (tape.has_grad(value.id)) {
      grads.emplace(name, tape.node(value.id).grad);
    } else {
      grads.emplace(name, TensorData<T>::zeros(value.data().shape));
    }
  }
  return grads;
}

}  // namespace barcodelm
