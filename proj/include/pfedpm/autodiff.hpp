#pragma once

#include <functional>
#include <vector>

#include "pfedpm/tensor.hpp"

namespace pfedpm {

// Define-by-run reverse-mode tape. A fresh tape is built per forward pass;
// backward() walks the recorded ops in exact reverse execution order and is
// allowed once, after which the tape only serves gradient reads.
class Tape {
 public:
  using NodeId = int;

  // Leaf that wants a gradient (model parameter).
  NodeId param(const Tensor& t) { return leaf(t, true); }
  // Leaf treated as a constant (inputs, frozen prototypes).
  NodeId constant(const Tensor& t) { return leaf(t, false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);            // same-shape elementwise
  NodeId scale(NodeId a, double c);
  NodeId add_bias(NodeId x, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId mean_rows(NodeId x);
  NodeId gather_rows(NodeId x, std::vector<int> idx);
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);
  NodeId mse(NodeId pred, NodeId target);
  NodeId l2_distance(NodeId u, NodeId v);
  NodeId sum(NodeId x);

  // Accumulates adjoints for every node reachable from root; root must be
  // scalar (1x1). Recording is closed afterwards.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[check(id)].val; }
  const Tensor& grad(NodeId id) const;
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor adj;
    bool needs_grad = false;
    std::function<void(Tape&)> back;  // null for leaves
  };

  NodeId leaf(const Tensor& t, bool needs_grad);
  NodeId push(Tensor val, bool needs_grad, std::function<void(Tape&)> back);
  int check(NodeId id) const;
  void require_open(const char* op) const;
  Tensor& adj(NodeId id) { return nodes_[id].adj; }

  std::vector<Node> nodes_;
  NodeId last_ = -1;  // node whose back() is currently running
  bool finalized_ = false;
};

}  // namespace pfedpm
