#pragma once

#include <functional>
#include <vector>

#include "textrev/matrix.hpp"

namespace textrev {

// Reverse-mode autodiff over Matrix values. A Tape is built per forward pass;
// node creation order is a topological order, so backward() is a single
// reverse sweep. Gradients flow to any leaf marked requires_grad — model
// parameters during training, KV caches and soft embeddings during attacks.
class Tape {
 public:
  struct Var {
    int id = -1;
    int rows = 0;
    int cols = 0;
    bool valid() const { return id >= 0; }
  };

  // Leaf that copies the matrix onto the tape.
  Var leaf(const Matrix& m, bool requires_grad = false);
  // Leaf aliasing external storage; `m` must outlive all tape use.
  Var leaf_view(const Matrix* m, bool requires_grad = false);

  Var add(Var a, Var b);
  Var add_row(Var a, Var bias);  // bias is 1 x cols, broadcast over rows
  Var affine(Var a, float k, float c);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var gather_rows(Var table, std::vector<int> ids);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int r0, int r1);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_cols(const std::vector<Var>& parts);
  Var softmax_rows(Var a);
  Var logc(Var a, float eps = 1e-12f);  // log(max(a, eps))
  Var sum_all(Var a);
  Var mean_rows(Var a);
  Var pick(Var a, int r, int c);
  Var layer_norm_rows(Var x, Var gain, Var bias, float eps = 1e-5f);
  Var gelu(Var a);
  // Mean negative log-likelihood over rows; numerically stable log-softmax.
  Var cross_entropy_from_logits(Var logits, std::vector<int> targets);

  void backward(Var root);

  const float* val(Var v) const { return value_ptr(v.id); }
  const float* grad(Var v) const { return nodes_[v.id].grad.data(); }
  double scalar(Var v) const { return static_cast<double>(val(v)[0]); }
  Matrix value_matrix(Var v) const;
  Matrix grad_matrix(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires; }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<float> val;     // owned storage (empty for external leaves)
    const float* ext = nullptr; // external leaf storage
    std::vector<float> grad;
    std::vector<float> aux;     // op scratch saved for backward
    bool requires = false;
    std::function<void(Tape&)> back;
  };

  const float* value_ptr(int id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : n.val.data();
  }
  float* ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.rows) * n.cols, 0.0f);
    return n.grad.data();
  }
  Var new_node(int rows, int cols, bool requires);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace textrev
