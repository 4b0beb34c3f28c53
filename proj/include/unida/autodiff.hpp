#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "unida/tensor.hpp"

// Minimal reverse-mode differentiation over dense tensors.
//
// A graph is built eagerly: every op computes its value immediately and
// records how to push gradients back into its parents. `backward` walks the
// graph from a scalar once, in reverse topological order. Gradients
// accumulate; callers zero parameter grads between steps.
namespace unida::ad {

enum class Op {
  leaf,
  matmul,
  add_bias,
  add,
  sub,
  scale,
  relu,
  sigmoid,
  softmax,
  log,
  grad_reverse,
  gather_rows,
  pick,
  concat_rows,
  sum,
  mean,
  col_mean,
  square,
  one_minus,
};

std::string_view op_name(Op op);

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Node(Tensor value, Op op, std::vector<Var> parents);

  Tensor value;
  Tensor grad;  // same shape as value
  Op op;
  std::vector<Var> parents;
  // Reads this->grad and accumulates into parents' grads. Empty for leaves.
  std::function<void(Node&)> backward_fn;
};

// Trainable parameter or input.
Var leaf(Tensor value);

Var matmul(const Var& a, const Var& b);
// x[m x n] + bias[n] broadcast over rows.
Var add_bias(const Var& x, const Var& bias);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var relu(const Var& a);
Var sigmoid(const Var& a);
// Row-wise softmax; a rank-1 input is a single row.
Var softmax(const Var& a);
// ln(max(a, floor)); gradient is zero where the floor is active.
Var log(const Var& a, double floor = 1e-12);
// Identity forward; backward multiplies the incoming gradient by -lambda.
Var grad_reverse(const Var& a, double lambda);
// Select rows of a matrix (indices may repeat).
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
// out[i] = a[i, cols[i]], shape {rows}.
Var pick(const Var& a, std::span<const std::size_t> cols);
Var concat_rows(const Var& top, const Var& bottom);
Var sum(const Var& a);
Var mean(const Var& a);
// Column means of a matrix, shape {cols}.
Var col_mean(const Var& a);
Var square(const Var& a);
Var one_minus(const Var& a);

// Requires a scalar loss; seeds d loss / d loss = 1.
void backward(const Var& loss);
void zero_grad(std::span<const Var> params);

// Reverse topological order starting at `root` (root first). Each node once.
std::vector<Node*> reverse_topological(const Var& root);

}  // namespace unida::ad
