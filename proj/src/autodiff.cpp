#include "unida/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "unida/errors.hpp"
#include "unida/kernels.hpp"

namespace unida::ad {

namespace {

Var make(Tensor value, Op op, std::vector<Var> parents, std::function<void(Node&)> bw) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op ") +
                       std::string(op_name(op)));
  }
  auto node = std::make_shared<Node>(std::move(value), op, std::move(parents));
  node->backward_fn = std::move(bw);
  return node;
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (!a->value.same_shape(b->value)) throw DimensionError(std::string(what) + ": shape mismatch");
}

template <typename F>
Var unary(const Var& a, Op op, F&& f) {
  Tensor out = Tensor::zeros_like(a->value);
  auto in = a->value.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return make(std::move(out), op, {a}, nullptr);
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add_bias: return "add_bias";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::scale: return "scale";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::softmax: return "softmax";
    case Op::log: return "log";
    case Op::grad_reverse: return "grad_reverse";
    case Op::gather_rows: return "gather_rows";
    case Op::pick: return "pick";
    case Op::concat_rows: return "concat_rows";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::col_mean: return "col_mean";
    case Op::square: return "square";
    case Op::one_minus: return "one_minus";
  }
  return "?";
}

Node::Node(Tensor v, Op o, std::vector<Var> p)
    : value(std::move(v)), grad(Tensor::zeros_like(value)), op(o), parents(std::move(p)) {}

Var leaf(Tensor value) { return make(std::move(value), Op::leaf, {}, nullptr); }

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(av.cols()) +
                         " vs " + std::to_string(bv.rows()) + ")");
  }
  const kernels::MatDims d{av.rows(), av.cols(), bv.cols()};
  Tensor out({d.m, d.n});
  kernels::matmul(av.data(), bv.data(), out.data(), d);
  return make(std::move(out), Op::matmul, {a, b}, [d](Node& self) {
    Node& lhs = *self.parents[0];
    Node& rhs = *self.parents[1];
    kernels::matmul_grad_lhs(self.grad.data(), rhs.value.data(), lhs.grad.data(), d);
    kernels::matmul_grad_rhs(lhs.value.data(), self.grad.data(), rhs.grad.data(), d);
  });
}

Var add_bias(const Var& x, const Var& bias) {
  const std::size_t m = x->value.rows();
  const std::size_t n = x->value.cols();
  if (bias->value.size() != n) throw DimensionError("add_bias: bias width mismatch");
  Tensor out = x->value;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += bias->value[j];
  }
  return make(std::move(out), Op::add_bias, {x, bias}, [m, n](Node& self) {
    auto g = self.grad.data();
    auto gx = self.parents[0]->grad.data();
    auto gb = self.parents[1]->grad.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gx[i * n + j] += g[i * n + j];
        gb[j] += g[i * n + j];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make(std::move(out), Op::add, {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.parents[0]->grad[i] += self.grad[i];
      self.parents[1]->grad[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make(std::move(out), Op::sub, {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.parents[0]->grad[i] += self.grad[i];
      self.parents[1]->grad[i] -= self.grad[i];
    }
  });
}

Var scale(const Var& a, double c) {
  auto out = unary(a, Op::scale, [c](double v) { return c * v; });
  out->backward_fn = [c](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[0]->grad[i] += c * self.grad[i];
  };
  return out;
}

Var relu(const Var& a) {
  auto out = unary(a, Op::relu, [](double v) { return v > 0.0 ? v : 0.0; });
  out->backward_fn = [](Node& self) {
    const Node& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.value[i] > 0.0) self.parents[0]->grad[i] += self.grad[i];
    }
  };
  return out;
}

Var sigmoid(const Var& a) {
  auto out = unary(a, Op::sigmoid, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  out->backward_fn = [](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      self.parents[0]->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  };
  return out;
}

Var softmax(const Var& a) {
  const std::size_t rows = a->value.rows();
  const std::size_t cols = a->value.cols();
  Tensor out = Tensor::zeros_like(a->value);
  kernels::softmax_rows(a->value.data(), out.data(), rows, cols);
  return make(std::move(out), Op::softmax, {a}, [rows, cols](Node& self) {
    auto& gin = self.parents[0]->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data().data() + r * cols;
      const double* g = self.grad.data().data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j) gin[r * cols + j] += y[j] * (g[j] - dot);
    }
  });
}

Var log(const Var& a, double floor) {
  auto out = unary(a, Op::log, [floor](double v) { return std::log(std::max(v, floor)); });
  out->backward_fn = [floor](Node& self) {
    const Node& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.value[i] > floor) self.parents[0]->grad[i] += self.grad[i] / in.value[i];
    }
  };
  return out;
}

Var grad_reverse(const Var& a, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("grad_reverse: lambda must be >= 0");
  auto out = make(a->value, Op::grad_reverse, {a}, nullptr);
  out->backward_fn = [lambda](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.parents[0]->grad[i] += -lambda * self.grad[i];
    }
  };
  return out;
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const std::size_t n_rows = a->value.rows();
  const std::size_t cols = a->value.cols();
  if (rows.empty()) throw DimensionError("gather_rows: empty selection");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> data;
  data.reserve(idx.size() * cols);
  for (auto r : idx) {
    if (r >= n_rows) throw DimensionError("gather_rows: row index out of range");
    auto src = a->value.row_span(r);
    data.insert(data.end(), src.begin(), src.end());
  }
  Tensor out({idx.size(), cols}, std::move(data));
  return make(std::move(out), Op::gather_rows, {a}, [idx = std::move(idx), cols](Node& self) {
    auto& gin = self.parents[0]->grad;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) gin[idx[i] * cols + j] += self.grad[i * cols + j];
    }
  });
}

Var pick(const Var& a, std::span<const std::size_t> cols) {
  const std::size_t rows = a->value.rows();
  const std::size_t width = a->value.cols();
  if (cols.size() != rows) throw DimensionError("pick: one column index per row required");
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    if (idx[i] >= width) throw ContractError("pick: column index out of range");
    out[i] = a->value.at(i, idx[i]);
  }
  return make(std::move(out), Op::pick, {a}, [idx = std::move(idx), width](Node& self) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      self.parents[0]->grad[i * width + idx[i]] += self.grad[i];
    }
  });
}

Var concat_rows(const Var& top, const Var& bottom) {
  Tensor out = unida::concat_rows(top->value, bottom->value);
  const std::size_t split = top->value.size();
  return make(std::move(out), Op::concat_rows, {top, bottom}, [split](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (i < split) {
        self.parents[0]->grad[i] += self.grad[i];
      } else {
        self.parents[1]->grad[i - split] += self.grad[i];
      }
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data()) s += v;
  return make(Tensor::scalar(s), Op::sum, {a}, [](Node& self) {
    const double g = self.grad[0];
    for (auto& v : self.parents[0]->grad.data()) v += g;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a->value.size());
  double s = 0.0;
  for (double v : a->value.data()) s += v;
  return make(Tensor::scalar(s / n), Op::mean, {a}, [n](Node& self) {
    const double g = self.grad[0] / n;
    for (auto& v : self.parents[0]->grad.data()) v += g;
  });
}

Var col_mean(const Var& a) {
  const std::size_t rows = a->value.rows();
  const std::size_t cols = a->value.cols();
  Tensor out({cols});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += a->value.at(i, j);
  }
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t j = 0; j < cols; ++j) out[j] *= inv;
  return make(std::move(out), Op::col_mean, {a}, [rows, cols, inv](Node& self) {
    auto& gin = self.parents[0]->grad;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) gin[i * cols + j] += self.grad[j] * inv;
    }
  });
}

Var square(const Var& a) {
  auto out = unary(a, Op::square, [](double v) { return v * v; });
  out->backward_fn = [](Node& self) {
    const Node& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.parents[0]->grad[i] += 2.0 * in.value[i] * self.grad[i];
    }
  };
  return out;
}

Var one_minus(const Var& a) {
  auto out = unary(a, Op::one_minus, [](double v) { return 1.0 - v; });
  out->backward_fn = [](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[0]->grad[i] -= self.grad[i];
  };
  return out;
}

std::vector<Node*> reverse_topological(const Var& root) {
  // Iterative post-order DFS; reversing the post-order gives parents after children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

void backward(const Var& loss) {
  if (!loss->value.is_scalar()) throw ContractError("backward: loss must be a scalar");
  loss->grad[0] += 1.0;
  for (Node* node : reverse_topological(loss)) {
    if (node->backward_fn) node->backward_fn(*node);
  }
}

void zero_grad(std::span<const Var> params) {
  for (const auto& p : params) p->grad.fill(0.0);
}

}  // namespace unida::ad
