#pragma once

#include <cstddef>
#include <span>

// Dense inner loops used by the autodiff ops.
//
// Every kernel exists twice: `serial::` is the reference, `parallel::` splits
// the outer loop across OpenMP threads. Each output element is accumulated in
// the same order in both, so the two agree bit-for-bit. The dispatching
// functions in `kernels::` pick one based on problem size.
namespace unida::kernels {

struct MatDims {
  std::size_t m;  // rows of the left operand
  std::size_t k;  // inner
  std::size_t n;  // columns of the right operand
};

namespace serial {
// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
// da[m x k] += g[m x n] * b[k x n]^T
void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d);
// db[k x n] += a[m x k]^T * g[m x n]
void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d);
// Row-wise softmax of a rows x cols matrix, max-subtracted.
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);
}  // namespace serial

namespace parallel {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d);
void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);
}  // namespace parallel

// Multiply-add count at or above which the dispatchers use the OpenMP path.
// Nested calls from inside a parallel region always take the serial path.
void set_parallel_threshold(std::size_t flops);
std::size_t parallel_threshold();

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d);
void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);

}  // namespace unida::kernels
