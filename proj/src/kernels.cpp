#include "unida/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace unida::kernels {

namespace {

std::atomic<std::size_t> g_threshold{1u << 18};

inline void softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline bool use_parallel(std::size_t work) {
  return work >= g_threshold.load(std::memory_order_relaxed) && !omp_in_parallel();
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* gi = g.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* bp = b.data() + p * d.n;
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += gi[j] * bp[j];
      da[i * d.k + p] += acc;
    }
  }
}

void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d) {
  for (std::size_t p = 0; p < d.k; ++p) {
    double* dbp = db.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double aip = a[i * d.k + p];
      const double* gi = g.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) dbp[j] += aip * gi[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x.data() + r * cols, y.data() + r * cols, cols);
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * d.n;
    std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const double* gi = g.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* bp = b.data() + p * d.n;
      double acc = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) acc += gi[j] * bp[j];
      da[i * d.k + p] += acc;
    }
  }
}

void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d) {
  const auto k = static_cast<std::ptrdiff_t>(d.k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < k; ++p) {
    double* dbp = db.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double aip = a[i * d.k + p];
      const double* gi = g.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) dbp[j] += aip * gi[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  const auto r = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < r; ++i) softmax_row(x.data() + i * cols, y.data() + i * cols, cols);
}

}  // namespace parallel

void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }
std::size_t parallel_threshold() { return g_threshold.load(); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  if (use_parallel(d.m * d.k * d.n)) {
    parallel::matmul(a, b, c, d);
  } else {
    serial::matmul(a, b, c, d);
  }
}

void matmul_grad_lhs(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     MatDims d) {
  if (use_parallel(d.m * d.k * d.n)) {
    parallel::matmul_grad_lhs(g, b, da, d);
  } else {
    serial::matmul_grad_lhs(g, b, da, d);
  }
}

void matmul_grad_rhs(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     MatDims d) {
  if (use_parallel(d.m * d.k * d.n)) {
    parallel::matmul_grad_rhs(a, g, db, d);
  } else {
    serial::matmul_grad_rhs(a, g, db, d);
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  if (use_parallel(rows * cols * 16)) {
    parallel::softmax_rows(x, y, rows, cols);
  } else {
    serial::softmax_rows(x, y, rows, cols);
  }
}

}  // namespace unida::kernels
