#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "unida/autodiff.hpp"
#include "unida/tensor.hpp"

namespace unida::test {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Rows of positive entries summing to one.
inline Tensor random_probs(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::exponential_distribution<double> e(1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (auto& v : t.row_span(r)) s += (v = e(rng) + 1e-3);
    for (auto& v : t.row_span(r)) v /= s;
  }
  return t;
}

// Central differences of a scalar function with respect to every entry of `x`.
inline Tensor numeric_grad(const std::function<double()>& f, Tensor& x, double eps = 1e-6) {
  Tensor g = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f();
    x[i] = keep - eps;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// |a - n| <= max(abs, rel * |n|) everywhere. Returns the worst excess ratio.
inline double grad_mismatch(const Tensor& analytic, const Tensor& numeric, double abs_tol = 1e-6,
                            double rel_tol = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double tol = std::max(abs_tol, rel_tol * std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / tol);
  }
  return worst;
}

// Scalar reduction with non-uniform weights: sum((y + c)^2).
inline ad::Var probe_loss(const ad::Var& y, const Tensor& c) {
  return ad::sum(ad::square(ad::add(y, ad::leaf(c))));
}

}  // namespace unida::test
