#include <gtest/gtest.h>

#include <omp.h>

#include "support.hpp"
#include "unida/kernels.hpp"

using namespace unida;
using namespace unida::test;
using namespace unida::kernels;

namespace {

struct Shape {
  std::size_t m, k, n;
};

class KernelAgreement : public ::testing::TestWithParam<Shape> {};

}  // namespace

TEST_P(KernelAgreement, ParallelMatchesSerialBitForBit) {
  const auto s = GetParam();
  const MatDims d{s.m, s.k, s.n};
  std::mt19937_64 rng(s.m * 131 + s.k * 17 + s.n);
  Tensor a = random_tensor({s.m, s.k}, rng), b = random_tensor({s.k, s.n}, rng);
  Tensor g = random_tensor({s.m, s.n}, rng);

  Tensor c1({s.m, s.n}), c2({s.m, s.n});
  serial::matmul(a.data(), b.data(), c1.data(), d);
  parallel::matmul(a.data(), b.data(), c2.data(), d);
  EXPECT_EQ(c1, c2);

  Tensor da1 = random_tensor({s.m, s.k}, rng), da2 = da1;
  serial::matmul_grad_lhs(g.data(), b.data(), da1.data(), d);
  parallel::matmul_grad_lhs(g.data(), b.data(), da2.data(), d);
  EXPECT_EQ(da1, da2);

  Tensor db1 = random_tensor({s.k, s.n}, rng), db2 = db1;
  serial::matmul_grad_rhs(a.data(), g.data(), db1.data(), d);
  parallel::matmul_grad_rhs(a.data(), g.data(), db2.data(), d);
  EXPECT_EQ(db1, db2);

  Tensor y1({s.m, s.n}), y2({s.m, s.n});
  serial::softmax_rows(g.data(), y1.data(), s.m, s.n);
  parallel::softmax_rows(g.data(), y2.data(), s.m, s.n);
  EXPECT_EQ(y1, y2);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelAgreement,
                         ::testing::Values(Shape{1, 1, 1}, Shape{3, 5, 2}, Shape{64, 16, 64},
                                           Shape{257, 33, 19}, Shape{512, 64, 32}),
                         [](const auto& info) {
                           const Shape& s = info.param;
                           return std::to_string(s.m) + "x" + std::to_string(s.k) + "x" +
                                  std::to_string(s.n);
                         });

TEST(Kernels, MatmulMatchesNaiveTripleLoop) {
  std::mt19937_64 rng(9);
  const MatDims d{4, 3, 5};
  Tensor a = random_tensor({4, 3}, rng), b = random_tensor({3, 5}, rng), c({4, 5});
  kernels::matmul(a.data(), b.data(), c.data(), d);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < 3; ++p) s += a.at(i, p) * b.at(p, j);
      EXPECT_DOUBLE_EQ(c.at(i, j), s);
    }
}

TEST(Kernels, DispatchThresholdDoesNotChangeResults) {
  std::mt19937_64 rng(11);
  const MatDims d{128, 32, 16};
  Tensor a = random_tensor({128, 32}, rng), b = random_tensor({32, 16}, rng);
  Tensor c1({128, 16}), c2({128, 16});
  const auto keep = parallel_threshold();
  set_parallel_threshold(0);
  kernels::matmul(a.data(), b.data(), c1.data(), d);
  set_parallel_threshold(std::size_t(-1));
  kernels::matmul(a.data(), b.data(), c2.data(), d);
  set_parallel_threshold(keep);
  EXPECT_EQ(c1, c2);
}

TEST(Kernels, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({7, 4}, rng, -50, 50), y({7, 4});
  kernels::softmax_rows(x.data(), y.data(), 7, 4);
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (double v : y.row_span(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
}
