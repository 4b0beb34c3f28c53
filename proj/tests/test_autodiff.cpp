#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "support.hpp"
#include "unida/errors.hpp"

using namespace unida;
using namespace unida::test;

namespace {

using Builder = std::function<ad::Var(const std::vector<ad::Var>&)>;

// Checks analytic gradients of probe_loss(op(inputs)) against central differences.
void check_op(const Builder& op, std::vector<Tensor> inputs, std::mt19937_64& rng) {
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(ad::leaf(t));
  const auto probe_shape = op(leaves)->value.shape();
  const Tensor c = random_tensor(probe_shape, rng);

  auto y = op(leaves);
  ad::backward(probe_loss(y, c));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&] {
      std::vector<ad::Var> fresh;
      for (const auto& t : inputs) fresh.push_back(ad::leaf(t));
      return probe_loss(op(fresh), c)->value.item();
    };
    const Tensor numeric = numeric_grad(f, inputs[i]);
    EXPECT_LE(grad_mismatch(leaves[i]->grad, numeric), 1.0) << "input " << i;
  }
}

Tensor away_from_zero(Tensor t) {
  for (auto& v : t.data()) v = v < 0 ? v - 0.05 : v + 0.05;
  return t;
}

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
  Tensor r(std::vector<std::size_t> s) { return random_tensor(std::move(s), rng); }
};

}  // namespace

TEST_F(OpGradient, Matmul) {
  check_op([](auto& v) { return ad::matmul(v[0], v[1]); }, {r({3, 4}), r({4, 2})}, rng);
}

TEST_F(OpGradient, AddBias) {
  check_op([](auto& v) { return ad::add_bias(v[0], v[1]); }, {r({3, 4}), r({4})}, rng);
}

TEST_F(OpGradient, AddSubScale) {
  check_op([](auto& v) { return ad::add(v[0], v[1]); }, {r({2, 3}), r({2, 3})}, rng);
  check_op([](auto& v) { return ad::sub(v[0], v[1]); }, {r({2, 3}), r({2, 3})}, rng);
  check_op([](auto& v) { return ad::scale(v[0], -1.7); }, {r({2, 3})}, rng);
}

TEST_F(OpGradient, ReluAwayFromKink) {
  check_op([](auto& v) { return ad::relu(v[0]); }, {away_from_zero(r({3, 5}))}, rng);
}

TEST_F(OpGradient, Sigmoid) {
  check_op([](auto& v) { return ad::sigmoid(v[0]); }, {random_tensor({3, 4}, rng, -6, 6)}, rng);
}

TEST_F(OpGradient, SoftmaxRowsAndVector) {
  check_op([](auto& v) { return ad::softmax(v[0]); }, {random_tensor({3, 5}, rng, -3, 3)}, rng);
  check_op([](auto& v) { return ad::softmax(v[0]); }, {random_tensor({5}, rng, -3, 3)}, rng);
}

TEST_F(OpGradient, Log) {
  check_op([](auto& v) { return ad::log(v[0]); }, {random_tensor({2, 4}, rng, 0.1, 2.0)}, rng);
}

TEST_F(OpGradient, GradReversePositiveLambda) {
  // Identity forward, -lambda times the upstream gradient backward.
  Tensor x = r({2, 3});
  const Tensor c = random_tensor(x.shape(), rng);
  auto a = ad::leaf(x);
  ad::backward(probe_loss(ad::grad_reverse(a, 0.7), c));
  Tensor numeric = numeric_grad([&] { return probe_loss(ad::leaf(x), c)->value.item(); },
                                x);
  for (auto& v : numeric.data()) v *= -0.7;
  EXPECT_LE(grad_mismatch(a->grad, numeric), 1.0);
}

TEST_F(OpGradient, GatherPickConcat) {
  const std::vector<std::size_t> rows{2, 0, 2};
  check_op([&](auto& v) { return ad::gather_rows(v[0], rows); }, {r({3, 4})}, rng);
  const std::vector<std::size_t> cols{1, 3, 0};
  check_op([&](auto& v) { return ad::pick(v[0], cols); }, {r({3, 4})}, rng);
  check_op([](auto& v) { return ad::concat_rows(v[0], v[1]); }, {r({2, 3}), r({1, 3})}, rng);
}

TEST_F(OpGradient, Reductions) {
  check_op([](auto& v) { return ad::sum(v[0]); }, {r({3, 4})}, rng);
  check_op([](auto& v) { return ad::mean(v[0]); }, {r({3, 4})}, rng);
  check_op([](auto& v) { return ad::col_mean(v[0]); }, {r({3, 4})}, rng);
  check_op([](auto& v) { return ad::square(v[0]); }, {r({3, 4})}, rng);
  check_op([](auto& v) { return ad::one_minus(v[0]); }, {r({3, 4})}, rng);
}

TEST_F(OpGradient, FanOutAccumulates) {
  check_op([](auto& v) { return ad::add(v[0], ad::square(v[0])); }, {r({2, 3})}, rng);
  check_op([](auto& v) { return ad::matmul(v[0], v[0]); }, {r({3, 3})}, rng);
}

TEST(GradReverse, ForwardIdentityBackwardNegated) {
  std::mt19937_64 rng(3);
  for (double lambda : {0.0, 0.5, 1.0, 2.5}) {
    const Tensor x = random_tensor({4, 3}, rng);
    const Tensor c = random_tensor({4, 3}, rng);
    // Upstream gradient: the same graph without the reversal.
    auto plain = ad::leaf(x);
    ad::backward(probe_loss(plain, c));
    auto a = ad::leaf(x);
    auto y = ad::grad_reverse(a, lambda);
    EXPECT_EQ(y->value, x);
    ad::backward(probe_loss(y, c));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(a->grad[i], -lambda * plain->grad[i]);
  }
}

TEST(GradReverse, NegativeLambdaRejected) {
  EXPECT_THROW(ad::grad_reverse(ad::leaf(Tensor::row({1.0})), -0.1), ContractError);
}

TEST(Log, GradientVanishesBelowFloor) {
  auto a = ad::leaf(Tensor::row({1e-20, 0.5}));
  ad::backward(ad::sum(ad::log(a)));
  EXPECT_EQ(a->grad[0], 0.0);
  EXPECT_DOUBLE_EQ(a->grad[1], 2.0);
  EXPECT_DOUBLE_EQ(ad::log(ad::leaf(Tensor::row({0.0})))->value[0], std::log(1e-12));
}

TEST(Relu, SubgradientAtZeroIsZero) {
  auto a = ad::leaf(Tensor::row({0.0, -1.0, 2.0}));
  ad::backward(ad::sum(ad::relu(a)));
  EXPECT_EQ(a->grad, Tensor::row({0.0, 0.0, 1.0}));
}

TEST(Backward, RequiresScalar) {
  auto a = ad::leaf(Tensor::row({1.0, 2.0}));
  EXPECT_THROW(ad::backward(ad::square(a)), ContractError);
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  auto a = ad::leaf(Tensor::row({1.0, 2.0}));
  ad::backward(ad::sum(a));
  ad::backward(ad::sum(a));
  EXPECT_EQ(a->grad, Tensor::row({2.0, 2.0}));
  std::vector<ad::Var> params{a};
  ad::zero_grad(params);
  EXPECT_EQ(a->grad, Tensor::row({0.0, 0.0}));
}

TEST(Backward, TopologicalOrderVisitsEachNodeOnce) {
  auto a = ad::leaf(Tensor::row({1.0, 2.0}));
  auto b = ad::square(a);
  auto c = ad::add(b, ad::add(a, b));
  auto root = ad::sum(c);
  const auto order = ad::reverse_topological(root);
  EXPECT_EQ(order.front(), root.get());
  std::set<ad::Node*> seen(order.begin(), order.end());
  EXPECT_EQ(seen.size(), order.size());
  auto pos = [&](ad::Node* n) { return std::find(order.begin(), order.end(), n) - order.begin(); };
  EXPECT_LT(pos(c.get()), pos(b.get()));
  EXPECT_LT(pos(b.get()), pos(a.get()));
}

TEST(Backward, DeepChainDoesNotRecurse) {
  auto x = ad::leaf(Tensor::row({1.0}));
  ad::Var y = x;
  for (int i = 0; i < 100000; ++i) y = ad::scale(y, 1.0);
  ad::backward(ad::sum(y));
  EXPECT_EQ(x->grad[0], 1.0);
}

TEST(Ops, NonFiniteResultRaises) {
  auto a = ad::leaf(Tensor::row({1e300}));
  EXPECT_THROW(ad::scale(a, 1e300), NumericError);
}

TEST(Ops, ShapeErrors) {
  auto a = ad::leaf(Tensor({2, 3}));
  auto b = ad::leaf(Tensor({2, 3}));
  EXPECT_THROW(ad::matmul(a, b), DimensionError);
  EXPECT_THROW(ad::add(a, ad::leaf(Tensor({3, 2}))), DimensionError);
  EXPECT_THROW(ad::add_bias(a, ad::leaf(Tensor({2}))), DimensionError);
  const std::vector<std::size_t> bad_rows{5};
  EXPECT_THROW(ad::gather_rows(a, bad_rows), DimensionError);
  const std::vector<std::size_t> bad_cols{0, 7};
  EXPECT_THROW(ad::pick(a, bad_cols), ContractError);
}

TEST(Ops, SoftmaxIsStableAndNormalized) {
  auto y = ad::softmax(ad::leaf(Tensor::matrix({{1000.0, 1000.0}, {-1000.0, 0.0}})));
  EXPECT_DOUBLE_EQ(y->value.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y->value.at(1, 0) + y->value.at(1, 1), 1.0);
}
