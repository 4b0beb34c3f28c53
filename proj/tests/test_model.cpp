#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "unida/errors.hpp"
#include "unida/losses.hpp"
#include "unida/model.hpp"

using namespace unida;
using namespace unida::test;

namespace {

MlpSpec spec_f() { return {4, {8}, 6, Activation::none}; }
MlpSpec spec_c() { return {6, {}, 3, Activation::softmax}; }
MlpSpec spec_d() { return {6, {5, 5}, 1, Activation::sigmoid}; }

ModelBundle small_model(std::uint64_t seed = 1) {
  return ModelBundle::init(spec_f(), spec_c(), spec_d(), seed);
}

std::vector<Tensor> values(const ModelBundle& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST(Model, LayerCounts) {
  const auto m = small_model();
  EXPECT_EQ(m.label().layers().size(), 1u);   // single linear map
  EXPECT_EQ(m.domain().layers().size(), 3u);  // two hidden, one output
  EXPECT_EQ(m.label().layers()[0].weight->value.shape(), (std::vector<std::size_t>{6, 3}));
}

TEST(Model, NamedParametersStableOrder) {
  const auto names = small_model().named_parameters();
  ASSERT_EQ(names.size(), 2u * (2 + 1 + 3));
  EXPECT_EQ(names.front().name, "F.0.weight");
  EXPECT_EQ(names[1].name, "F.0.bias");
  EXPECT_EQ(names.back().name, "D.2.bias");
}

TEST(Model, InitIsSeedDeterministic) {
  EXPECT_EQ(values(small_model(7)), values(small_model(7)));
  EXPECT_NE(values(small_model(7)), values(small_model(8)));
}

TEST(Model, InitRejectsInconsistentNetworks) {
  EXPECT_THROW(ModelBundle::init(spec_f(), {5, {}, 3, Activation::softmax}, spec_d(), 0),
               ConfigError);
  EXPECT_THROW(ModelBundle::init(spec_f(), spec_c(), {6, {}, 2, Activation::sigmoid}, 0),
               ConfigError);
  EXPECT_THROW(ModelBundle::init(spec_f(), {6, {}, 3, Activation::none}, spec_d(), 0),
               ConfigError);
  EXPECT_THROW(ModelBundle::init(spec_f(), spec_c(), {6, {0}, 1, Activation::sigmoid}, 0),
               ConfigError);
}

TEST(Model, OutputsAreDistributions) {
  std::mt19937_64 rng(2);
  const auto m = small_model();
  const Tensor x = random_tensor({10, 4}, rng, -3, 3);
  const Tensor p = forward_label(m, x);
  const Tensor d = forward_domain(m, x, 1.0);
  for (std::size_t r = 0; r < 10; ++r) {
    double s = 0.0;
    for (double v : p.row_span(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_GT(d[r], 0.0);
    EXPECT_LT(d[r], 1.0);
  }
  EXPECT_THROW(forward_label(m, Tensor({2, 3})), DimensionError);
}

TEST(Model, RowsAreIndependentOfBatch) {
  std::mt19937_64 rng(4);
  const auto m = small_model();
  const Tensor x = random_tensor({6, 4}, rng);
  const Tensor all = forward_label(m, x);
  for (std::size_t r = 0; r < 6; ++r) {
    const Tensor one = forward_label(m, slice_rows(x, r, r + 1));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(one.at(0, j), all.at(r, j));
  }
}

TEST(Model, GrlNegatesFeatureGradientOnly) {
  std::mt19937_64 rng(5);
  const Tensor xs = random_tensor({3, 4}, rng), xt = random_tensor({3, 4}, rng);
  const Tensor x = concat_rows(xs, xt);
  const std::vector<std::size_t> src{0, 1, 2}, tgt{3, 4, 5};

  auto domain_loss = [&](const ModelBundle& m, bool with_grl, double lambda) {
    ad::zero_grad(m.parameters());
    auto d = with_grl ? forward_graph(m, x, lambda).domain
                      : m.domain().forward(m.feature().forward(ad::leaf(x)));
    ad::backward(loss_domain(ad::gather_rows(d, src), ad::gather_rows(d, tgt)));
    std::vector<Tensor> grads;
    for (const auto& p : m.parameters()) grads.push_back(p->grad);
    return grads;
  };

  const auto m = small_model(11);
  const auto plain = domain_loss(m, false, 0.0);
  const auto reversed = domain_loss(m, true, 1.0);
  const auto zeroed = domain_loss(m, true, 0.0);
  const std::size_t n_f = m.feature().parameters().size();
  const std::size_t n_c = m.label().parameters().size();
  for (std::size_t i = 0; i < plain.size(); ++i) {
    for (std::size_t k = 0; k < plain[i].size(); ++k) {
      if (i < n_f) {
        EXPECT_EQ(reversed[i][k], -plain[i][k]);
        EXPECT_EQ(zeroed[i][k], 0.0);
      } else if (i < n_f + n_c) {
        EXPECT_EQ(reversed[i][k], 0.0);  // C is not on the domain path
      } else {
        EXPECT_EQ(reversed[i][k], plain[i][k]);
        EXPECT_EQ(zeroed[i][k], plain[i][k]);
      }
    }
  }
}

TEST(Model, GrlRamp) {
  EXPECT_EQ(grl_ramp(0, 100), 0.0);
  EXPECT_NEAR(grl_ramp(100, 100), 2.0 / (1.0 + std::exp(-10.0)) - 1.0, 1e-15);
  for (std::size_t t = 1; t <= 100; ++t) EXPECT_GE(grl_ramp(t, 100), grl_ramp(t - 1, 100));
}

TEST(Model, CloneIsDeep) {
  auto m = small_model();
  auto c = m.clone();
  EXPECT_EQ(values(m), values(c));
  c.parameters()[0]->value[0] += 1.0;
  EXPECT_NE(values(m), values(c));
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto m = small_model(21);
  std::stringstream buf;
  write_checkpoint(m, buf);
  const auto back = read_checkpoint(buf);
  EXPECT_EQ(values(m), values(back));
  EXPECT_EQ(back.feature().spec(), m.feature().spec());
  EXPECT_EQ(back.label().spec(), m.label().spec());
  EXPECT_EQ(back.domain().spec(), m.domain().spec());
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTACHECKPOINT");
  EXPECT_THROW(read_checkpoint(bad), ParseError);
  std::stringstream buf;
  write_checkpoint(small_model(), buf);
  const std::string full = buf.str();
  std::stringstream truncated(full.substr(0, full.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ck.bin"), ParseError);
}
