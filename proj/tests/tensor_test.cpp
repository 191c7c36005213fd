#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ats/errors.hpp"
#include "ats/tensor.hpp"
#include "support/oracles.hpp"

using namespace ats;
using oracle::random_tensor;

namespace {

void expect_grads(const std::function<Tensor(const std::vector<Tensor>&)>& op, std::vector<Shape> shapes,
                  std::uint64_t seed, double input_scale = 1.0) {
  Rng rng(seed);
  std::vector<Tensor> xs;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    xs.push_back(random_tensor(shapes[i], rng, input_scale));
    names.push_back("x" + std::to_string(i));
  }
  // Fixed random readout weights so every output element matters.
  Rng wr(seed + 1000);
  Tensor w;
  auto f = [&]() {
    Tensor y = op(xs);
    if (!w.defined()) w = random_tensor(y.shape(), wr, 1.0, false);
    return sum(mul(y, w));
  };
  auto res = oracle::check_gradients(f, xs, names);
  EXPECT_LE(res.max_rel, 1e-4) << res.worst;
}

}  // namespace

TEST(TensorBasics, CreationAndShape) {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_EQ(Tensor::scalar(3.5).item(), 3.5);
  EXPECT_THROW(t.item(), ContractError);
}

TEST(TensorBasics, BroadcastOnlyOverLeadingAxes) {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from({3}, {10, 20, 30});
  Tensor y = add(a, row);
  EXPECT_EQ(y.at(1, 0), 14.0);
  Tensor col = Tensor::from({2}, {1, 2});
  EXPECT_THROW(add(a, col), DimensionError);
}

TEST(TensorBasics, NonFiniteOutputsThrow) {
  Tensor z = Tensor::from({1}, {0.0});
  EXPECT_THROW(log(z), NumericalError);
  Tensor big = Tensor::from({1}, {1000.0});
  EXPECT_THROW(ats::exp(big), NumericalError);
}

TEST(TensorBasics, LeafGradientsAccumulateUntilZeroed) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  backward(sum(mul(x, x)));
  backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
  x.zero_grad();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(TensorBasics, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y;
  {
    NoGradGuard g;
    y = sum(mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(TensorBasics, BackwardNeedsScalar) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  EXPECT_THROW(backward(mul(x, x)), ContractError);
}

TEST(TensorBasics, SharedSubexpressionGetsBothPaths) {
  Tensor x = Tensor::from({1}, {3.0}, true);
  Tensor y = mul(x, x);
  backward(sum(add(y, y)));  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(TensorBasics, SoftmaxMaskZeroesDisallowed) {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  std::vector<std::uint8_t> mask{1, 0, 1, 0, 0, 1};
  Tensor p = softmax_rows(a, mask);
  EXPECT_EQ(p.at(0, 1), 0.0);
  EXPECT_NEAR(p.at(0, 0) + p.at(0, 2), 1.0, 1e-15);
  EXPECT_EQ(p.at(1, 2), 1.0);
  std::vector<std::uint8_t> dead{0, 0, 0, 1, 1, 1};
  EXPECT_THROW(softmax_rows(a, dead), ContractError);
}

TEST(TensorBasics, ClampPassesNoGradientOutside) {
  Tensor x = Tensor::from({3}, {-2.0, 0.5, 2.0}, true);
  backward(sum(clamp(x, 0.0, 1.0)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(TensorBasics, FrobeniusNormZeroHasZeroGradient) {
  Tensor x = Tensor::zeros({2, 2}, true);
  backward(frobenius_norm(x));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

class OpGradient : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OpGradient, Elementwise) {
  const auto s = GetParam();
  expect_grads([](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {3, 4}}, s);
  expect_grads([](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {4}}, s);
  expect_grads([](auto& x) { return sub(x[0], x[1]); }, {{3, 4}, {3, 4}}, s);
  expect_grads([](auto& x) { return sub(x[1], x[0]); }, {{4}, {2, 4}}, s);
  expect_grads([](auto& x) { return mul(x[0], x[1]); }, {{3, 4}, {3, 4}}, s);
  expect_grads([](auto& x) { return mul(x[0], x[1]); }, {{2, 3, 4}, {3, 4}}, s);
  expect_grads([](auto& x) { return scale(x[0], -1.7); }, {{5}}, s);
  expect_grads([](auto& x) { return add_scalar(x[0], 0.3); }, {{5}}, s);
  expect_grads([](auto& x) { return sigmoid(x[0]); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return gelu(x[0]); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return ats::exp(x[0]); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return log(add_scalar(mul(x[0], x[0]), 0.5)); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return clamp(x[0], -0.5, 0.5); }, {{3, 4}}, s, 0.3);
}

TEST_P(OpGradient, Structural) {
  const auto s = GetParam();
  expect_grads([](auto& x) { return matmul(x[0], x[1]); }, {{3, 5}, {5, 2}}, s);
  expect_grads([](auto& x) { return transpose(x[0]); }, {{3, 5}}, s);
  expect_grads([](auto& x) { return reshape(x[0], {5, 3}); }, {{3, 5}}, s);
  expect_grads([](auto& x) { return concat({x[0], x[1]}, 0); }, {{2, 3}, {4, 3}}, s);
  expect_grads([](auto& x) { return concat({x[0], x[1]}, 1); }, {{2, 3}, {2, 1}}, s);
  expect_grads([](auto& x) { return slice_rows(x[0], 1, 2); }, {{4, 3}}, s);
  expect_grads([](auto& x) { return slice_cols(x[0], 1, 2); }, {{4, 3}}, s);
  expect_grads(
      [](auto& x) {
        std::vector<std::size_t> ids{2, 0, 2, 1};
        return gather_rows(x[0], ids);
      },
      {{3, 4}}, s);
  expect_grads(
      [](auto& x) {
        std::vector<std::size_t> ids{0, 5, 5, 3, 1, 2};
        return take(x[0], ids, {2, 3});
      },
      {{2, 3}}, s);
}

TEST_P(OpGradient, Normalizing) {
  const auto s = GetParam();
  expect_grads([](auto& x) { return softmax_rows(x[0]); }, {{3, 5}}, s);
  expect_grads(
      [](auto& x) {
        std::vector<std::uint8_t> m{1, 1, 0, 1, 0, 1, 1, 1, 1};
        return softmax_rows(x[0], m);
      },
      {{3, 3}}, s);
  expect_grads([](auto& x) { return layer_norm(x[0], x[1], x[2]); }, {{4, 6}, {6}, {6}}, s);
  expect_grads([](auto& x) { return sum(x[0]); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return mean(x[0]); }, {{3, 4}}, s);
  expect_grads([](auto& x) { return frobenius_norm(x[0]); }, {{3, 4}}, s);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Values(1, 2, 3));

TEST(TensorBasics, LayerNormRejectsWidthOne) {
  Tensor x = Tensor::from({2, 1}, {1, 2});
  Tensor g = Tensor::from({1}, {1});
  Tensor b = Tensor::from({1}, {0});
  EXPECT_THROW(layer_norm(x, g, b), ContractError);
}

TEST(TensorBasics, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}
