#include "footfit/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace footfit::ad;

TEST(Autodiff, SumGradientIsOnes) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, -2.0, 3.5}));
  Gradients g = tape.backward(sum(x));
  for (double v : g[x].data) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Autodiff, DotWithSelfIsTwiceInput) {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({0.5, -1.5, 2.0}));
  Gradients g = tape.backward(dot(a, a));
  EXPECT_DOUBLE_EQ(g[a][0], 1.0);
  EXPECT_DOUBLE_EQ(g[a][1], -3.0);
  EXPECT_DOUBLE_EQ(g[a][2], 4.0);
}

TEST(Autodiff, ArccosDerivative) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(0.5));
  Gradients g = tape.backward(arccos(x));
  EXPECT_NEAR(g[x].item(), -1.0 / std::sqrt(0.75), 1e-12);
  EXPECT_NEAR(g[x].item(), -1.154701, 1e-6);
}

TEST(Autodiff, ArccosClampHasZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(1.0));
  Gradients g = tape.backward(arccos(x));
  EXPECT_EQ(g[x].item(), 0.0);
}

TEST(Autodiff, ForeignLeafRejected) {
  Tape a, b;
  Var x = a.leaf(Tensor::scalar(1.0));
  Var y = b.leaf(Tensor::scalar(2.0));
  EXPECT_THROW(add(x, y), std::invalid_argument);
  EXPECT_THROW(b.check_owner(x), std::invalid_argument);
}

TEST(Autodiff, NonScalarBackwardRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(x * 2.0), std::invalid_argument);
}

TEST(Autodiff, NonFiniteLeafRejected) {
  Tape tape;
  EXPECT_THROW(tape.leaf(Tensor::scalar(std::nan(""))), std::invalid_argument);
}

TEST(Autodiff, BackwardIsRepeatable) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0.3, 0.7}));
  Var y = sum(sin(x) * exp(x));
  Tensor g1 = tape.backward(y)[x];
  Tensor g2 = tape.backward(y)[x];
  EXPECT_EQ(g1.data, g2.data);
}

TEST(Autodiff, GradientIsLinear) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0.2, -0.4, 1.1}));
  Var f = sum(tanh(x) * x);
  Var g = sum(square(x) + exp(x));
  const double alpha = 2.5, beta = -0.75;
  Tensor gf = tape.backward(f)[x], gg = tape.backward(g)[x];
  Tensor gc = tape.backward(f * alpha + g * beta)[x];
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = alpha * gf[i] + beta * gg[i];
    EXPECT_NEAR(gc[i], expect, 1e-12 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Autodiff, BroadcastBiasGradientSumsRows) {
  Tape tape;
  Var m = tape.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor::vector({0.1, 0.2, 0.3}));
  Gradients g = tape.backward(sum(m + b));
  for (double v : g[b].data) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(Autodiff, UnusedLeafHasZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var y = tape.leaf(Tensor::scalar(3.0));
  Gradients g = tape.backward(sum(x));
  EXPECT_EQ(g[y].item(), 0.0);
}

TEST(GradCheck, SquareIsExact) {
  auto f = [](Tape&, std::span<const Var> in) { return sum(square(in[0])); };
  std::vector<Tensor> inputs{Tensor::scalar(3.0)};
  EXPECT_LT(grad_check(f, inputs, 1e-5), 1e-8);
}

TEST(GradCheck, ConstantIsZero) {
  auto f = [](Tape& tape, std::span<const Var>) { return tape.constant(Tensor::scalar(4.0)); };
  std::vector<Tensor> inputs{Tensor::vector({1.0, 2.0})};
  EXPECT_EQ(grad_check(f, inputs), 0.0);
}

TEST(GradCheck, ComposedOps) {
  auto f = [](Tape&, std::span<const Var> in) {
    Var n = row_normalize(in[0]);
    Var d = row_dot(n, gather_rows(n, std::vector<std::size_t>{1, 0}));
    return mean(sigmoid(d) * log(norm2(in[1]) + 1.0)) + sum(matmul(in[0], transpose(in[0])));
  };
  std::vector<Tensor> inputs{Tensor::matrix(2, 3, {0.3, -0.2, 0.9, 1.1, 0.4, -0.5}),
                             Tensor::vector({0.5, -1.5})};
  EXPECT_LT(grad_check(f, inputs), 1e-7);
}

TEST(Autodiff, RowNormalizeZeroRowStaysZero) {
  Tape tape;
  Var x = tape.leaf(Tensor::matrix(2, 3, {0, 0, 0, 3, 0, 4}));
  Var n = row_normalize(x);
  EXPECT_EQ(n.value()[0], 0.0);
  EXPECT_DOUBLE_EQ(n.value()[3], 0.6);
  Tensor g = tape.backward(sum(n))[x];
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(Autodiff, LogAndSqrtRejectNonPositive) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(-1.0));
  EXPECT_THROW(log(x), std::domain_error);
  EXPECT_THROW(sqrt(x), std::domain_error);
}

TEST(Autodiff, MatmulShapeMismatchRejected) {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  Var b = tape.leaf(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  EXPECT_THROW(matmul(a, b), std::invalid_argument);
}
