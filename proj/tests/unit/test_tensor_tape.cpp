#include <gtest/gtest.h>

#include <cmath>

#include "carl/gradcheck.hpp"
#include "carl/ops.hpp"
#include "carl/tape.hpp"

using namespace carl;

TEST(Tensor, ShapeAndData) {
  auto t = Tensor<float>::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_FLOAT_EQ(t(1, 2), 6.0f);
  EXPECT_EQ(shape_to_string(t.shape()), "[2x3]");
  EXPECT_EQ(Tensor<float>::vector({1, 2}).cols(), 1u);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), DimensionError);
  EXPECT_THROW(Tensor<float>::vector({1, 2}).item(), DimensionError);
}

TEST(Tensor, CopiesShareStorageClonesDoNot) {
  auto a = Tensor<double>::vector({1, 2, 3});
  auto b = a;
  auto c = a.clone();
  b.at(0) = 10;
  EXPECT_EQ(a.at(0), 10);
  EXPECT_EQ(c.at(0), 1);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, GradHasSameShapeAsData) {
  auto w = Tensor<double>::zeros({3, 2}, true);
  EXPECT_FALSE(w.has_grad());
  EXPECT_EQ(w.mutable_grad().size(), w.numel());
  EXPECT_TRUE(w.has_grad());
}

TEST(Tensor, ChecksumDetectsChange) {
  std::vector<Tensor<float>> ps{Tensor<float>::vector({1, 2}), Tensor<float>::vector({3})};
  const auto before = checksum<float>(ps);
  EXPECT_EQ(before, checksum<float>(ps));
  ps[1].at(0) = 3.0001f;
  EXPECT_NE(before, checksum<float>(ps));
}

TEST(Backward, SumGivesOnes) {
  auto w = Tensor<double>::vector({1, 2, 3}, true);
  Tape<double> tape;
  tape.backward(ops::sum(tape, w));
  ASSERT_TRUE(w.has_grad());
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquares) {
  auto w = Tensor<double>::vector({1, 2, 3}, true);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::mul(tape, w, w)));
  EXPECT_EQ(w.grad()[0], 2.0);
  EXPECT_EQ(w.grad()[1], 4.0);
  EXPECT_EQ(w.grad()[2], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  auto w = Tensor<double>::vector({1, 2}, true);
  Tape<double> tape;
  auto y = ops::scale(tape, w, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, SecondCallWithoutResetIsStateError) {
  auto w = Tensor<double>::vector({1, 2}, true);
  Tape<double> tape;
  auto loss = ops::sum(tape, w);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), StateError);
  tape.reset();
  w.zero_grad();
  auto again = ops::sum(tape, w);
  EXPECT_NO_THROW(tape.backward(again));
  EXPECT_EQ(w.grad()[0], 1.0);
}

TEST(Backward, LossFromAnotherTapeIsRejected) {
  auto w = Tensor<double>::vector({1, 2}, true);
  Tape<double> a, b;
  auto la = ops::sum(a, w);
  ops::sum(b, w);
  EXPECT_THROW(b.backward(la), ContractError);
}

TEST(Backward, EveryReachableLeafGetsGrad) {
  auto a = Tensor<double>::matrix({{1, 2}, {3, 4}}, true);
  auto b = Tensor<double>::matrix({{0.5}, {-1}}, true);
  auto unused = Tensor<double>::vector({1}, true);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::matmul(tape, a, b)));
  EXPECT_TRUE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(unused.has_grad());
}

TEST(Tape, NodesAreTopologicallyOrdered) {
  auto x = Tensor<double>::matrix({{1, -2}, {3, 0.5}}, true);
  Tape<double> tape;
  auto y = ops::relu(tape, ops::matmul(tape, x, ops::transpose(tape, x)));
  auto loss = ops::mean(tape, ops::softmax_rows(tape, y));
  (void)loss;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const auto& node = tape.node(i);
    EXPECT_EQ(node.output.node_id(), static_cast<std::int64_t>(i));
    for (const auto& in : node.inputs) EXPECT_LT(in.node_id(), static_cast<std::int64_t>(i));
  }
}

TEST(Tape, InferenceModeRecordsNothing) {
  auto w = Tensor<double>::vector({1, 2}, true);
  Tape<double> tape(Tape<double>::Mode::kInference);
  auto y = ops::sum(tape, w);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(FiniteDifference, Square) {
  auto g = finite_difference_gradient([](std::span<const double> t) { return t[0] * t[0]; }, std::vector<double>{3.0});
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDifference, SumIsOnes) {
  const std::vector<double> theta{0.1, -2, 5, 7};
  auto g = finite_difference_gradient(
      [](std::span<const double> t) {
        double s = 0;
        for (double v : t) s += v;
        return s;
      },
      theta);
  for (double v : g) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDifference, DoesNotTouchInputs) {
  const std::vector<double> theta{1.0, 2.0};
  auto copy = theta;
  finite_difference_gradient([](std::span<const double> t) { return t[0] * t[1]; }, theta);
  EXPECT_EQ(theta, copy);
}

TEST(RelativeError, Basics) {
  const std::vector<double> a{1, 0}, b{1, 0}, c{0, 1};
  EXPECT_EQ(relative_error(a, b), 0.0);
  EXPECT_NEAR(relative_error(a, c), std::sqrt(2.0), 1e-12);
  const std::vector<double> z{0, 0};
  EXPECT_EQ(relative_error(z, z), 0.0);
}
