#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cosmic/kernels.hpp"
#include "cosmic/tape.hpp"
#include "support/test_util.hpp"

using namespace cosmic;
using cosmic::testing::max_gradient_error;
using cosmic::testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Matmul, IdentityTimesMatrix) {
  ad::Tape tape;
  const auto out = ad::matmul(tape.constant(Tensor::identity(2)), tape.constant(Tensor::matrix({{1, 2}, {3, 4}})));
  EXPECT_EQ(out.value(), Tensor::matrix({{1, 2}, {3, 4}}));
}

TEST(Matmul, Projection) {
  ad::Tape tape;
  const auto out = ad::matmul(tape.constant(Tensor::matrix({{1, 0}, {0, 0}})), tape.constant(Tensor::matrix({{5}, {7}})));
  EXPECT_EQ(out.value(), Tensor::matrix({{5}, {0}}));
}

TEST(Matmul, GradientOfSumIsRowSumsOfB) {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor(3, 4, rng);
  Tensor b = random_tensor(4, 2, rng);
  ad::Tape tape;
  tape.backward(ad::sum(ad::matmul(tape.parameter(a), tape.alias(b))));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a.grad()[i * 4 + k], b(k, 0) + b(k, 1), 1e-15);
  }
  std::vector<Tensor> in{a, b};
  EXPECT_LT(max_gradient_error(in, [](ad::Tape&, auto& v) { return ad::sum(ad::matmul(v[0], v[1])); }), kGradTol);
}

TEST(Matmul, TransposedVariantMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::vector<Tensor> in{random_tensor(2, 5, rng), random_tensor(3, 5, rng), random_tensor(2, 3, rng)};
  const auto loss = [](ad::Tape&, auto& v) { return ad::sum(ad::mul(ad::matmul_nt(v[0], v[1]), v[2])); };
  EXPECT_LT(max_gradient_error(in, loss), kGradTol);
}

TEST(Matmul, ShapeMismatchThrows) {
  ad::Tape tape;
  EXPECT_THROW(ad::matmul(tape.constant(Tensor::zeros(2, 3)), tape.constant(Tensor::zeros(2, 3))), DimensionError);
  EXPECT_THROW(ad::matmul_nt(tape.constant(Tensor::zeros(1, 3)), tape.constant(Tensor::zeros(2, 4))), DimensionError);
}

TEST(Concat, JoinsInOrder) {
  ad::Tape tape;
  const auto out = ad::concat({tape.constant(Tensor::row({1, 2})), tape.constant(Tensor::row({3}))});
  EXPECT_EQ(out.value(), Tensor::row({1, 2, 3}));
}

TEST(Concat, SinglePartIsIdentity) {
  ad::Tape tape;
  EXPECT_EQ(ad::concat({tape.constant(Tensor::row({4, 5, 6}))}).value(), Tensor::row({4, 5, 6}));
}

TEST(Concat, GradientSplitsAtOffsets) {
  Tensor a = Tensor::row({0.3, -1.0});
  Tensor b = Tensor::row({2.0, 0.5, 1.5});
  {
    ad::Tape tape;
    tape.backward(ad::sum(ad::concat({tape.parameter(a), tape.parameter(b)})));
  }
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_EQ(g, 1.0);
  std::vector<Tensor> in{a, b};
  const auto loss = [](ad::Tape&, auto& v) {
    const auto c = ad::concat({v[0], v[1]});
    return ad::sum(ad::mul(c, ad::tanh(c)));
  };
  EXPECT_LT(max_gradient_error(in, loss), kGradTol);
}

TEST(Concat, EmptyListIsUsageError) {
  EXPECT_THROW(ad::concat(std::span<const ad::Var>{}), UsageError);
}

TEST(Elementwise, TanhAndSigmoidAtZero) {
  ad::Tape tape;
  const auto z = tape.constant(Tensor::zeros(1, 4));
  EXPECT_EQ(ad::tanh(z).value(), Tensor::zeros(1, 4));
  EXPECT_EQ(ad::sigmoid(z).value(), Tensor({1, 4}, 0.5));
}

TEST(Elementwise, TanhGradientAtPointThree) {
  Tensor x = Tensor::row({0.3});
  {
    ad::Tape tape;
    tape.backward(ad::sum(ad::tanh(tape.parameter(x))));
  }
  const double expected = 1.0 - std::tanh(0.3) * std::tanh(0.3);
  EXPECT_NEAR(x.grad()[0], expected, 1e-15);
  const double h = 1e-6;
  EXPECT_NEAR(x.grad()[0], (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h), 1e-9);
}

TEST(Elementwise, AllOpsPassFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> in{random_tensor(1, 6, rng), random_tensor(1, 6, rng)};
    const auto loss = [](ad::Tape&, auto& v) {
      const auto s = ad::sigmoid(v[0]);
      const auto t = ad::tanh(v[1]);
      return ad::sum(ad::add(ad::mul(s, t), ad::scale(ad::sub(v[0], t), -0.7)));
    };
    EXPECT_LT(max_gradient_error(in, loss), kGradTol);
  }
}

TEST(Elementwise, BinaryShapeMismatchThrows) {
  ad::Tape tape;
  const auto a = tape.constant(Tensor::zeros(1, 3));
  const auto b = tape.constant(Tensor::zeros(1, 4));
  EXPECT_THROW(ad::add(a, b), DimensionError);
  EXPECT_THROW(ad::sub(a, b), DimensionError);
  EXPECT_THROW(ad::mul(a, b), DimensionError);
}

TEST(Elementwise, NonFiniteResultIsAnError) {
  ad::Tape tape;
  const auto big = tape.constant(Tensor::row({std::numeric_limits<double>::max()}));
  EXPECT_THROW(ad::scale(big, 10.0), NumericError);
}

TEST(Softmax, UniformOnEqualLogits) {
  ad::Tape tape;
  const auto y = ad::softmax(tape.constant(Tensor::zeros(1, 3))).value();
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  ad::Tape tape;
  const auto y = ad::softmax(tape.constant(Tensor::row({1000, 0}))).value();
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
}

TEST(Softmax, MatchesExtendedPrecisionEvaluation) {
  ad::Tape tape;
  const auto y = ad::softmax(tape.constant(Tensor::row({1, 2, 3}))).value();
  long double total = 0;
  for (int k = 1; k <= 3; ++k) total += std::exp(static_cast<long double>(k));
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(y[k - 1], static_cast<double>(std::exp(static_cast<long double>(k)) / total), 1e-15);
  }
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor z = random_tensor(1, 1 + trial % 9, rng, 3.0);
    Tensor shifted = z;
    const double c = shift(rng);
    for (double& v : shifted.data()) v += c;
    ad::Tape tape;
    const auto y = ad::softmax(tape.constant(z)).value();
    const auto ys = ad::softmax(tape.constant(shifted)).value();
    double total = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_GT(y[i], 0.0);
      EXPECT_NEAR(y[i], ys[i], 1e-9);
      total += y[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::vector<Tensor> in{random_tensor(1, 5, rng), random_tensor(1, 5, rng)};
  EXPECT_LT(max_gradient_error(in, [](ad::Tape&, auto& v) { return ad::sum(ad::mul(ad::softmax(v[0]), v[1])); }),
            kGradTol);
}

TEST(CrossEntropy, ConfidentCorrectLogitsGiveNearZeroLoss) {
  ad::Tape tape;
  EXPECT_LT(ad::cross_entropy(tape.constant(Tensor::row({50, -5, -5})), 0).value()[0], 1e-20);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  ad::Tape tape;
  EXPECT_NEAR(ad::cross_entropy(tape.constant(Tensor::zeros(1, 4)), 2).value()[0], std::log(4.0), 1e-15);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  std::mt19937_64 rng(8);
  for (std::size_t label = 0; label < 4; ++label) {
    Tensor z = random_tensor(1, 4, rng);
    {
      ad::Tape tape;
      tape.backward(ad::cross_entropy(tape.parameter(z), label));
    }
    ad::Tape tape;
    const auto p = ad::softmax(tape.constant(z)).value();
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(z.grad()[k], p[k] - (k == label), 1e-15);
    std::vector<Tensor> in{z};
    EXPECT_LT(max_gradient_error(in, [label](ad::Tape&, auto& v) { return ad::cross_entropy(v[0], label); }),
              kGradTol);
  }
}

TEST(CrossEntropy, LabelOutOfRangeIsUsageError) {
  ad::Tape tape;
  EXPECT_THROW(ad::cross_entropy(tape.constant(Tensor::zeros(1, 3)), 3), UsageError);
}

TEST(Backward, SumGivesOnes) {
  Tensor w({3, 2}, 0.25);
  ad::Tape tape;
  tape.backward(ad::sum(tape.parameter(w)));
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HalfSquaredNormGivesW) {
  std::mt19937_64 rng(9);
  Tensor w = random_tensor(2, 3, rng);
  ad::Tape tape;
  const auto v = tape.parameter(w);
  tape.backward(ad::scale(ad::sum(ad::mul(v, v)), 0.5));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], w[i]);
}

TEST(Backward, TwoBranchesAccumulate) {
  std::mt19937_64 rng(10);
  Tensor w = random_tensor(1, 5, rng);
  Tensor single = w;
  {
    ad::Tape tape;
    tape.backward(ad::sum(ad::tanh(tape.parameter(single))));
  }
  {
    ad::Tape tape;
    const auto v = tape.parameter(w);
    tape.backward(ad::add(ad::sum(ad::tanh(v)), ad::sum(ad::tanh(v))));
  }
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * single.grad()[i]);
}

TEST(Backward, AccumulatesAcrossTapes) {
  Tensor w = Tensor::row({1.0, 2.0});
  for (int k = 0; k < 3; ++k) {
    ad::Tape tape;
    tape.backward(ad::sum(tape.parameter(w)));
  }
  EXPECT_EQ(w.grad()[0], 3.0);
}

TEST(Backward, NonScalarLossIsUsageError) {
  Tensor w = Tensor::row({1.0, 2.0});
  ad::Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(w)), UsageError);
}

TEST(Backward, RedirectLeavesParameterUntouched) {
  Tensor w = Tensor::row({1.0, -2.0});
  std::vector<double> sink(2, 0.0);
  ad::Tape tape;
  tape.redirect(w, sink);
  tape.backward(ad::sum(ad::mul(tape.parameter(w), tape.parameter(w))));
  EXPECT_FALSE(w.has_grad());
  EXPECT_EQ(sink[0], 2.0);
  EXPECT_EQ(sink[1], -4.0);
}

TEST(Backward, SlicesAndStacksPassFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::vector<Tensor> in{random_tensor(4, 3, rng), random_tensor(1, 3, rng), random_tensor(1, 3, rng)};
  const auto loss = [](ad::Tape&, auto& v) {
    const ad::Var rows[] = {v[1], v[2], ad::tanh(v[1])};
    const auto stacked = ad::stack_rows(rows);                        // 3×3
    const auto top = ad::slice_rows(v[0], 1, 3);                      // 3×3
    const auto prod = ad::matmul_nt(ad::slice_cols(v[1], 0, 3), ad::matmul(stacked, top));
    return ad::sum(ad::tanh(prod));
  };
  EXPECT_LT(max_gradient_error(in, loss), kGradTol);
}

class KernelAgreement : public ::testing::TestWithParam<std::array<std::size_t, 3>> {};

TEST_P(KernelAgreement, ParallelIsBitIdenticalToSerial) {
  const auto [m, n, k] = GetParam();
  std::mt19937_64 rng(m * 31 + n * 7 + k);
  const Tensor a = random_tensor(m, k, rng);
  const Tensor b = random_tensor(k, n, rng);
  const Tensor bt = random_tensor(n, k, rng);
  const Tensor at = random_tensor(k, m, rng);
  const kernels::Dims d{m, n, k};
  std::vector<double> s(m * n, 0.5), p(m * n, 0.5);
  kernels::serial::matmul_nn(a.data(), b.data(), s, d);
  kernels::parallel::matmul_nn(a.data(), b.data(), p, d);
  EXPECT_EQ(s, p);
  kernels::serial::matmul_nt(a.data(), bt.data(), s, d);
  kernels::parallel::matmul_nt(a.data(), bt.data(), p, d);
  EXPECT_EQ(s, p);
  kernels::serial::matmul_tn(at.data(), b.data(), s, d);
  kernels::parallel::matmul_tn(at.data(), b.data(), p, d);
  EXPECT_EQ(s, p);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelAgreement,
                         ::testing::Values(std::array<std::size_t, 3>{1, 1, 1}, std::array<std::size_t, 3>{1, 450, 1024},
                                           std::array<std::size_t, 3>{7, 13, 5}, std::array<std::size_t, 3>{64, 64, 64}));

TEST(Kernels, SerialMatchesNaiveTripleLoop) {
  std::mt19937_64 rng(12);
  const Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 5, rng);
  std::vector<double> out(15, 0.0);
  kernels::serial::matmul_nn(a.data(), b.data(), out, {3, 5, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < 4; ++p) acc += a(i, p) * b(p, j);
      EXPECT_NEAR(out[i * 5 + j], acc, 1e-14);
    }
}

TEST(TensorType, RejectsInconsistentPayload) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  EXPECT_THROW(Tensor({0, 2}), DimensionError);
}
