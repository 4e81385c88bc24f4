#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cosmic/cells.hpp"
#include "support/reference_model.hpp"
#include "support/test_util.hpp"

using namespace cosmic;
using cosmic::testing::max_gradient_error;
using cosmic::testing::random_tensor;
namespace ref = cosmic::reference;

namespace {

void fill_gaussian(GruParams& p, std::mt19937_64& rng) {
  for (Tensor* t : {&p.input_weights, &p.hidden_weights, &p.biases}) *t = random_tensor(t->rows(), t->cols(), rng, 0.5);
}

ref::Vec gru_on_tape(const GruParams& p, const Tensor& h, const Tensor& y) {
  ad::Tape tape;
  const auto cell = bind_frozen(tape, p);
  return ref::to_vec(gru_step(cell, tape.constant(h), tape.constant(y)).value());
}

}  // namespace

TEST(Gru, ZeroParametersZeroStateStaysZero) {
  const GruParams p(4, 3);
  EXPECT_EQ(gru_on_tape(p, Tensor::zeros(1, 4), Tensor::row({1, -2, 3})), ref::Vec(4, 0.0));
}

TEST(Gru, ZeroParametersHalveTheState) {
  // z = 0.5, h̃ = 0 so h' = 0.5 h.
  const GruParams p(3, 2);
  const auto out = gru_on_tape(p, Tensor::row({2.0, -4.0, 0.5}), Tensor::row({7, 7}));
  EXPECT_EQ(out, (ref::Vec{1.0, -2.0, 0.25}));
}

TEST(Gru, ScalarCellMatchesHandComputation) {
  GruParams p(1, 1);
  p.input_weights = Tensor::matrix({{0.3}, {-0.2}, {0.5}});
  p.hidden_weights = Tensor::matrix({{0.1}, {0.4}, {-0.6}});
  p.biases = Tensor::row({0.05, -0.1, 0.2});
  const double h = 0.7, y = -1.3;
  const double z = 1 / (1 + std::exp(-(0.3 * y + 0.1 * h + 0.05)));
  const double r = 1 / (1 + std::exp(-(-0.2 * y + 0.4 * h - 0.1)));
  const double cand = std::tanh(0.5 * y - 0.6 * (r * h) + 0.2);
  const double expected = (1 - z) * h + z * cand;
  EXPECT_NEAR(gru_on_tape(p, Tensor::row({h}), Tensor::row({y}))[0], expected, 1e-15);
}

TEST(Gru, MatchesOracleOnRandomCells) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    GruParams p(5, 7);
    fill_gaussian(p, rng);
    const Tensor h = random_tensor(1, 5, rng), y = random_tensor(1, 7, rng);
    const auto got = gru_on_tape(p, h, y);
    const auto want = ref::gru(p, ref::to_vec(h), ref::to_vec(y));
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(got[k], want[k], 1e-13);
  }
}

TEST(Gru, OutputStaysInsideUnitBoxWhenStateDoes) {
  std::mt19937_64 rng(22);
  GruParams p(6, 4);
  fill_gaussian(p, rng);
  Tensor h = Tensor::zeros(1, 6);
  for (int t = 0; t < 200; ++t) {
    const auto next = gru_on_tape(p, h, random_tensor(1, 4, rng, 5.0));
    for (std::size_t k = 0; k < 6; ++k) {
      ASSERT_LE(std::abs(next[k]), 1.0);
      h[k] = next[k];
    }
  }
}

TEST(Gru, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  GruParams p(4, 3);
  fill_gaussian(p, rng);
  std::vector<Tensor> in{p.input_weights, p.hidden_weights, p.biases, random_tensor(1, 4, rng),
                         random_tensor(1, 3, rng), random_tensor(1, 4, rng)};
  const auto loss = [](ad::Tape&, std::vector<ad::Var>& v) {
    const auto& w = v[0].value();
    const std::size_t hdim = v[3].value().cols();
    BoundGru cell{v[0], ad::slice_rows(v[1], 0, 2 * hdim), ad::slice_rows(v[1], 2 * hdim, hdim), v[2], hdim,
                  w.cols()};
    const auto h1 = gru_step(cell, v[3], v[4]);
    const auto h2 = gru_step(cell, h1, v[4]);
    return ad::sum(ad::mul(h2, v[5]));
  };
  EXPECT_LT(max_gradient_error(in, loss), 1e-4);
}

TEST(Gru, WrongInputWidthThrows) {
  const GruParams p(3, 2);
  EXPECT_THROW(gru_on_tape(p, Tensor::zeros(1, 3), Tensor::zeros(1, 5)), DimensionError);
  EXPECT_THROW(gru_on_tape(p, Tensor::zeros(1, 4), Tensor::zeros(1, 2)), DimensionError);
}

TEST(Linear, AppliesWeightThenBias) {
  LinearParams p(2, 3);
  p.weight = Tensor::matrix({{1, 0, -1}, {2, 1, 0}});
  p.bias = Tensor::row({0.5, -1});
  ad::Tape tape;
  const auto y = linear(bind_frozen(tape, p), tape.constant(Tensor::row({3, 4, 5})));
  EXPECT_EQ(y.value(), Tensor::row({-1.5, 9}));
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(24);
  std::vector<Tensor> in{random_tensor(3, 5, rng), random_tensor(1, 3, rng), random_tensor(1, 5, rng)};
  const auto loss = [](ad::Tape&, std::vector<ad::Var>& v) {
    return ad::sum(ad::tanh(linear(BoundLinear{v[0], v[1]}, v[2])));
  };
  EXPECT_LT(max_gradient_error(in, loss), 1e-4);
}

TEST(Init, UniformWithinFanBound) {
  std::mt19937_64 rng(25);
  GruParams g(16, 40);
  LinearParams l(8, 25);
  init_uniform(g, rng);
  init_uniform(l, rng);
  for (const Tensor* t : {&g.input_weights, &g.hidden_weights, &g.biases})
    for (double v : t->data()) EXPECT_LE(std::abs(v), 0.25);
  for (const Tensor* t : {&l.weight, &l.bias})
    for (double v : t->data()) EXPECT_LE(std::abs(v), 0.2);
  const auto& w = g.input_weights.data();
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  EXPECT_NEAR(mean, 0.0, 0.02);
}

class AttentionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    proj = LinearParams(4, 3);
    proj.weight = random_tensor(4, 3, rng);
    proj.bias = random_tensor(1, 4, rng);
  }

  AttentionResult run(ad::Tape& tape, const std::vector<Tensor>& history, const Tensor& query) {
    std::vector<ad::Var> vars;
    for (const Tensor& c : history) vars.push_back(tape.constant(c));
    return soft_attention(vars, tape.constant(query), bind_frozen(tape, proj));
  }

  std::mt19937_64 rng{26};
  LinearParams proj;
};

TEST_F(AttentionTest, SingleElementHasWeightOne) {
  ad::Tape tape;
  const Tensor c = random_tensor(1, 3, rng);
  const auto r = run(tape, {c}, random_tensor(1, 4, rng));
  EXPECT_EQ(r.weights.value()[0], 1.0);
  EXPECT_EQ(r.pooled.value(), c);
}

TEST_F(AttentionTest, IdenticalPairSplitsEvenly) {
  ad::Tape tape;
  const Tensor c = random_tensor(1, 3, rng);
  const auto r = run(tape, {c, c}, random_tensor(1, 4, rng));
  EXPECT_DOUBLE_EQ(r.weights.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(r.weights.value()[1], 0.5);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.pooled.value()[k], c[k], 1e-15);
}

TEST_F(AttentionTest, MatchesOracle) {
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> hist;
    std::vector<ref::Vec> hist_v;
    for (int i = 0; i < 3; ++i) {
      hist.push_back(random_tensor(1, 3, rng));
      hist_v.push_back(ref::to_vec(hist.back()));
    }
    const Tensor q = random_tensor(1, 4, rng);
    ad::Tape tape;
    const auto r = run(tape, hist, q);
    const auto want = ref::attend(proj, hist_v, ref::to_vec(q));
    double total = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(r.weights.value()[i], want.weights[i], 1e-14);
      total += r.weights.value()[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.pooled.value()[k], want.pooled[k], 1e-14);
  }
}

TEST_F(AttentionTest, PermutingHistoryPermutesWeights) {
  std::vector<Tensor> hist;
  for (int i = 0; i < 5; ++i) hist.push_back(random_tensor(1, 3, rng));
  const Tensor q = random_tensor(1, 4, rng);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<Tensor> shuffled;
  for (std::size_t i : perm) shuffled.push_back(hist[i]);
  ad::Tape tape;
  const auto a = run(tape, hist, q);
  const auto b = run(tape, shuffled, q);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(b.weights.value()[i], a.weights.value()[perm[i]], 1e-15);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a.pooled.value()[k], b.pooled.value()[k], 1e-14);
}

TEST_F(AttentionTest, CachedKeysGiveSameResult) {
  std::vector<Tensor> hist;
  for (int i = 0; i < 4; ++i) hist.push_back(random_tensor(1, 3, rng));
  const Tensor q = random_tensor(1, 4, rng);
  ad::Tape tape;
  const auto bound = bind_frozen(tape, proj);
  std::vector<ad::Var> values, keys;
  for (const Tensor& c : hist) {
    values.push_back(tape.constant(c));
    keys.push_back(ad::tanh(linear(bound, values.back())));
  }
  const auto cached = soft_attention_cached(values, keys, tape.constant(q));
  const auto direct = soft_attention(values, tape.constant(q), bound);
  EXPECT_EQ(cached.weights.value(), direct.weights.value());
  EXPECT_EQ(cached.pooled.value(), direct.pooled.value());
}

TEST_F(AttentionTest, EmptyHistoryIsUsageError) {
  ad::Tape tape;
  EXPECT_THROW(run(tape, {}, random_tensor(1, 4, rng)), UsageError);
}

TEST_F(AttentionTest, GradientsMatchFiniteDifferences) {
  std::vector<Tensor> in{proj.weight, proj.bias, random_tensor(1, 3, rng), random_tensor(1, 3, rng),
                         random_tensor(1, 3, rng), random_tensor(1, 4, rng)};
  const auto loss = [](ad::Tape&, std::vector<ad::Var>& v) {
    const ad::Var hist[] = {v[2], v[3], v[4]};
    const auto r = soft_attention(hist, v[5], BoundLinear{v[0], v[1]});
    return ad::sum(ad::tanh(r.pooled));
  };
  EXPECT_LT(max_gradient_error(in, loss), 1e-4);
}

TEST(Dropout, ZeroRateIsIdentityAndMaskIsInverted) {
  std::mt19937_64 rng(27);
  ad::Tape tape;
  const Tensor x({1, 2000}, 1.0);
  EXPECT_EQ(dropout(tape.constant(x), 0.0, rng).value(), x);
  const auto y = dropout(tape.constant(x), 0.25, rng).value();
  std::size_t kept = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.75, 0.04);
}
