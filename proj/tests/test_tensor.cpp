#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "seqinfer/errors.hpp"
#include "seqinfer/ops.hpp"
#include "test_support.hpp"

using namespace seqinfer;
using seqinfer::testing::gradcheck;
using seqinfer::testing::random_tensor;
using seqinfer::testing::weighted_sum;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// exp(x) by Taylor series until terms vanish.
double series_exp(double x) {
  double term = 1.0, total = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= x / k;
    total += term;
    if (std::abs(term) < 1e-300) break;
  }
  return total;
}

}  // namespace

TEST(Tensor, ShapeInvariants) {
  EXPECT_THROW(Tensor::from({2, 3}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::from({0}, {}), DimensionError);
  auto t = Tensor::zeros({2, 3}, true);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.has_grad());
  t.zero_grad();
  EXPECT_EQ(t.grad().size(), t.numel());
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  auto eye = Tensor::matrix({{1, 0}, {0, 1}});
  auto m = Tensor::matrix({{0.3, -1.2}, {4.5, 2.0}});
  auto out = matmul(eye, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], m[i]);
}

TEST(Matmul, HandComputedProduct) {
  auto out = matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{0}, {1}}));
  ASSERT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out[0], 2.0);
  EXPECT_EQ(out[1], 4.0);
}

TEST(Matmul, ZeroAnnihilates) {
  auto out = matmul(Tensor::zeros({2, 2}), Tensor::matrix({{5, 6}, {7, 8}}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] x [2x3]"), std::string::npos);
  }
}

TEST(Softmax, Examples) {
  auto u = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  auto s = softmax(Tensor::vector({-kInf, 0}), 0);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);

  auto y = softmax(Tensor::vector({1, 2, 3}), 0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], std::exp(i + 1.0) / z, 1e-12);
}

TEST(Softmax, FullyMaskedSliceIsDegenerate) {
  EXPECT_THROW(softmax(Tensor::matrix({{0, 1}, {-kInf, -kInf}}), 1), DegenerateSliceError);
}

TEST(Softmax, SlicesSumToOneAndShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({4, 5}, rng, false, -5, 5);
    for (std::size_t axis : {0u, 1u}) {
      auto y = softmax(x, axis);
      const std::size_t outer = axis == 0 ? 5 : 4, len = axis == 0 ? 4 : 5;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t l = 0; l < len; ++l) total += axis == 0 ? y.at(l, o) : y.at(o, l);
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
    const double c = rng.uniform(-10, 10);
    std::vector<double> shifted(x.data().begin(), x.data().end());
    for (auto& v : shifted) v += c;
    auto a = softmax(x, 1);
    auto b = softmax(Tensor::from({4, 5}, shifted), 1);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Elementwise, Examples) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(relu(Tensor::scalar(-3)).item(), 0.0);
  const double e2 = series_exp(2.0);
  EXPECT_NEAR(seqinfer::tanh(Tensor::scalar(1)).item(), (e2 - 1.0) / (e2 + 1.0), 1e-12);
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST(Elementwise, Ranges) {
  Rng rng(5);
  auto x = random_tensor({200}, rng, false, -30, 30);
  const auto sg = sigmoid(x);
  const auto th = seqinfer::tanh(x);
  const auto rl = relu(x);
  for (double v : sg.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  for (double v : th.data()) EXPECT_LE(std::abs(v), 1.0);
  for (double v : rl.data()) EXPECT_GE(v, 0.0);
}

TEST(Concat, Examples) {
  auto a = Tensor::vector({1, 2});
  auto single = concat({a}, 0);
  EXPECT_EQ(single.shape(), a.shape());
  auto c = concat({Tensor::vector({1, 2}), Tensor::vector({3})}, 0);
  ASSERT_EQ(c.numel(), 3u);
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[2], 3.0);
  EXPECT_THROW(concat({Tensor::zeros({2, 2}), Tensor::zeros({3, 3})}, 0), DimensionError);
}

TEST(Concat, GradientOfSumIsAllOnes) {
  Rng rng(1);
  auto a = random_tensor({2, 3}, rng);
  auto b = random_tensor({2, 2}, rng);
  backward(sum(concat({a, b}, 1)));
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_EQ(g, 1.0);
  EXPECT_LT(gradcheck([&] { return sum(concat({a, b}, 1)); }, {a, b}), 1e-6);
}

TEST(MaxOverAxis, ExamplesAndTies) {
  auto r = max_over_axis(Tensor::vector({1, 3, 2}), 0);
  EXPECT_EQ(r.values.item(), 3.0);
  EXPECT_EQ(r.indices[0], 1u);
  auto t = max_over_axis(Tensor::vector({4, 4, 4}), 0);
  EXPECT_EQ(t.indices[0], 0u);
}

TEST(MaxOverAxis, GradientOnlyAtArgmax) {
  Rng rng(8);
  auto x = random_tensor({3, 4}, rng);
  auto r = max_over_axis(x, 0);
  backward(sum(r.values));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(x.grad()[i * 4 + j], r.indices[j] == i ? 1.0 : 0.0);
  EXPECT_LT(gradcheck([&] { return weighted_sum(max_over_axis(x, 0).values); }, {x}), 1e-6);
}

TEST(Backward, Examples) {
  auto x = Tensor::vector({0.5, -1.0, 2.0}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);

  auto y = Tensor::vector({0.5, -1.0, 2.0}, true);
  backward(sum(mul(y, y)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.grad()[i], 2.0 * y[i]);

  Rng rng(2);
  auto a = random_tensor({3, 2}, rng);
  auto b = random_tensor({2, 3}, rng);
  auto loss = [&] { return sum(seqinfer::tanh(softmax(matmul(a, b), 1))); };
  EXPECT_LT(gradcheck(loss, {a, b}), 1e-4);
}

TEST(Backward, RejectsNonScalarAndDoubleBackward) {
  auto x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(backward(mul(x, x)), ContractError);
  auto loss = sum(mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), StateError);
  // A fresh forward pass is a fresh tape.
  EXPECT_NO_THROW(backward(sum(mul(x, x))));
}

TEST(Backward, DiamondVisitsEachNodeOnce) {
  auto x = Tensor::vector({0.3, 0.7}, true);
  auto s = sigmoid(x);
  auto loss = sum(add(mul(s, s), s));
  auto tape = Tape::record(loss);
  EXPECT_EQ(tape.size(), 5u);  // x, s, mul, add, sum
  auto stats = backward(loss);
  EXPECT_EQ(stats.nodes_visited, 4u);
  EXPECT_EQ(s.node()->visits, 1u);
  EXPECT_EQ(loss.node()->visits, 1u);
  for (std::size_t i = 0; i < 2; ++i) {
    const double sv = s[i];
    EXPECT_NEAR(x.grad()[i], (2 * sv + 1) * sv * (1 - sv), 1e-15);
  }
}

TEST(SgdStep, Examples) {
  auto p = Tensor::scalar(1.0, true);
  backward(sum(p));
  sgd_step(std::vector<Tensor>{p}, 0.0);
  EXPECT_EQ(p.item(), 1.0);

  backward(sum(p));
  sgd_step(std::vector<Tensor>{p}, 0.1);
  EXPECT_DOUBLE_EQ(p.item(), 0.9);
  EXPECT_EQ(p.grad()[0], 0.0);

  auto q = Tensor::scalar(1.0, true);
  EXPECT_THROW(sgd_step(std::vector<Tensor>{q}, 0.1), StateError);
}

TEST(SgdStep, QuadraticLossDecreasesMonotonically) {
  auto w = Tensor::vector({2.0, -3.0, 0.5}, true);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 10; ++step) {
    auto loss = sum(mul(w, w));
    EXPECT_LT(loss.item(), prev);
    prev = loss.item();
    backward(loss);
    sgd_step(std::vector<Tensor>{w}, 0.1);
  }
}

// Every differentiable op on random inputs in [-1, 1].
TEST(GradientOracle, EveryOp) {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto c = random_tensor({3, 4}, rng);
    auto v = random_tensor({4}, rng);
    auto s = random_tensor({1}, rng);
    const std::vector<std::size_t> idx{2, 0, 2};
    const std::vector<std::size_t> tgt{1, 0, 3};
    struct Case {
      const char* name;
      std::function<Tensor()> f;
      std::vector<Tensor> params;
    };
    std::vector<Case> cases{
        {"matmul", [&] { return weighted_sum(matmul(a, b)); }, {a, b}},
        {"vecmat", [&] { return weighted_sum(matmul(v, b)); }, {v, b}},
        {"transpose", [&] { return weighted_sum(transpose(a)); }, {a}},
        {"add", [&] { return weighted_sum(add(a, c)); }, {a, c}},
        {"sub", [&] { return weighted_sum(sub(a, c)); }, {a, c}},
        {"mul", [&] { return weighted_sum(mul(a, c)); }, {a, c}},
        {"scale", [&] { return weighted_sum(scale(a, -1.7)); }, {a}},
        {"scale_by", [&] { return weighted_sum(scale_by(a, s)); }, {a, s}},
        {"add_bias", [&] { return weighted_sum(add_bias(a, v)); }, {a, v}},
        {"sigmoid", [&] { return weighted_sum(sigmoid(a)); }, {a}},
        {"tanh", [&] { return weighted_sum(seqinfer::tanh(a)); }, {a}},
        {"relu", [&] { return weighted_sum(relu(a)); }, {a}},
        {"softmax0", [&] { return weighted_sum(softmax(a, 0)); }, {a}},
        {"softmax1", [&] { return weighted_sum(softmax(a, 1)); }, {a}},
        {"log_softmax", [&] { return weighted_sum(log_softmax(a, 1)); }, {a}},
        {"concat0", [&] { return weighted_sum(concat({a, c}, 0)); }, {a, c}},
        {"max1", [&] { return weighted_sum(max_over_axis(a, 1).values); }, {a}},
        {"mean0", [&] { return weighted_sum(mean_over_axis(a, 0)); }, {a}},
        {"gather", [&] { return weighted_sum(gather_rows(a, idx)); }, {a}},
        {"unfold", [&] { return weighted_sum(unfold_windows(a, 2)); }, {a}},
        {"pad", [&] { return weighted_sum(pad_rows(a, 5)); }, {a}},
        {"reshape", [&] { return weighted_sum(reshape(a, {2, 6})); }, {a}},
        {"cross_entropy", [&] { return cross_entropy(a, tgt); }, {a}},
    };
    for (auto& cs : cases) EXPECT_LT(gradcheck(cs.f, cs.params), 1e-4) << cs.name;
  }
}

TEST(UnfoldWindows, WindowError) {
  EXPECT_THROW(unfold_windows(Tensor::zeros({2, 3}), 3), WindowError);
}
