#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "seqinfer/attention.hpp"
#include "seqinfer/errors.hpp"
#include "test_support.hpp"

using namespace seqinfer;
using seqinfer::testing::gradcheck;
using seqinfer::testing::random_tensor;
using seqinfer::testing::weighted_sum;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.shape()[0], std::vector<double>(t.shape()[1]));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) m[i][j] = t.at(i, j);
  return m;
}

// Per-row exp/normalise/mix over the allowed key positions.
Mat brute_attention(const Mat& q, const Mat& k, const Mat& v, const std::function<bool(std::size_t, std::size_t)>& allowed) {
  const std::size_t n = q.size(), dk = q[0].size(), dv = v[0].size();
  Mat out(n, std::vector<double>(dv, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(k.size(), 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!allowed(i, j)) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < dk; ++c) s += q[i][c] * k[j][c];
      w[j] = std::exp(s / std::sqrt(static_cast<double>(dk)));
      z += w[j];
    }
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < dv; ++c) out[i][c] += w[j] / z * v[j][c];
  }
  return out;
}

Mat matmul_ref(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t p = 0; p < b.size(); ++p)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][p] * b[p][j];
  return out;
}

const auto kAll = [](std::size_t, std::size_t) { return true; };

DependencyTree chain3() {
  return DependencyTree{{"a", "b", "c"}, {2, 0, 2}, {"det", "root", "obj"}, {"X", "Y", "Z"}};
}

}  // namespace

TEST(ScaledDotAttention, SingleTokenReturnsValueRow) {
  Rng rng(1);
  auto q = random_tensor({1, 3}, rng), k = random_tensor({1, 3}, rng), v = random_tensor({1, 2}, rng);
  auto out = scaled_dot_attention(q, k, v);
  EXPECT_EQ(out[0], v[0]);
  EXPECT_EQ(out[1], v[1]);
}

TEST(ScaledDotAttention, EqualScoresGiveRowMean) {
  auto q = Tensor::matrix({{0}, {0}, {0}});
  auto k = Tensor::matrix({{1}, {2}, {3}});
  auto v = Tensor::matrix({{1, 4}, {2, 5}, {6, 0}});
  auto out = scaled_dot_attention(q, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.at(i, 0), 3.0, 1e-15);
    EXPECT_NEAR(out.at(i, 1), 3.0, 1e-15);
  }
}

TEST(ScaledDotAttention, MatchesBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto q = random_tensor({3, 2}, rng), k = random_tensor({3, 2}, rng), v = random_tensor({3, 2}, rng);
    auto expect = brute_attention(to_mat(q), to_mat(k), to_mat(v), kAll);
    auto got = to_mat(scaled_dot_attention(q, k, v));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got[i][j], expect[i][j], 1e-10);
  }
}

TEST(ScaledDotAttention, ShapeErrors) {
  EXPECT_THROW(scaled_dot_attention(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}), Tensor::zeros({2, 2})),
               DimensionError);
  EXPECT_THROW(scaled_dot_attention(Tensor::zeros({2, 2}), Tensor::zeros({2, 2}), Tensor::zeros({3, 2})),
               DimensionError);
}

TEST(MaskedAttention, SingleIncludedColumnCopiesValueRow) {
  Rng rng(3);
  auto q = random_tensor({3, 2}, rng), k = random_tensor({3, 2}, rng), v = random_tensor({3, 4}, rng);
  const double ninf = -std::numeric_limits<double>::infinity();
  auto m = Tensor::matrix({{ninf, ninf, 0}, {0, 0, 0}, {0, ninf, ninf}});
  auto out = masked_attention(q, k, v, RoleMask::from_matrix({}, m));
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(out.at(0, c), v.at(2, c));
    EXPECT_EQ(out.at(2, c), v.at(0, c));
  }
}

TEST(MaskedAttention, ZeroMaskIsBitIdentical) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6), dk = 1 + rng.below(4);
    auto q = random_tensor({n, dk}, rng, false, -3, 3), k = random_tensor({n, dk}, rng, false, -3, 3);
    auto v = random_tensor({n, 3}, rng, false, -3, 3);
    auto a = scaled_dot_attention(q, k, v);
    auto b = masked_attention(q, k, v, build_role_mask({Role::global}, n));
    for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]);
  }
}

TEST(MaskedAttention, LocalWindowMatchesWindowedOracle) {
  Rng rng(5);
  auto q = random_tensor({4, 3}, rng), k = random_tensor({4, 3}, rng), v = random_tensor({4, 2}, rng);
  auto mask = build_role_mask(RoleSpec::parse("local:1"), 4);
  auto got = to_mat(masked_attention(q, k, v, mask));
  auto expect = brute_attention(to_mat(q), to_mat(k), to_mat(v),
                                [](std::size_t i, std::size_t j) { return (i > j ? i - j : j - i) <= 1; });
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got[i][j], expect[i][j], 1e-12);
}

TEST(MaskedAttention, WeightsSumToOneAndMaskedAreZero) {
  Rng rng(9);
  auto tree = DependencyTree{{"a", "b", "c", "d", "e"}, {2, 0, 2, 3, 2}, {"x", "root", "x", "x", "x"}, {"P", "P", "P", "P", "P"}};
  for (const char* role : {"global", "self", "forward", "backward", "local:1", "local:2", "syntactic"}) {
    auto mask = build_role_mask(RoleSpec::parse(role), 5, &tree);
    auto q = random_tensor({5, 3}, rng, false), k = random_tensor({5, 3}, rng, false);
    auto w = attention_weights(q, k, &mask);
    for (std::size_t i = 0; i < 5; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        total += w.at(i, j);
        if (!mask.includes(i, j)) EXPECT_EQ(w.at(i, j), 0.0) << role;
      }
      EXPECT_NEAR(total, 1.0, 1e-12) << role;
    }
  }
}

TEST(MaskedAttention, SelfMaskArgmaxIsDiagonalUnderQueryScaling) {
  Rng rng(4);
  auto mask = build_role_mask({Role::self}, 4);
  auto q = random_tensor({4, 2}, rng, false), k = random_tensor({4, 2}, rng, false);
  for (double c : {0.01, 1.0, 50.0}) {
    auto w = attention_weights(scale(q, c), k, &mask);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        if (j != i) EXPECT_GT(w.at(i, i), w.at(i, j));
  }
}

TEST(RoleMask, BuildExamples) {
  auto g = build_role_mask({Role::global}, 3);
  for (double v : g.matrix().data()) EXPECT_EQ(v, 0.0);
  auto s = build_role_mask({Role::self}, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.includes(i, j), i == j);
  auto tree = chain3();
  auto syn = build_role_mask({Role::syntactic}, 3, &tree);
  // Token 2 (row 1) is the head of 1 and 3.
  EXPECT_TRUE(syn.includes(1, 0) && syn.includes(1, 1) && syn.includes(1, 2));
  EXPECT_TRUE(syn.includes(0, 1) && !syn.includes(0, 2));
  auto fwd = build_role_mask({Role::forward}, 3);
  EXPECT_TRUE(fwd.includes(2, 0) && !fwd.includes(0, 2));
  auto bwd = build_role_mask({Role::backward}, 3);
  EXPECT_TRUE(bwd.includes(0, 2) && !bwd.includes(2, 0));
}

TEST(RoleMask, Errors) {
  EXPECT_THROW(RoleSpec::parse("diagonal"), ContractError);
  EXPECT_THROW(RoleSpec::parse("local"), ContractError);
  EXPECT_THROW(RoleSpec::parse("self:1"), ContractError);
  EXPECT_THROW(build_role_mask({Role::syntactic}, 3), ContractError);
  auto tree = chain3();
  EXPECT_THROW(build_role_mask({Role::syntactic}, 4, &tree), DimensionError);
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(RoleMask::from_matrix({}, Tensor::matrix({{0, 0}, {ninf, ninf}})), DegenerateSliceError);
  EXPECT_THROW(RoleMask::from_matrix({}, Tensor::matrix({{0, -1e9}, {0, 0}})), ContractError);
}

TEST(RoleAssignments, ParseAndWrite) {
  std::istringstream in("1\tself\n0\tlocal:2\n2\tsyntactic\n");
  auto roles = read_role_assignments(in);
  ASSERT_EQ(roles.size(), 3u);
  EXPECT_EQ(roles[0], (RoleSpec{Role::local, 2}));
  EXPECT_EQ(roles[1].role, Role::self);
  std::ostringstream out;
  write_role_assignments(out, roles);
  EXPECT_EQ(out.str(), "0\tlocal:2\n1\tself\n2\tsyntactic\n");
  std::istringstream bad("0\tlocal:x\n");
  EXPECT_THROW(read_role_assignments(bad), FormatError);
  std::istringstream gap("0\tself\n2\tself\n");
  EXPECT_THROW(read_role_assignments(gap), FormatError);
}

TEST(MultiHeadConcat, OneHeadIdentityOutputEqualsSingleHead) {
  Rng rng(2);
  auto x = random_tensor({4, 3}, rng);
  std::vector<HeadParams> heads{HeadParams::random(3, 3, rng)};
  auto eye = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  auto mask = build_role_mask(RoleSpec::parse("local:1"), 4);
  std::vector<const RoleMask*> masks{&mask};
  auto a = multi_head_concat(x, heads, masks, eye);
  auto b = head_attention(x, x, heads[0], &mask);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
  auto c = multi_head_concat(x, heads, {}, eye);
  auto d = head_attention(x, x, heads[0]);
  for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_EQ(c[i], d[i]);
}

TEST(MultiHeadConcat, DuplicatedHeadsMatchHandComposition) {
  Rng rng(6);
  auto x = random_tensor({3, 2}, rng);
  auto h = HeadParams::random(2, 2, rng);
  std::vector<HeadParams> heads{h, h};
  // [I; I] sums the two identical head outputs.
  auto w_o = Tensor::matrix({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
  auto got = to_mat(multi_head_concat(x, heads, {}, w_o));
  const Mat xm = to_mat(x);
  auto single = brute_attention(matmul_ref(xm, to_mat(h.w_q)), matmul_ref(xm, to_mat(h.w_k)),
                                matmul_ref(xm, to_mat(h.w_v)), kAll);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got[i][j], 2.0 * single[i][j], 1e-12);
}

TEST(MultiHeadConcat, GradientCheck) {
  Rng rng(13);
  auto x = random_tensor({4, 4}, rng);
  std::vector<HeadParams> heads{HeadParams::random(4, 2, rng), HeadParams::random(4, 2, rng)};
  auto w_o = glorot(4, 4, rng);
  auto m0 = build_role_mask(RoleSpec::parse("local:1"), 4);
  auto m1 = build_role_mask({Role::forward}, 4);
  std::vector<const RoleMask*> masks{&m0, &m1};
  std::vector<Tensor> params{x, w_o};
  for (auto& h : heads) params.insert(params.end(), {h.w_q, h.w_k, h.w_v});
  EXPECT_LT(gradcheck([&] { return weighted_sum(multi_head_concat(x, heads, masks, w_o)); }, params), 1e-4);
  EXPECT_THROW(multi_head_concat(x, heads, masks, glorot(3, 4, rng)), DimensionError);
}

TEST(MultiHeadGated, SaturatedGateSelectsHead) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({5, 4}, rng, false);
    std::vector<HeadParams> heads;
    std::vector<Tensor> proj;
    for (int h = 0; h < 3; ++h) {
      heads.push_back(HeadParams::random(4, 2, rng));
      proj.push_back(glorot(2, 4, rng));
    }
    const std::size_t pick = trial % 3;
    HeadGates gates;
    for (std::size_t h = 0; h < 3; ++h) gates.raw.push_back(Tensor::scalar(h == pick ? 50.0 : -50.0, true));
    auto got = multi_head_gated(x, heads, gates, proj);
    auto expect = matmul(head_attention(x, x, heads[pick]), proj[pick]);
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-9);
  }
}

TEST(MultiHeadGated, EqualGatesPermutationInvariant) {
  Rng rng(22);
  auto x = random_tensor({4, 4}, rng, false);
  std::vector<HeadParams> heads{HeadParams::random(4, 2, rng), HeadParams::random(4, 2, rng), HeadParams::random(4, 2, rng)};
  std::vector<Tensor> proj{glorot(2, 4, rng), glorot(2, 4, rng), glorot(2, 4, rng)};
  auto gates = HeadGates::uniform(3, 0.3);
  auto a = multi_head_gated(x, heads, gates, proj);
  std::vector<HeadParams> ph{heads[2], heads[0], heads[1]};
  std::vector<Tensor> pp{proj[2], proj[0], proj[1]};
  auto b = multi_head_gated(x, ph, gates, pp);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(MultiHeadGated, GateGradientMatchesFiniteDifferences) {
  Rng rng(23);
  auto x = random_tensor({4, 4}, rng);
  std::vector<HeadParams> heads{HeadParams::random(4, 2, rng), HeadParams::random(4, 2, rng)};
  std::vector<Tensor> proj{glorot(2, 4, rng), glorot(2, 4, rng)};
  HeadGates gates{{Tensor::scalar(0.4, true), Tensor::scalar(-1.1, true)}};
  auto m = build_role_mask({Role::backward}, 4);
  std::vector<const RoleMask*> masks{&m, nullptr};
  std::vector<Tensor> params(gates.raw);
  params.push_back(x);
  for (auto& p : proj) params.push_back(p);
  EXPECT_LT(gradcheck([&] { return weighted_sum(multi_head_gated(x, heads, gates, proj, masks)); }, params), 1e-4);
  auto eff = gates.effective();
  for (double e : eff) {
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 1.0);
  }
}

TEST(MultiHeadGated, GateCountMismatch) {
  Rng rng(1);
  auto x = random_tensor({2, 4}, rng, false);
  std::vector<HeadParams> heads{HeadParams::random(4, 2, rng), HeadParams::random(4, 2, rng)};
  std::vector<Tensor> proj{glorot(2, 4, rng), glorot(2, 4, rng)};
  EXPECT_THROW(multi_head_gated(x, heads, HeadGates::uniform(3), proj), ContractError);
}

TEST(SinusoidalPositions, Properties) {
  auto pe = sinusoidal_positions(512, 16);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(pe.at(0, j), j % 2 == 0 ? 0.0 : 1.0);
  for (double v : pe.data()) EXPECT_LE(std::abs(v), 1.0);
  for (std::size_t a = 0; a < 512; ++a)
    for (std::size_t b = a + 1; b < 512; ++b) {
      bool differ = false;
      for (std::size_t j = 0; j < 16 && !differ; ++j) differ = pe.at(a, j) != pe.at(b, j);
      ASSERT_TRUE(differ) << a << " vs " << b;
    }
  EXPECT_THROW(sinusoidal_positions(4, 3), ContractError);
}

TEST(EncoderLayer, GradientCheckAllRoles) {
  Rng rng(31);
  auto tree = DependencyTree{{"a", "b", "c", "d"}, {2, 0, 2, 3}, {"x", "root", "x", "x"}, {"P", "P", "P", "P"}};
  for (auto agg : {Aggregation::concat, Aggregation::gated}) {
    MultiHeadConfig cfg{6, 4, 2, agg, {}};
    for (const char* r : {"global", "self", "forward", "backward", "local:1", "syntactic"}) cfg.roles.push_back(RoleSpec::parse(r));
    EncoderLayer layer(cfg, 8, rng);
    auto x = random_tensor({4, 4}, rng);
    ParamList named;
    layer.collect(named, "enc");
    std::vector<Tensor> params{x};
    for (auto& p : named) params.push_back(p.tensor);
    EXPECT_LT(gradcheck([&] { return weighted_sum(layer.forward(x, &tree)); }, params), 1e-4);
  }
}
