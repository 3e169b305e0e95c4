#include <gtest/gtest.h>

#include <random>

#include "ymh/hnfilt.hpp"

using namespace ymh;

namespace {

BundleConfig config(std::vector<int> degrees, std::vector<HiggsBlock> blocks = {}) {
  BundleConfig c;
  c.degrees = std::move(degrees);
  c.blocks = std::move(blocks);
  c.seed = 2;
  return c;
}

HiggsBlock block(int i, int j, BlockKind kind, double v = 1.0) {
  HiggsBlock b;
  b.i = i;
  b.j = j;
  b.kind = kind;
  b.value = v;
  b.scale = v;
  b.seed = 4;
  return b;
}

std::vector<Rational> type_of(std::initializer_list<int> v) {
  std::vector<Rational> out;
  for (int x : v) out.emplace_back(x);
  return out;
}

// HN polygon: upper concave hull of (rank, degree) over invariant coordinate
// subsheaves, expanded to a slope vector with multiplicities.
std::vector<Rational> hull_type(const BundleConfig& c) {
  const int R = c.rank();
  std::vector<std::pair<int, long long>> pts;
  for (unsigned m = 0; m < (1u << R); ++m) {
    bool closed = true;
    for (const auto& b : c.blocks)
      if ((m >> b.j & 1u) && !(m >> b.i & 1u)) closed = false;
    if (!closed) continue;
    long long deg = 0;
    for (int i = 0; i < R; ++i)
      if (m >> i & 1u) deg += c.degrees[i];
    pts.emplace_back(__builtin_popcount(m), deg);
  }
  std::vector<Rational> out;
  int r = 0;
  long long d = 0;
  while (r < R) {
    Rational best;
    int best_r = -1;
    long long best_d = 0;
    for (auto [pr, pd] : pts) {
      if (pr <= r) continue;
      const Rational s(pd - d, pr - r);
      if (best_r < 0 || s > best || (s == best && pr > best_r)) {
        best = s;
        best_r = pr;
        best_d = pd;
      }
    }
    for (int k = r; k < best_r; ++k) out.push_back(best);
    r = best_r;
    d = best_d;
  }
  return out;
}

}  // namespace

TEST(Slope, ExactArithmetic) {
  EXPECT_EQ(slope(1, 2), Rational(1, 2));
  EXPECT_EQ(slope(0, 3), Rational(0));
  EXPECT_EQ(slope(-2, 2), Rational(-1));
  EXPECT_THROW(slope(1, 0), DomainError);
}

TEST(Oracle, SplitNoHiggs) {
  const OracleResult r = oracle_hn_type(config({1, -1}));
  EXPECT_EQ(r.type.mu, type_of({1, -1}));
  ASSERT_EQ(r.hn.steps.size(), 2u);
  EXPECT_EQ(r.hn.steps[0].rank(), 1);
  EXPECT_EQ(r.hn.steps[0].basis(0, 0), cd(1.0));
  EXPECT_EQ(r.hn.steps[0].degree, Rational(1));
  EXPECT_EQ(r.hn.steps[1].rank(), 2);
}

TEST(Oracle, NilpotentOnTrivialIsSemistable) {
  const OracleResult r = oracle_hn_type(config({0, 0}, {block(0, 1, BlockKind::constant)}));
  EXPECT_EQ(r.type.mu, type_of({0, 0}));
  EXPECT_EQ(r.hn.steps.size(), 1u);
  // Seshadri refinement: ker phi first
  ASSERT_EQ(r.hns.steps.size(), 2u);
  EXPECT_NEAR(std::abs(r.hns.steps[0].basis(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.hns.steps[0].basis(1, 0)), 0.0, 1e-12);
  EXPECT_EQ(r.graded_slopes, type_of({0, 0}));
}

TEST(Oracle, ThreeFactorsWithBlock) {
  for (bool with_block : {false, true}) {
    std::vector<HiggsBlock> blocks;
    if (with_block) blocks.push_back(block(0, 1, BlockKind::section));
    const OracleResult r = oracle_hn_type(config({1, 0, -1}, blocks));
    EXPECT_EQ(r.type.mu, type_of({1, 0, -1}));
    EXPECT_EQ(r.hn.steps.size(), 3u);
  }
}

TEST(Oracle, BlocksTowardHigherDegreeKeepType) {
  // L_{-1} -> L_1 section: L_1 still destabilizes, type (1,-1)
  EXPECT_EQ(oracle_hn_type(config({1, -1}, {block(0, 1, BlockKind::section)})).type.mu, type_of({1, -1}));
  // equal degrees with a constant block stay semistable
  EXPECT_EQ(oracle_hn_type(config({1, 1, -2}, {block(0, 1, BlockKind::constant)})).type.mu,
            (std::vector<Rational>{1, 1, -2}));
}

TEST(Oracle, QuotientSlopesStrictlyDecrease) {
  const OracleResult r = oracle_hn_type(config({2, 0, 0, -1}, {block(0, 3, BlockKind::section)}));
  for (std::size_t i = 1; i < r.hn.steps.size(); ++i)
    EXPECT_GT(r.hn.steps[i - 1].quotient_slope, r.hn.steps[i].quotient_slope);
  Rational sum = 0;
  for (Rational m : r.type.mu) sum += m;
  EXPECT_EQ(sum, Rational(1));
}

TEST(Oracle, UnsupportedPatternsError) {
  EXPECT_THROW(oracle_hn_type(config({0, 0, -1}, {block(0, 1, BlockKind::constant), block(0, 2, BlockKind::section)})),
               OracleUnsupported);
  EXPECT_THROW(oracle_hn_type(config({1, 0, 0}, {block(0, 1, BlockKind::section), block(0, 2, BlockKind::section)})),
               OracleUnsupported);
}

TEST(Oracle, MatchesHullOnRandomFamily) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> deg(-2, 2), rank(1, 4), coin(0, 2);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    BundleConfig c;
    const int R = rank(rng);
    for (int i = 0; i < R; ++i) c.degrees.push_back(deg(rng));
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j)
        if (c.degrees[i] > c.degrees[j] && coin(rng) == 0) c.blocks.push_back(block(i, j, BlockKind::section));
    try {
      const OracleResult r = oracle_hn_type(c);
      EXPECT_EQ(r.type.mu, hull_type(c)) << "trial " << trial;
      ++checked;
    } catch (const OracleUnsupported&) {
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(ValidateFiltration, OracleAndWrongOrder) {
  const BundleConfig c = config({1, -1});
  const TorusGrid g(32);
  const OracleResult r = oracle_hn_type(c);
  const FiltrationReport ok = validate_filtration<2>(r.hn, c, g);
  EXPECT_TRUE(ok.ok());
  EXPECT_NEAR(ok.steps[0].measured_degree, 1.0, 1e-9);
  EXPECT_NEAR(ok.steps[1].measured_degree, 0.0, 1e-9);

  FiltrationSpec wrong = r.hn;
  wrong.steps[0].basis = Eigen::MatrixXcd::Zero(2, 1);
  wrong.steps[0].basis(1, 0) = 1.0;
  const FiltrationReport bad = validate_filtration<2>(wrong, c, g);
  EXPECT_FALSE(bad.ok());
  EXPECT_EQ(bad.first_failure(), 0);
  EXPECT_NEAR(bad.steps[0].measured_degree, -1.0, 1e-9);

  FiltrationSpec full;
  full.steps.push_back({Eigen::MatrixXcd::Identity(2, 2), Rational(0), Rational(0)});
  EXPECT_TRUE(validate_filtration<2>(full, c, g).ok());
}

TEST(ValidateFiltration, OracleWithSectionBlock) {
  const BundleConfig c = config({1, 0, -1}, {block(0, 1, BlockKind::section)});
  const FiltrationReport rep = validate_filtration<3>(oracle_hn_type(c).hn, c, TorusGrid(64));
  EXPECT_TRUE(rep.ok());
}

TEST(EstimateLimitType, ConstantFields) {
  TorusGrid g(8);
  Mat<2> d = Mat<2>::Zero();
  d(0, 0) = -1;
  d(1, 1) = 1;
  const TypeEstimate t = estimate_limit_type(MeanCurvature<2>{MatrixField<2>(g, FormDegree::zero, {0, 0}, d)});
  EXPECT_NEAR(t.lambda[0], 1.0, 1e-14);
  EXPECT_NEAR(t.lambda[1], -1.0, 1e-14);
  EXPECT_EQ(t.spatial_dev, 0.0);
  const TypeEstimate z = estimate_limit_type(MeanCurvature<3>{MatrixField<3>(g, FormDegree::zero, {0, 0, 0})});
  for (double v : z.lambda) EXPECT_EQ(v, 0.0);
}

TEST(Dominance, PartialSums) {
  EXPECT_EQ(dominance_compare({0, 0}, {1, -1}), Dominance::less_equal);
  EXPECT_EQ(dominance_compare({1, -1}, {0, 0}), Dominance::greater_equal);
  EXPECT_EQ(dominance_compare({1, -1}, {1, -1}), Dominance::equal);
  EXPECT_EQ(dominance_compare({2, -1, -1}, {1, 1, -2}), Dominance::incomparable);
  EXPECT_THROW(dominance_compare({1, 0}, {0, 0}), DomainError);
  EXPECT_LE(dominance_defect({0, 0}, {1, -1}), 0.0);
}

TEST(SeshadriGraded, SplitBackground) {
  const BundleConfig c = config({1, -1});
  const auto bg = build_background<2>(c, TorusGrid(16));
  const auto e = evaluate(initial_state(bg), build_higgs(c, bg), bg);
  const GradedReport rep = seshadri_graded_check(oracle_hn_type(c), e);
  EXPECT_EQ(rep.status, GradedStatus::pass) << rep.reason;
  ASSERT_EQ(rep.clusters.size(), 2u);
}

TEST(SeshadriGraded, NilpotentAtStartIsNotYetGraded) {
  // at t = 0 the spectrum is (1/pi, -1/pi), not the graded (0, 0)
  const BundleConfig c = config({0, 0}, {block(0, 1, BlockKind::constant)});
  const auto bg = build_background<2>(c, TorusGrid(16));
  const auto e = evaluate(initial_state(bg), build_higgs(c, bg), bg);
  EXPECT_EQ(seshadri_graded_check(oracle_hn_type(c), e).status, GradedStatus::fail);
}

TEST(SeshadriGraded, RankOne) {
  const BundleConfig c = config({2});
  const auto bg = build_background<1>(c, TorusGrid(16));
  const auto e = evaluate(initial_state(bg), build_higgs(c, bg), bg);
  const GradedReport rep = seshadri_graded_check(oracle_hn_type(c), e);
  EXPECT_EQ(rep.status, GradedStatus::pass);
  ASSERT_EQ(rep.clusters.size(), 1u);
  EXPECT_NEAR(rep.clusters[0].value, 2.0, 1e-12);
}
