#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ymh/bundle.hpp"

using namespace ymh;

namespace {

BundleConfig make_config(std::vector<int> degrees, std::vector<HiggsBlock> blocks = {}) {
  BundleConfig c;
  c.degrees = std::move(degrees);
  c.blocks = std::move(blocks);
  c.seed = 17;
  return c;
}

HiggsBlock constant_block(int i, int j, double v) {
  HiggsBlock b;
  b.i = i;
  b.j = j;
  b.kind = BlockKind::constant;
  b.value = v;
  return b;
}

HiggsBlock section_block(int i, int j, double scale) {
  HiggsBlock b;
  b.i = i;
  b.j = j;
  b.kind = BlockKind::section;
  b.seed = 3;
  b.scale = scale;
  return b;
}

template <int R>
MatrixField<R> random_metric(const Background<R>& bg, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  MatrixField<R> h(bg.grid, FormDegree::zero, bg.degrees);
  for (auto& m : h.values()) {
    Mat<R> b;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) b(i, j) = cd(nd(rng), nd(rng));
    m = Mat<R>::Identity() + amp * b * b.adjoint();
  }
  return h;
}

template <int R>
double trace_degree(const MatrixField<R>& f) {
  double sum = 0;
  for (const auto& m : f.values()) sum += (kI * m.trace()).real();
  return sum * f.grid().cell_area() / kTwoPi;
}

}  // namespace

TEST(BundleConfig, BlockLegality) {
  EXPECT_NO_THROW(make_config({1, -1}, {section_block(0, 1, 1.0)}).validate());
  EXPECT_THROW(make_config({1, -1}, {section_block(1, 0, 1.0)}).validate(), ConfigError);
  EXPECT_THROW(make_config({0, 0}, {section_block(0, 1, 1.0)}).validate(), ConfigError);
  EXPECT_NO_THROW(make_config({0, 0}, {constant_block(0, 1, 1.0)}).validate());
  EXPECT_THROW(make_config({1, 0}, {constant_block(0, 1, 1.0)}).validate(), ConfigError);
  EXPECT_THROW(make_config({1, 0}, {section_block(0, 2, 1.0)}).validate(), ConfigError);
  EXPECT_THROW(make_config({}).validate(), ConfigError);
  EXPECT_EQ(make_config({2, 0, -1}).degree(), 1);
}

TEST(Background, TrivialLineBundle) {
  TorusGrid g(8);
  const auto bg = build_background<1>(make_config({0}), g);
  for (int s = 0; s < g.sites(); ++s) {
    EXPECT_EQ(bg.factor_links[0].x(s), cd(1.0));
    EXPECT_EQ(bg.factor_links[0].y(s), cd(1.0));
    EXPECT_EQ(bg.curvature[s].norm(), 0.0);
  }
  EXPECT_EQ(bg.lambda, 0.0);
}

TEST(Background, FactorFluxes) {
  TorusGrid g(16);
  const auto b2 = build_background<2>(make_config({1, -1}), g);
  EXPECT_NEAR(b2.factor_links[0].total_flux() / kTwoPi, 1.0, 1e-9);
  EXPECT_NEAR(b2.factor_links[1].total_flux() / kTwoPi, -1.0, 1e-9);
  EXPECT_NEAR(trace_degree(b2.curvature), 0.0, 1e-9);

  const auto b3 = build_background<3>(make_config({2, 0, -2}), g);
  for (int i = 0; i < 3; ++i) {
    double flux = 0;
    for (int y = 0; y < g.n(); ++y)
      for (int x = 0; x < g.n(); ++x) flux += b3.factor_links[i].cell_flux_density(x, y);
    EXPECT_NEAR(flux * g.cell_area() / kTwoPi, 2 - 2 * i, 1e-9);
  }
  EXPECT_NEAR(trace_degree(b3.curvature), 0.0, 1e-9);
  EXPECT_NEAR(b3.lambda, 0.0, 1e-15);
  EXPECT_NEAR(build_background<2>(make_config({2, -1}), g).lambda, kPi, 1e-14);
}

TEST(Background, ResolutionGuard) {
  EXPECT_THROW(build_background<1>(make_config({3}), TorusGrid(8)), ConfigError);
  EXPECT_NO_THROW(build_background<1>(make_config({2}), TorusGrid(8)));
  EXPECT_THROW(build_background<2>(make_config({1}), TorusGrid(8)), ConfigError);
}

TEST(ChernCurvature, IdentityMetricGivesBackground) {
  TorusGrid g(16);
  const auto bg = build_background<2>(make_config({1, -1}), g);
  const MatrixField<2> f = chern_curvature(initial_state(bg), bg);
  for (int s = 0; s < g.sites(); ++s) EXPECT_LT((f[s] - bg.curvature[s]).norm(), 1e-13);
}

TEST(ChernCurvature, ConformalFactorSecondOrder) {
  // h = e^u on the trivial line bundle: F_H = dbar del u, whose omega
  // coefficient is (i/2) Lap u.
  auto error_at = [](int n) {
    TorusGrid g(n);
    const auto bg = build_background<1>(make_config({0}), g);
    MetricState<1> st = initial_state(bg);
    double err = 0;
    std::vector<double> lap(g.sites());
    for (int s = 0; s < g.sites(); ++s) {
      const double x = g.x_of(s) * g.spacing(), y = g.y_of(s) * g.spacing();
      const double u = 0.4 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) + 0.2 * std::cos(kTwoPi * 2 * y);
      st.h[s](0, 0) = std::exp(u);
      lap[s] = -0.4 * 2 * kTwoPi * kTwoPi * std::sin(kTwoPi * x) * std::cos(kTwoPi * y) -
               0.2 * 4 * kTwoPi * kTwoPi * std::cos(kTwoPi * 2 * y);
    }
    const MatrixField<1> f = chern_curvature(st, bg);
    for (int s = 0; s < g.sites(); ++s) err = std::max(err, std::abs(f[s](0, 0) - 0.5 * kI * lap[s]));
    return err;
  };
  const double e32 = error_at(32), e64 = error_at(64);
  const double order = std::log2(e32 / e64);
  EXPECT_GT(order, 1.8);
  EXPECT_LT(order, 2.2);
}

TEST(ChernCurvature, DegreeIndependentOfMetric) {
  TorusGrid g(16);
  const auto bg = build_background<3>(make_config({2, 0, -1}), g);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    MetricState<3> st{0.0, random_metric(bg, seed, 0.5)};
    EXPECT_NEAR(trace_degree(chern_curvature(st, bg)), 1.0, 1e-8);
  }
}

TEST(ChernCurvature, NonPositiveMetricIsStateError) {
  TorusGrid g(8);
  const auto bg = build_background<2>(make_config({0, 0}), g);
  MetricState<2> st = initial_state(bg);
  st.h[5](1, 1) = -1.0;
  EXPECT_THROW(chern_curvature(st, bg), StateError);
}

TEST(HiggsBracket, ZeroAndNilpotent) {
  TorusGrid g(8);
  const auto bg = build_background<2>(make_config({0, 0}), g);
  const MetricState<2> st = initial_state(bg);
  HiggsField<2> zero{MatrixField<2>(g, FormDegree::one_zero, {0, 0})};
  const auto bracket = higgs_adjoint_bracket(zero, st);
  for (const auto& m : bracket.values()) EXPECT_EQ(m.norm(), 0.0);

  const auto higgs = build_higgs(make_config({0, 0}, {constant_block(0, 1, 1.0)}), bg);
  const MatrixField<2> k = lambda_contract(higgs_adjoint_bracket(higgs, st));
  Mat<2> expected = Mat<2>::Zero();
  expected(0, 0) = 2.0;
  expected(1, 1) = -2.0;
  for (const auto& m : k.values()) {
    EXPECT_LT((kI * m - expected).norm(), 1e-14);
    EXPECT_LT(std::abs(m.trace()), 1e-14);
  }
}

TEST(HiggsBracket, TraceFreeForRandomData) {
  TorusGrid g(8);
  const auto bg = build_background<3>(make_config({0, 0, 0}), g);
  const MatrixField<3> h = random_metric(bg, 9, 0.3);
  MatrixField<3> phi = random_metric(bg, 10, 0.5).with_degree(FormDegree::one_zero);
  const MatrixField<3> b = higgs_adjoint_bracket(phi, h, metric_inverse(h));
  for (const auto& m : b.values()) EXPECT_LT(std::abs(m.trace()), 1e-12);
}

TEST(TotalCurvature, MetricSelfAdjoint) {
  TorusGrid g(16);
  const auto bg = build_background<2>(make_config({1, -1}, {section_block(0, 1, 0.7)}), g);
  const auto higgs = build_higgs(make_config({1, -1}, {section_block(0, 1, 0.7)}), bg);
  const MatrixField<2> h = random_metric(bg, 4, 0.3);
  const MatrixField<2> k = total_curvature_operator(h, metric_inverse(h), higgs.phi, bg);
  for (int s = 0; s < g.sites(); ++s) {
    const Mat<2> hk = h[s] * k[s];
    EXPECT_LT((hk - hk.adjoint()).norm(), 1e-10 * (1 + hk.norm()));
  }
}

TEST(HiggsField, SectionBlocksAreHolomorphicAndSparse) {
  TorusGrid g(32);
  const auto cfg = make_config({1, 0, -1}, {section_block(0, 1, 0.5), section_block(1, 2, 2.0)});
  const auto bg = build_background<3>(cfg, g);
  const auto higgs = build_higgs(cfg, bg);
  EXPECT_TRUE(higgs.holomorphic);
  EXPECT_LE(higgs_dbar_norm(higgs, bg), 10.0 / (32.0 * 32.0) * 2.5);
  for (const auto& m : higgs.phi.values()) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (!((i == 0 && j == 1) || (i == 1 && j == 2))) {
          EXPECT_EQ(m(i, j), cd(0.0));
        }
  }
  EXPECT_EQ(higgs.phi.degree(), FormDegree::one_zero);
}
