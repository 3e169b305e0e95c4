#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ymh/flow.hpp"

using namespace ymh;

namespace {

BundleConfig config(std::vector<int> degrees, std::vector<HiggsBlock> blocks = {}) {
  BundleConfig c;
  c.degrees = std::move(degrees);
  c.blocks = std::move(blocks);
  c.seed = 3;
  return c;
}

HiggsBlock block(int i, int j, BlockKind kind, double v) {
  HiggsBlock b;
  b.i = i;
  b.j = j;
  b.kind = kind;
  b.value = v;
  b.scale = v;
  b.seed = 2;
  return b;
}

template <int R>
struct Case {
  BundleConfig cfg;
  Background<R> bg;
  HiggsField<R> higgs;
  Case(BundleConfig c, int n) : cfg(std::move(c)), bg(build_background<R>(cfg, TorusGrid(n))),
                                 higgs(build_higgs(cfg, bg)) {}
};

template <int R>
MatrixField<R> random_metric(const Background<R>& bg, std::uint64_t seed, double amp = 0.3) {
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
double max_diff(const MatrixField<R>& a, const MatrixField<R>& b) {
  double m = 0.0;
  for (int s = 0; s < a.size(); ++s) m = std::max(m, (a[s] - b[s]).cwiseAbs().maxCoeff());
  return m;
}

// Smooth metric for the two-factor split: entries of twist d_i - d_j.
MatrixField<2> smooth_metric(const Background<2>& bg, double amp) {
  const TorusGrid& g = bg.grid;
  MatrixField<2> h(g, FormDegree::zero, bg.degrees);
  for (int s = 0; s < g.sites(); ++s) {
    const double x = g.x_of(s) * g.spacing(), y = g.y_of(s) * g.spacing();
    h[s](0, 0) = std::exp(amp * std::sin(kTwoPi * x) * std::cos(kTwoPi * y));
    h[s](1, 1) = std::exp(-amp * std::cos(kTwoPi * (x + y)));
    const cd off = amp * 0.5 * std::exp(kI * kTwoPi * y) * std::sin(kTwoPi * x);
    h[s](0, 1) = off;
    h[s](1, 0) = std::conj(off);
  }
  return h;
}

}  // namespace

TEST(Flow, TrivialLineIsFixed) {
  Case<1> c(config({0}), 16);
  FlowParams p;
  MetricState<1> st = initial_state(c.bg, p);
  for (int k = 0; k < 5; ++k) st = step_metric_flow(st, c.higgs, c.bg, p);
  for (const auto& m : st.h.values()) EXPECT_NEAR(std::abs(m(0, 0) - 1.0), 0.0, 1e-14);
}

TEST(Flow, DeterminantConservedForBalancedSplit) {
  // (1,-1), phi = 0: tr K = 0, so log det h stays 0 while the factors drift apart.
  Case<2> c(config({1, -1}), 16);
  FlowParams p;
  p.dt_safety = 0.5;
  MetricState<2> st = initial_state(c.bg, p);
  MetricStepper<2> stepper(c.higgs, c.bg, p);
  for (int k = 0; k < 10; ++k) stepper.step(st);
  const double rate = 2.0 * kTwoPi;
  double integral = 0.0;
  for (const auto& m : st.h.values()) integral += std::log(m.determinant().real()) * c.bg.grid.cell_area();
  EXPECT_NEAR(integral, 0.0, 1e-10);
  for (const auto& m : st.h.values()) {
    EXPECT_NEAR(m(0, 0).real(), std::exp(-rate * st.t), 1e-9);
    EXPECT_NEAR(m(1, 1).real(), std::exp(rate * st.t), 1e-9);
  }
}

TEST(Flow, FusedRhsMatchesReference) {
  Case<2> c(config({1, -1}, {block(0, 1, BlockKind::section, 0.7)}), 16);
  const MatrixField<2> h = random_metric(c.bg, 4);
  const double lambda = 0.3;
  const MatrixField<2> ref = metric_flow_rhs_reference(h, c.higgs, c.bg, lambda);
  const MatrixField<2> fused = metric_flow_rhs(h, c.higgs, c.bg, lambda);
  double scale = 0.0;
  for (const auto& m : ref.values()) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  EXPECT_LT(max_diff(ref, fused), 1e-12 * scale);
}

TEST(Flow, FusedRhsMatchesReferenceRank3) {
  Case<3> c(config({1, 0, -1}, {block(0, 1, BlockKind::section, 0.5), block(1, 2, BlockKind::section, 0.5)}), 16);
  const MatrixField<3> h = random_metric(c.bg, 8, 0.2);
  const MatrixField<3> ref = metric_flow_rhs_reference(h, c.higgs, c.bg, 0.0);
  const MatrixField<3> fused = metric_flow_rhs(h, c.higgs, c.bg, 0.0);
  double scale = 0.0;
  for (const auto& m : ref.values()) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  EXPECT_LT(max_diff(ref, fused), 1e-12 * scale);
}

TEST(Flow, StepPreservesHermiticityAndPositivity) {
  Case<2> c(config({1, -1}, {block(0, 1, BlockKind::section, 0.8)}), 16);
  FlowParams p;
  p.dt_safety = 1.0;
  MetricState<2> st{0.0, smooth_metric(c.bg, 0.3)};
  MetricStepper<2> stepper(c.higgs, c.bg, p);
  for (int k = 0; k < 20; ++k) stepper.step(st);
  for (const auto& m : st.h.values()) {
    EXPECT_EQ((m - m.adjoint()).norm(), 0.0);
    EXPECT_GT(min_eigenvalue<2>(m), 0.0);
  }
}

TEST(Flow, NonPositiveMetricRaisesStateError) {
  Case<1> c(config({0}), 8);
  FlowParams p;
  MetricState<1> st = initial_state(c.bg, p);
  for (auto& m : st.h.values()) m *= -1.0;
  MetricStepper<1> stepper(c.higgs, c.bg, p);
  EXPECT_THROW(stepper.step(st), StateError);
}

TEST(Flow, ReconstructPairIsPositiveSquareRoot) {
  Case<2> c(config({1, -1}), 8);
  Mat<2> d = Mat<2>::Zero();
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  const MatrixField<2> h(c.bg.grid, FormDegree::zero, c.bg.degrees, d);
  const GaugeState<2> gs = reconstruct_pair(h);
  for (int s = 0; s < h.size(); ++s) {
    EXPECT_NEAR(std::abs(gs.g[s](0, 0) - 2.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(gs.g[s](1, 1) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(gs.ginv[s](0, 0) - 0.5), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(gs.g[s](0, 1)), 0.0, 1e-14);
  }
}

TEST(Flow, ReconstructPairSquaresBack) {
  Case<3> c(config({1, 0, -1}), 8);
  const MatrixField<3> h = random_metric(c.bg, 21);
  const GaugeState<3> gs = reconstruct_pair(h);
  for (int s = 0; s < h.size(); ++s) {
    EXPECT_LT((gs.g[s] * gs.g[s] - h[s]).norm(), 1e-12);
    EXPECT_LT((gs.g[s] - gs.g[s].adjoint()).norm(), 1e-13);
    EXPECT_LT((gs.g[s] * gs.ginv[s] - Mat<3>::Identity()).norm(), 1e-12);
  }
}

TEST(Flow, FrameSpectraAgree) {
  Case<2> c(config({1, -1}, {block(0, 1, BlockKind::section, 0.7)}), 16);
  const Evaluation<2> e = evaluate(random_metric(c.bg, 5), c.higgs, c.bg);
  EXPECT_LT(frame_spectrum_defect(e), 1e-9);
}

TEST(Flow, FrameIdentityOperatorLevel) {
  Case<2> c(config({1, -1}, {block(0, 1, BlockKind::section, 0.7)}), 16);
  const Evaluation<2> e = evaluate(random_metric(c.bg, 6), c.higgs, c.bg);
  EXPECT_LT(frame_identity_defect(e, 77), 1e-9);
}

TEST(Flow, EinsteinLineIsStationaryInBothFlows) {
  Case<1> c(config({2}), 16);
  FlowParams p;
  p.lambda = einstein_constant(c.cfg);
  const MetricState<1> st = initial_state(c.bg, p);
  const MatrixField<1> rhs = metric_flow_rhs(st.h, c.higgs, c.bg, p.lambda);
  for (const auto& m : rhs.values()) EXPECT_LT(std::abs(m(0, 0)), 1e-10);

  const PairState<1> ps = pair_from_metric(st, c.higgs, c.bg);
  const PairState<1> d = pair_flow_rhs(ps, c.bg);
  for (int s = 0; s < d.ax.size(); ++s) {
    EXPECT_LT(d.ax[s].norm(), 1e-10);
    EXPECT_LT(d.ay[s].norm(), 1e-10);
    EXPECT_LT(d.phi[s].norm(), 1e-10);
  }
}

TEST(Flow, HiggsStaticWhenCommutingWithCurvature) {
  Case<2> c(config({1, -1}, {block(0, 0, BlockKind::constant, 0.4), block(1, 1, BlockKind::constant, -0.9)}), 16);
  const PairState<2> ps = pair_from_metric(initial_state(c.bg), c.higgs, c.bg);
  const PairState<2> d = pair_flow_rhs(ps, c.bg);
  for (int s = 0; s < d.phi.size(); ++s) EXPECT_LT(d.phi[s].norm(), 1e-12);
}

TEST(Flow, PairFlowTracksMetricFlow) {
  // Same orbit integrated two ways; gauge-invariant scalars should agree to
  // the discretization level.
  Case<2> c(config({1, -1}, {block(0, 1, BlockKind::section, 0.8)}), 16);
  FlowParams p;
  p.dt_safety = 0.5;
  MetricState<2> st{0.0, smooth_metric(c.bg, 0.3)};
  PairState<2> ps = pair_from_metric(st, c.higgs, c.bg);
  MetricStepper<2> stepper(c.higgs, c.bg, p);
  while (st.t < 0.05 - 1e-12) {
    stepper.step(st);
    ps = step_pair_flow_direct(ps, c.bg, p);
  }
  const PairScalars a = pair_scalars(evaluate(st, c.higgs, c.bg));
  const PairScalars b = pair_scalars(ps, c.bg);
  EXPECT_NEAR(a.ymh, b.ymh, 0.02 * a.ymh);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.lambda[i], b.lambda[i], 0.02 * std::abs(a.lambda[0]));
}

TEST(Flow, NilpotentHiggsMatchesOde) {
  // Constant nilpotent phi on the trivial rank-2 bundle: h = diag(r, 1/r)
  // with r^2 = 1/(1+8t), and sup |theta| = r^2/pi.
  Case<2> c(config({0, 0}, {block(0, 1, BlockKind::constant, 1.0)}), 8);
  FlowParams p;
  p.dt_safety = 0.5;
  p.t_max = 0.25;
  p.snapshot_interval = 0.05;
  p.stop_tolerance = 1e-12;
  const RunResult<2> r = run_flow(c.bg, c.higgs, p, {{1, 0}});
  ASSERT_EQ(r.status, "max-time");
  for (const auto& row : r.diagnostics.rows) {
    const double rr = 1.0 / (1.0 + 8.0 * row.t);
    EXPECT_NEAR(row.sup_theta, rr / kPi, 1e-8) << "t = " << row.t;
    EXPECT_NEAR(row.sup_phi_sq, 2.0 * rr, 1e-8) << "t = " << row.t;
  }
  const auto& last = r.diagnostics.rows.back();
  EXPECT_NEAR(last.t, 0.25, 1e-12);
  EXPECT_NEAR(r.final_state.h[0](0, 0).real(), 1.0 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(r.final_state.h[0](1, 1).real(), std::sqrt(3.0), 1e-6);
}

TEST(Flow, YmhNonIncreasing) {
  Case<3> c(config({1, 0, -1}, {block(0, 1, BlockKind::section, 0.6), block(1, 2, BlockKind::section, 0.6)}), 16);
  FlowParams p;
  p.dt_safety = 1.0;
  p.t_max = 0.3;
  p.snapshot_interval = 0.02;
  const RunResult<3> r = run_flow(c.bg, c.higgs, p, {{2, 0}});
  for (std::size_t k = 1; k < r.diagnostics.rows.size(); ++k)
    EXPECT_LE(r.diagnostics.rows[k].ymh, r.diagnostics.rows[k - 1].ymh * (1 + 1e-12) + 1e-12) << "row " << k;
}

TEST(Flow, TrivialRunConvergesImmediately) {
  Case<1> c(config({0}), 8);
  FlowParams p;
  const RunResult<1> r = run_flow(c.bg, c.higgs, p, {});
  EXPECT_EQ(r.status, "converged");
  EXPECT_EQ(r.steps, 0);
  ASSERT_EQ(r.diagnostics.rows.size(), 1u);
  EXPECT_EQ(r.diagnostics.rows[0].i_func, 0.0);
}

namespace {

double trace_residual_at(int n, double t_end) {
  Case<2> c(config({1, -1}), n);
  FlowParams p;
  p.dt_safety = 1.0;
  p.t_max = t_end;
  p.snapshot_interval = t_end;
  p.initial_conformal = 0.05;
  const RunResult<2> r = run_flow(c.bg, c.higgs, p, {});
  const auto& last = r.diagnostics.rows.back();
  EXPECT_NEAR(last.t, t_end, 1e-12);
  return last.trace_heat_res / last.trace_scale;
}

}  // namespace

TEST(Flow, TraceResidualRefines) {
  const double t_end = 1.0 / 128.0;  // a step boundary for n = 16 and 32
  const double coarse = trace_residual_at(16, t_end);
  const double fine = trace_residual_at(32, t_end);
  EXPECT_GT(coarse / fine, 3.0);
}

TEST(Flow, TraceResidualUndefinedAtFirstRow) {
  Case<2> c(config({1, -1}), 16);
  FlowParams p;
  p.t_max = 0.01;
  p.snapshot_interval = 0.005;
  p.initial_conformal = 0.05;
  const RunResult<2> r = run_flow(c.bg, c.higgs, p, {});
  EXPECT_TRUE(std::isnan(r.diagnostics.rows[0].trace_heat_res));
  for (std::size_t k = 1; k < r.diagnostics.rows.size(); ++k)
    EXPECT_TRUE(std::isfinite(r.diagnostics.rows[k].trace_heat_res));
}

TEST(Flow, ParamsValidate) {
  FlowParams p;
  p.dt_safety = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.dt_safety = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p.dt_safety = 1.0;
  p.snapshot_interval = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}
