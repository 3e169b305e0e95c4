#pragma once

// Donaldson heat flow for h = H0^{-1} H by classical RK4, the run loop with
// diagnostics, and a direct (A, phi) integrator used only as a cross-check.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ymh/hnfilt.hpp"

namespace ymh {

enum class StopMode { absolute, relative };

struct FlowParams {
  double dt_safety = 0.2;
  double t_max = 1.0;
  double stop_tolerance = 1e-4;
  StopMode stop_mode = StopMode::relative;
  double snapshot_interval = 0.05;
  double lambda = 0.0;
  /// h(0) = exp(a sin(2 pi x) cos(2 pi y)) Id instead of Id.
  double initial_conformal = 0.0;

  double dt(const TorusGrid& g) const { return dt_safety * g.cell_area(); }

  void validate() const {
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw ConfigError("flow: dt_safety must lie in (0, 1]");
    if (!(t_max >= 0.0)) throw ConfigError("flow: t_max must be >= 0");
    if (!(stop_tolerance > 0.0)) throw ConfigError("flow: stop_tolerance must be > 0");
    if (!(snapshot_interval > 0.0)) throw ConfigError("flow: snapshot_interval must be > 0");
  }
};

template <int R>
MetricState<R> initial_state(const Background<R>& bg, const FlowParams& p) {
  MetricState<R> st = initial_state(bg);
  if (p.initial_conformal != 0.0) {
    const TorusGrid& g = bg.grid;
    for (int s = 0; s < g.sites(); ++s) {
      const double x = g.x_of(s) * g.spacing(), y = g.y_of(s) * g.spacing();
      st.h[s] *= std::exp(p.initial_conformal * std::sin(kTwoPi * x) * std::cos(kTwoPi * y));
    }
  }
  return st;
}

/// dh/dt = -2 h (K - lambda) with K the H-self-adjoint total curvature, in
/// field-operation form (reference for the fused kernel below).
template <int R>
MatrixField<R> metric_flow_rhs_reference(const MatrixField<R>& h, const HiggsField<R>& higgs,
                                         const Background<R>& bg, double lambda) {
  const MatrixField<R> hinv = metric_inverse(h);
  MatrixField<R> k = total_curvature_operator(h, hinv, higgs.phi, bg);
  for (int s = 0; s < k.size(); ++s) k[s] = -2.0 * h[s] * (k[s] - lambda * Mat<R>::Identity());
  return k;
}

template <int R>
struct FlowWorkspace {
  std::vector<Mat<R>> hinv;
  std::vector<Mat<R>> a;  // h^{-1} del h
  std::vector<std::array<int, 4>> nb;  // x+1, x-1, y+1, y-1
  // del f = sum_k w[k] .* f[nb[k]]; dbar flips the sign of the y weights
  std::vector<std::array<Mat<R>, 4>> w;
};

/// Same right-hand side as metric_flow_rhs_reference in two fused passes.
template <int R>
void metric_flow_rhs(const MatrixField<R>& h, const HiggsField<R>& higgs, const Background<R>& bg, double lambda,
                     FlowWorkspace<R>& ws, MatrixField<R>& out) {
  const TorusGrid& g = h.grid();
  const SectorLinks<R>& l = bg.links;
  const int N = g.sites();
  if (static_cast<int>(ws.nb.size()) != N) {
    const double c = 0.25 / g.spacing();
    ws.hinv.resize(N);
    ws.a.resize(N);
    ws.nb.resize(N);
    ws.w.resize(N);
    for (int s = 0; s < N; ++s) {
      ws.nb[s] = {g.shift(s, 1, 0), g.shift(s, -1, 0), g.shift(s, 0, 1), g.shift(s, 0, -1)};
      ws.w[s] = {Mat<R>(c * l.x(s)), Mat<R>(-c * l.x(ws.nb[s][1]).conjugate()), Mat<R>(-kI * c * l.y(s)),
                 Mat<R>(kI * c * l.y(ws.nb[s][3]).conjugate())};
    }
  }
  parallel_for(N, [&](int s) {
    const auto& w = ws.w[s];
    const auto& nb = ws.nb[s];
    // closed-form inverse; positivity is checked once per step
    ws.hinv[s] = h[s].inverse();
    const Mat<R> del_h = w[0].cwiseProduct(h[nb[0]]) + w[1].cwiseProduct(h[nb[1]]) + w[2].cwiseProduct(h[nb[2]]) +
                         w[3].cwiseProduct(h[nb[3]]);
    ws.a[s].noalias() = ws.hinv[s] * del_h;
  });
  parallel_for(N, [&](int s) {
    const auto& w = ws.w[s];
    const auto& nb = ws.nb[s];
    const Mat<R> dbar_a = w[0].cwiseProduct(ws.a[nb[0]]) + w[1].cwiseProduct(ws.a[nb[1]]) -
                          w[2].cwiseProduct(ws.a[nb[2]]) - w[3].cwiseProduct(ws.a[nb[3]]);
    const Mat<R>& p = higgs.phi[s];
    const Mat<R> adj = ws.hinv[s] * (p.adjoint() * h[s]);
    const Mat<R> f = bg.curvature[s] + kDzbarWedgeDz * (dbar_a - (p * adj - adj * p));
    const Mat<R> hk = kI * (h[s] * f);
    out[s] = (2.0 * lambda) * h[s] - (hk + hk.adjoint());
  });
}

template <int R>
MatrixField<R> metric_flow_rhs(const MatrixField<R>& h, const HiggsField<R>& higgs, const Background<R>& bg,
                               double lambda) {
  FlowWorkspace<R> ws;
  MatrixField<R> out(h.grid(), FormDegree::zero, h.sector());
  metric_flow_rhs(h, higgs, bg, lambda, ws, out);
  return out;
}

template <int R>
double min_site_eigenvalue(const MatrixField<R>& h) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& x : h.values()) m = std::min(m, min_eigenvalue<R>(x));
  return m;
}

/// One RK4 step of size dt, then h <- (h + h^dagger)/2 and a positivity check.
template <int R>
class MetricStepper {
 public:
  MetricStepper(const HiggsField<R>& higgs, const Background<R>& bg, const FlowParams& p)
      : higgs_(higgs), bg_(bg), p_(p), dt_(p.dt(bg.grid)), k1_(blank()), k2_(blank()), k3_(blank()), k4_(blank()),
        tmp_(blank()) {}

  double dt() const { return dt_; }

  void step(MetricState<R>& st) {
    const int N = st.h.size();
    const double dt = dt_;
    auto stage = [&](const MatrixField<R>& k, double c) {
      for (int s = 0; s < N; ++s) tmp_[s] = st.h[s] + c * k[s];
    };
    try {
      metric_flow_rhs(st.h, higgs_, bg_, p_.lambda, ws_, k1_);
      stage(k1_, 0.5 * dt);
      metric_flow_rhs(tmp_, higgs_, bg_, p_.lambda, ws_, k2_);
      stage(k2_, 0.5 * dt);
      metric_flow_rhs(tmp_, higgs_, bg_, p_.lambda, ws_, k3_);
      stage(k3_, dt);
      metric_flow_rhs(tmp_, higgs_, bg_, p_.lambda, ws_, k4_);
      for (int s = 0; s < N; ++s) {
        tmp_[s] = st.h[s] + (dt / 6.0) * (k1_[s] + 2.0 * k2_[s] + 2.0 * k3_[s] + k4_[s]);
        tmp_[s] = hermitian_part<R>(tmp_[s]);
        if (Eigen::LLT<Mat<R>>(tmp_[s]).info() != Eigen::Success)
          throw StateError("metric lost positivity at site " + std::to_string(s));
      }
    } catch (const StateError& e) {
      throw StateError(std::string(e.what()) + " (t = " + std::to_string(st.t) + ", dt = " + std::to_string(dt) +
                       "; reduce dt_safety)");
    }
    std::swap(st.h, tmp_);
    st.t += dt;
  }

 private:
  MatrixField<R> blank() const { return MatrixField<R>(bg_.grid, FormDegree::zero, bg_.degrees); }

  const HiggsField<R>& higgs_;
  const Background<R>& bg_;
  FlowParams p_;
  double dt_;
  FlowWorkspace<R> ws_;
  MatrixField<R> k1_, k2_, k3_, k4_, tmp_;
};

template <int R>
MetricState<R> step_metric_flow(const MetricState<R>& st, const HiggsField<R>& higgs, const Background<R>& bg,
                                const FlowParams& p) {
  MetricStepper<R> stepper(higgs, bg, p);
  MetricState<R> next = st;
  stepper.step(next);
  return next;
}

struct DiagnosticsRow {
  double t = 0.0;
  double ymh = 0.0;
  double i_func = 0.0;
  double sup_theta = 0.0;
  double sup_phi_sq = 0.0;
  double min_eig_h = 0.0;
  double trace_heat_res = std::numeric_limits<double>::quiet_NaN();
  double trace_scale = 0.0;  // ||tr K||_{L^2} at the residual's centre
  double acd_p = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> hym;
  std::vector<double> lambda;
  double spatial_dev = 0.0;
};

struct Diagnostics {
  std::vector<std::pair<double, double>> hym_pairs;
  std::vector<DiagnosticsRow> rows;
};

/// Target filtration for the approximate-critical distance.
struct CriticalTarget {
  FiltrationSpec filtration;
  double p = 2.0;
};

template <int R>
struct RunResult {
  Diagnostics diagnostics;
  MetricState<R> final_state;
  std::string status;
  long steps = 0;
  double dt = 0.0;
  TypeEstimate estimate;
};

template <int R>
using SnapshotObserver =
    std::function<void(const MetricState<R>&, const Evaluation<R>&, const DiagnosticsRow&)>;

template <int R>
DiagnosticsRow diagnostics_row(const MetricState<R>& st, const Evaluation<R>& e,
                               const std::vector<std::pair<double, double>>& hym_pairs,
                               const std::optional<CriticalTarget>& target) {
  DiagnosticsRow row;
  row.t = st.t;
  const MeanCurvature<R> s = mean_curvature(e, Frame::pair);
  row.ymh = ymh_functional(e);
  row.i_func = i_functional(e);
  row.sup_theta = sup_theta(s);
  row.sup_phi_sq = sup_phi_sq(e);
  row.min_eig_h = min_site_eigenvalue(st.h);
  if (target) {
    const auto pis = filtration_projectors(target->filtration, e);
    row.acd_p = approx_critical_distance(e, psi_hn_projection(pis, target->filtration.slopes()), target->p);
  }
  for (auto [alpha, n] : hym_pairs) row.hym.push_back(hym_alpha_N(s, alpha, n));
  const TypeEstimate est = estimate_limit_type(s);
  row.lambda = est.lambda;
  row.spatial_dev = est.spatial_dev;
  return row;
}

/// Integrates until t_max or I(t) below the stop threshold, recording a row
/// at t = 0 and every snapshot_interval. The trace heat residual of a row is
/// centred one step before the row time.
template <int R>
RunResult<R> run_flow(const Background<R>& bg, const HiggsField<R>& higgs, const FlowParams& p,
                      const std::vector<std::pair<double, double>>& hym_pairs,
                      const std::optional<CriticalTarget>& target = std::nullopt,
                      const SnapshotObserver<R>& observer = {}) {
  p.validate();
  struct {
    Diagnostics diagnostics;
    std::string status;
    double dt;
  } res{{hym_pairs, {}}, "max-time", p.dt(bg.grid)};
  const long every = std::max(1L, std::lround(p.snapshot_interval / res.dt));
  const long max_steps = static_cast<long>(std::ceil(p.t_max / res.dt - 1e-9));

  MetricState<R> st = initial_state(bg, p);
  MetricStepper<R> stepper(higgs, bg, p);
  std::vector<MatrixField<R>> history;  // h_{k-2}, h_{k-1}
  double threshold = p.stop_tolerance;

  auto record = [&](long k) {
    const Evaluation<R> e = evaluate(st, higgs, bg);
    DiagnosticsRow row = diagnostics_row(st, e, hym_pairs, target);
    if (history.size() == 2) {
      std::vector<RealField> q;
      for (const auto& h : history)
        q.push_back(trace_density(evaluate(h, higgs, bg)));
      q.push_back(trace_density(e));
      row.trace_heat_res = trace_heat_residual(q, res.dt);
      row.trace_scale = l2_norm(q[1]);
    }
    if (k == 0 && p.stop_mode == StopMode::relative)
      threshold = p.stop_tolerance * std::max(row.i_func, 1e-12);
    res.diagnostics.rows.push_back(row);
    if (observer) observer(st, e, row);
    return row.i_func < threshold;
  };

  long k = 0;
  bool done = record(0);
  if (done) res.status = "converged";
  while (!done && k < max_steps) {
    history.push_back(st.h);
    if (history.size() > 2) history.erase(history.begin());
    stepper.step(st);
    ++k;
    if (k % every == 0 || k == max_steps) {
      if (record(k)) {
        res.status = "converged";
        done = true;
      }
    }
  }
  TypeEstimate est = estimate_limit_type(mean_curvature(evaluate(st, higgs, bg), Frame::pair));
  return RunResult<R>{std::move(res.diagnostics), std::move(st), res.status, k, res.dt, std::move(est)};
}

// ---------------------------------------------------------------------------
// Direct pair flow.

/// Unitary connection A = A0 + a_x dx + a_y dy (a anti-Hermitian) and Phi.
template <int R>
struct PairState {
  double t = 0.0;
  MatrixField<R> ax;
  MatrixField<R> ay;
  MatrixField<R> phi;
};

/// Pair obtained from (A0, phi0) by the complex gauge transformation g = h^{1/2}.
template <int R>
PairState<R> pair_from_metric(const MetricState<R>& st, const HiggsField<R>& higgs, const Background<R>& bg) {
  const GaugeState<R> gs = reconstruct_pair(st.h);
  MatrixField<R> alpha = covariant_dbar(gs.g, bg.links);  // A^{0,1} = -(dbar g) g^{-1}
  PairState<R> out{st.t, alpha.with_degree(FormDegree::zero), alpha.with_degree(FormDegree::zero),
                   to_pair_frame(higgs.phi, gs).with_degree(FormDegree::zero)};
  for (int s = 0; s < alpha.size(); ++s) {
    const Mat<R> a = -alpha[s] * gs.ginv[s];
    out.ax[s] = a - a.adjoint();
    out.ay[s] = -kI * (a + a.adjoint());
  }
  return out;
}

/// omega coefficient of F_A + [phi, phi*] and K = sqrt(-1) Lambda of it.
template <int R>
std::pair<MatrixField<R>, MatrixField<R>> pair_curvature(const PairState<R>& ps, const Background<R>& bg) {
  MatrixField<R> f = covariant_dx(ps.ay, bg.links);
  f -= covariant_dy(ps.ax, bg.links);
  MatrixField<R> k = f;
  for (int s = 0; s < f.size(); ++s) {
    const Mat<R> fxy = bg.curvature[s] + f[s] + ps.ax[s] * ps.ay[s] - ps.ay[s] * ps.ax[s];
    const Mat<R>& p = ps.phi[s];
    k[s] = kI * fxy + 2.0 * (p * p.adjoint() - p.adjoint() * p);
    f[s] = -kI * k[s];
  }
  return {f, k};
}

template <int R>
PairState<R> pair_flow_rhs(const PairState<R>& ps, const Background<R>& bg) {
  auto [f, k] = pair_curvature(ps, bg);
  PairState<R> d{0.0, covariant_dy(f, bg.links), covariant_dx(f, bg.links), ps.phi};
  for (int s = 0; s < f.size(); ++s) {
    d.ax[s] = -(d.ax[s] + ps.ay[s] * f[s] - f[s] * ps.ay[s]);
    d.ay[s] = d.ay[s] + ps.ax[s] * f[s] - f[s] * ps.ax[s];
    d.phi[s] = -(k[s] * ps.phi[s] - ps.phi[s] * k[s]);
  }
  return d;
}

/// One RK4 step of the discretized pair flow; dt is limited like the metric flow.
template <int R>
PairState<R> step_pair_flow_direct(const PairState<R>& ps, const Background<R>& bg, const FlowParams& p) {
  const double dt = p.dt(bg.grid);
  if (!(p.dt_safety > 0.0 && p.dt_safety <= 1.0)) throw PreconditionError("pair flow: dt_safety outside (0, 1]");
  auto axpy = [](const PairState<R>& a, const PairState<R>& b, double c) {
    PairState<R> out = a;
    for (int s = 0; s < a.ax.size(); ++s) {
      out.ax[s] += c * b.ax[s];
      out.ay[s] += c * b.ay[s];
      out.phi[s] += c * b.phi[s];
    }
    return out;
  };
  const PairState<R> k1 = pair_flow_rhs(ps, bg);
  const PairState<R> k2 = pair_flow_rhs(axpy(ps, k1, 0.5 * dt), bg);
  const PairState<R> k3 = pair_flow_rhs(axpy(ps, k2, 0.5 * dt), bg);
  const PairState<R> k4 = pair_flow_rhs(axpy(ps, k3, dt), bg);
  PairState<R> out = ps;
  for (int s = 0; s < ps.ax.size(); ++s) {
    out.ax[s] += (dt / 6.0) * (k1.ax[s] + 2.0 * k2.ax[s] + 2.0 * k3.ax[s] + k4.ax[s]);
    out.ay[s] += (dt / 6.0) * (k1.ay[s] + 2.0 * k2.ay[s] + 2.0 * k3.ay[s] + k4.ay[s]);
    out.phi[s] += (dt / 6.0) * (k1.phi[s] + 2.0 * k2.phi[s] + 2.0 * k3.phi[s] + k4.phi[s]);
    out.ax[s] = 0.5 * (out.ax[s] - out.ax[s].adjoint());
    out.ay[s] = 0.5 * (out.ay[s] - out.ay[s].adjoint());
    if (!out.ax[s].allFinite() || !out.ay[s].allFinite() || !out.phi[s].allFinite())
      throw StateError("pair flow: non-finite state (CFL violation?) at site " + std::to_string(s));
  }
  out.t = ps.t + dt;
  return out;
}

/// Gauge-invariant scalars of a pair: YMH and the spatial-mean spectrum of S.
struct PairScalars {
  double ymh = 0.0;
  double sup_theta = 0.0;
  std::vector<double> lambda;
};

template <int R>
PairScalars pair_scalars(const PairState<R>& ps, const Background<R>& bg) {
  const MatrixField<R> k = pair_curvature(ps, bg).second;
  MeanCurvature<R> s{k, Frame::pair};
  double sum = 0.0;
  for (auto& m : s.s.values()) {
    m = hermitian_part<R>(m) / kTwoPi;
    sum += kTwoPi * kTwoPi * m.squaredNorm();
  }
  return {sum * bg.grid.cell_area(), sup_theta(s), estimate_limit_type(s).lambda};
}

template <int R>
PairScalars pair_scalars(const Evaluation<R>& e) {
  const MeanCurvature<R> s = mean_curvature(e, Frame::pair);
  return {ymh_functional(e), sup_theta(s), estimate_limit_type(s).lambda};
}

// ---------------------------------------------------------------------------
// Frame identities.

namespace detail {

template <int R>
SectionField<R> section_dbar(const SectionField<R>& v, const SectorLinks<R>& l) {
  SectionField<R> x = section_difference(v, l, 0), y = section_difference(v, l, 1);
  for (int s = 0; s < x.size(); ++s) x[s] = 0.5 * (x[s] + kI * y[s]);
  return x;
}

template <int R>
SectionField<R> section_del(const SectionField<R>& v, const SectorLinks<R>& l) {
  SectionField<R> x = section_difference(v, l, 0), y = section_difference(v, l, 1);
  for (int s = 0; s < x.size(); ++s) x[s] = 0.5 * (x[s] - kI * y[s]);
  return x;
}

template <int R>
SectionField<R> apply(const MatrixField<R>& m, SectionField<R> v) {
  for (int s = 0; s < v.size(); ++s) v[s] = m[s] * v[s];
  return v;
}

}  // namespace detail

/// Max relative defect of F_A = g F_H g^{-1} as operators on a seeded random
/// section, with F_H = dbar o del_H + del_H o dbar, del_H = h^{-1} del h, and
/// F_A built from dbar_A = g dbar g^{-1}, del_A = g^{-1} del g.
template <int R>
double frame_identity_defect(const Evaluation<R>& e, std::uint64_t seed) {
  using namespace detail;
  const SectorLinks<R>& l = e.bg->links;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SectionField<R> v(e.h.grid(), FormDegree::zero, e.h.sector());
  for (auto& x : v.values())
    for (int i = 0; i < R; ++i) x(i) = cd(nd(rng), nd(rng));

  const auto& g = e.gauge.g;
  const auto& gi = e.gauge.ginv;
  auto dbar_a = [&](const SectionField<R>& w) { return apply(g, section_dbar(apply(gi, w), l)); };
  auto del_a = [&](const SectionField<R>& w) { return apply(gi, section_del(apply(g, w), l)); };
  auto del_h = [&](const SectionField<R>& w) { return apply(e.hinv, section_del(apply(e.h, w), l)); };

  SectionField<R> lhs = dbar_a(del_a(v));
  lhs += del_a(dbar_a(v));
  const SectionField<R> w = apply(gi, v);
  SectionField<R> fh = section_dbar(del_h(w), l);
  fh += del_h(section_dbar(w, l));
  const SectionField<R> rhs = apply(g, fh);

  double worst = 0.0, scale = 0.0;
  for (int s = 0; s < v.size(); ++s) {
    worst = std::max(worst, (lhs[s] - rhs[s]).norm());
    scale = std::max(scale, rhs[s].norm());
  }
  return worst / std::max(scale, 1e-300);
}

/// Max pointwise difference between the sorted spectra of the metric-frame
/// and pair-frame mean curvature, relative to the largest eigenvalue.
template <int R>
double frame_spectrum_defect(const Evaluation<R>& e) {
  const auto wp = site_eigenvalues(mean_curvature(e, Frame::pair));
  const auto wm = site_eigenvalues(mean_curvature(e, Frame::metric));
  double worst = 0.0, scale = 1e-300;
  for (std::size_t i = 0; i < wp.size(); ++i) {
    worst = std::max(worst, (wp[i] - wm[i]).cwiseAbs().maxCoeff());
    scale = std::max(scale, wp[i].cwiseAbs().maxCoeff());
  }
  return worst / std::max(scale, 1.0);
}

}  // namespace ymh
