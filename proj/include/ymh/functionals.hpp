#pragma once

// Scalar and field quantities tracked along the flow: mean curvature in both
// frames, YMH, HYM_{alpha,N}, I(t), energy density, the trace heat residual,
// the projection degree formula, weak holomorphy residuals, Psi^{HN} and the
// approximate-critical distance.
//
// Pair-frame norms are Frobenius norms with |dz|^2 = |dzbar|^2 = 2.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ymh/gauge.hpp"

namespace ymh {

enum class Frame { metric, pair };

/// S = sqrt(-1) theta = (1/2pi) sqrt(-1) Lambda(F + [phi, phi*]).
template <int R>
struct MeanCurvature {
  MatrixField<R> s;
  Frame frame = Frame::pair;
};

/// Everything derived from (h, Phi) that the functionals share.
template <int R>
struct Evaluation {
  const Background<R>* bg = nullptr;
  MatrixField<R> h;
  MatrixField<R> hinv;
  GaugeState<R> gauge;
  MatrixField<R> k_metric;  // sqrt(-1) Lambda(F_H + [phi, phi^{*H}])
  MatrixField<R> s_pair;    // g k g^{-1} / 2pi, Hermitian
  MatrixField<R> phi_pair;  // g Phi g^{-1}
};

template <int R>
Evaluation<R> evaluate(const MatrixField<R>& h, const HiggsField<R>& higgs, const Background<R>& bg) {
  Evaluation<R> e{&bg, h, metric_inverse(h), reconstruct_pair(h), MatrixField<R>(h), MatrixField<R>(h),
                  MatrixField<R>(h)};
  e.k_metric = total_curvature_operator(e.h, e.hinv, higgs.phi, bg);
  e.s_pair = to_pair_frame(e.k_metric, e.gauge);
  for (auto& m : e.s_pair.values()) m = hermitian_part<R>(m) / kTwoPi;
  e.phi_pair = to_pair_frame(higgs.phi, e.gauge);
  return e;
}

template <int R>
Evaluation<R> evaluate(const MetricState<R>& st, const HiggsField<R>& higgs, const Background<R>& bg) {
  return evaluate(st.h, higgs, bg);
}

template <int R>
MeanCurvature<R> mean_curvature(const Evaluation<R>& e, Frame frame) {
  if (frame == Frame::pair) return {e.s_pair, Frame::pair};
  MatrixField<R> s = e.k_metric;
  s *= 1.0 / kTwoPi;
  return {std::move(s), Frame::metric};
}

template <int R>
MeanCurvature<R> mean_curvature(const MetricState<R>& st, const HiggsField<R>& higgs,
                                const Background<R>& bg, Frame frame) {
  return mean_curvature(evaluate(st, higgs, bg), frame);
}

namespace detail {

template <int R>
double l2_sq(const MatrixField<R>& f) {
  double sum = 0.0;
  for (const auto& m : f.values()) sum += m.squaredNorm();
  return sum * f.grid().cell_area();
}

}  // namespace detail

/// Pointwise |F + [phi, phi*]|^2_{H0} + 2 |del_A phi|^2 in the pair frame. The
/// second term is a (2,0)-form and vanishes identically on a curve.
template <int R>
RealField energy_density(const Evaluation<R>& e) {
  RealField out(e.h.grid(), FormDegree::zero, {});
  for (int s = 0; s < out.size(); ++s) out[s] = kTwoPi * kTwoPi * e.s_pair[s].squaredNorm();
  return out;
}

template <int R>
double ymh_functional(const Evaluation<R>& e) {
  return integrate(energy_density(e));
}

template <int R>
double ymh_functional(const MetricState<R>& st, const HiggsField<R>& higgs, const Background<R>& bg) {
  return ymh_functional(evaluate(st, higgs, bg));
}

/// Descending eigenvalues of S at every site.
template <int R>
std::vector<Eigen::Matrix<double, R, 1>> site_eigenvalues(const MeanCurvature<R>& s) {
  std::vector<Eigen::Matrix<double, R, 1>> out(s.s.size());
  for (int i = 0; i < s.s.size(); ++i) {
    // metric-frame S is only H-self-adjoint; its eigenvalues are still real
    const Mat<R> m = s.frame == Frame::pair ? hermitian_part<R>(s.s[i]) : s.s[i];
    if (s.frame == Frame::pair) {
      out[i] = eigenvalues_desc<R>(m);
    } else {
      Eigen::ComplexEigenSolver<Mat<R>> es(m, false);
      Eigen::Matrix<double, R, 1> w = es.eigenvalues().real();
      std::sort(w.data(), w.data() + R, std::greater<>());
      out[i] = w;
    }
  }
  return out;
}

/// int sum_j |s_j + N|^alpha over eigenvalues s_j of S.
template <int R>
double hym_alpha_N(const MeanCurvature<R>& s, double alpha, double N) {
  if (!(alpha >= 1.0)) throw DomainError("hym_alpha_N: alpha must be >= 1");
  double sum = 0.0;
  for (const auto& w : site_eigenvalues(s))
    for (int j = 0; j < R; ++j) sum += std::pow(std::abs(w(j) + N), alpha);
  return sum * s.s.grid().cell_area();
}

/// max over sites of the spectral norm of S.
template <int R>
double sup_theta(const MeanCurvature<R>& s) {
  double m = 0.0;
  for (const auto& w : site_eigenvalues(s)) m = std::max(m, w.cwiseAbs().maxCoeff());
  return m;
}

/// sup |phi|^2_{H0} in the pair frame.
template <int R>
double sup_phi_sq(const Evaluation<R>& e) {
  double m = 0.0;
  for (const auto& p : e.phi_pair.values()) m = std::max(m, kDzNormSq * p.squaredNorm());
  return m;
}

/// int |D_A theta|^2 + 2 |[theta, phi]|^2 with |D theta|^2 = 2|del theta|^2 + 2|dbar theta|^2.
template <int R>
double i_functional(const Evaluation<R>& e) {
  const MatrixField<R> db = pair_dbar(e.s_pair, e.gauge, e.bg->links);
  const MatrixField<R> dl = pair_del(e.s_pair, e.gauge, e.bg->links);
  double sum = 0.0;
  for (int s = 0; s < e.h.size(); ++s) {
    const Mat<R>& th = e.s_pair[s];
    const Mat<R>& ph = e.phi_pair[s];
    sum += kDzNormSq * (db[s].squaredNorm() + dl[s].squaredNorm()) +
           2.0 * kDzNormSq * (th * ph - ph * th).squaredNorm();
  }
  return sum * e.h.grid().cell_area();
}

template <int R>
double i_functional(const MetricState<R>& st, const HiggsField<R>& higgs, const Background<R>& bg) {
  return i_functional(evaluate(st, higgs, bg));
}

/// Pointwise tr sqrt(-1) Lambda(F_H + [phi, phi*]) (real).
template <int R>
RealField trace_density(const Evaluation<R>& e) {
  RealField out(e.h.grid(), FormDegree::zero, {});
  for (int s = 0; s < out.size(); ++s) out[s] = e.k_metric[s].trace().real();
  return out;
}

/// 4 dbar del on the trivial sector: the Laplacian the discrete curvature
/// operator actually produces (central differences composed twice).
inline RealField composite_laplacian(const RealField& q) {
  ScalarField c(q.grid(), FormDegree::zero, {0});
  for (int s = 0; s < q.size(); ++s) c[s] = q[s];
  const LinkField triv = LinkField::landau(q.grid(), 0);
  const ScalarField xx = covariant_dx(covariant_dx(c, triv), triv);
  const ScalarField yy = covariant_dy(covariant_dy(c, triv), triv);
  RealField out(q.grid(), FormDegree::zero, {});
  for (int s = 0; s < q.size(); ++s) out[s] = (xx[s] + yy[s]).real();
  return out;
}

inline double l2_norm(const RealField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v * v;
  return std::sqrt(sum * f.grid().cell_area());
}

/// || (q_{k+1} - q_{k-1}) / (2 dt) - Lap q_k ||_{L^2} from three consecutive trace densities.
inline double trace_heat_residual(const std::vector<RealField>& q, double dt) {
  if (q.size() < 3) throw PreconditionError("trace_heat_residual: need 3 consecutive states");
  if (!(dt > 0.0)) throw PreconditionError("trace_heat_residual: dt must be positive");
  const std::size_t k = q.size() - 2;
  const RealField lap = composite_laplacian(q[k]);
  RealField r(q[k].grid(), FormDegree::zero, {});
  for (int s = 0; s < r.size(); ++s) r[s] = (q[k + 1][s] - q[k - 1][s]) / (2.0 * dt) - lap[s];
  return l2_norm(r);
}

template <int R>
void require_projector(const MatrixField<R>& pi, double tol, const char* op) {
  for (int s = 0; s < pi.size(); ++s) {
    const Mat<R>& p = pi[s];
    if ((p * p - p).norm() > tol || (p - p.adjoint()).norm() > tol)
      throw InputError(std::string(op) + ": not an orthogonal projector at site " + std::to_string(s));
  }
}

/// (1/2pi) int [tr(S' pi) - |dbar_{A+phi} pi|^2], S' = 2pi S (pair frame).
template <int R>
double degree_via_projection(const MatrixField<R>& pi, const Evaluation<R>& e) {
  require_projector(pi, 1e-8, "degree_via_projection");
  const MatrixField<R> db = pair_dbar(pi, e.gauge, e.bg->links);
  double sum = 0.0;
  for (int s = 0; s < pi.size(); ++s) {
    const Mat<R>& p = pi[s];
    const Mat<R>& ph = e.phi_pair[s];
    sum += kTwoPi * (e.s_pair[s] * p).trace().real() -
           kDzNormSq * (db[s].squaredNorm() + (ph * p - p * ph).squaredNorm());
  }
  return sum * pi.grid().cell_area() / kTwoPi;
}

struct WhcResiduals {
  double r1 = 0.0;  // ||(1 - pi) dbar_A pi||
  double r2 = 0.0;  // ||pi^2 - pi|| + ||pi - pi*||
  double r3 = 0.0;  // ||(1 - pi) [phi, pi]||
  double max() const { return std::max({r1, r2, r3}); }
};

template <int R>
WhcResiduals whc_residuals(const MatrixField<R>& pi, const Evaluation<R>& e) {
  const MatrixField<R> db = pair_dbar(pi, e.gauge, e.bg->links);
  double s1 = 0, s2a = 0, s2b = 0, s3 = 0;
  for (int s = 0; s < pi.size(); ++s) {
    const Mat<R>& p = pi[s];
    const Mat<R> q = Mat<R>::Identity() - p;
    const Mat<R>& ph = e.phi_pair[s];
    s1 += (q * db[s]).squaredNorm() * kDzNormSq;
    s2a += (p * p - p).squaredNorm();
    s2b += (p - p.adjoint()).squaredNorm();
    s3 += (q * (ph * p - p * ph)).squaredNorm() * kDzNormSq;
  }
  const double a2 = pi.grid().cell_area();
  return {std::sqrt(s1 * a2), std::sqrt(s2a * a2) + std::sqrt(s2b * a2), std::sqrt(s3 * a2)};
}

/// Pair-frame orthogonal projector onto the span of the constant columns of
/// `basis` (holomorphic frame), orthogonal with respect to the evolving metric.
template <int R>
MatrixField<R> subbundle_projector(const Eigen::MatrixXcd& basis, const Evaluation<R>& e) {
  if (basis.rows() != R) throw InputError("subbundle_projector: basis has wrong row count");
  MatrixField<R> out(e.h.grid(), FormDegree::zero, e.h.sector());
  if (basis.cols() == 0) return out;
  for (int s = 0; s < out.size(); ++s) {
    // columns g v span the pair-frame image; orthonormalize in C^R
    const Eigen::MatrixXcd w = e.gauge.g[s] * basis;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(w);
    const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(R, basis.cols());
    out[s] = q * q.adjoint();
  }
  return out;
}

/// Psi = sum_i mu_i (pi_i - pi_{i-1}) for nested projectors pi_1 < ... < pi_k = Id.
template <int R>
MatrixField<R> psi_hn_projection(const std::vector<MatrixField<R>>& nested, const std::vector<double>& mu) {
  if (nested.empty() || nested.size() != mu.size())
    throw InputError("psi_hn_projection: need one slope per filtration step");
  const double tol = 1e-8;
  for (const auto& p : nested) require_projector(p, tol, "psi_hn_projection");
  MatrixField<R> out(nested.front().grid(), FormDegree::zero, nested.front().sector());
  for (int s = 0; s < out.size(); ++s) {
    Mat<R> prev = Mat<R>::Zero();
    for (std::size_t i = 0; i < nested.size(); ++i) {
      const Mat<R>& p = nested[i][s];
      if ((prev * p - prev).norm() > 1e-6)
        throw InputError("psi_hn_projection: filtration step " + std::to_string(i) +
                         " does not contain the previous step");
      out[s] += mu[i] * (p - prev);
      prev = p;
    }
    if ((prev - Mat<R>::Identity()).norm() > 1e-6)
      throw InputError("psi_hn_projection: last filtration step is not the whole bundle");
  }
  return out;
}

/// || S - Psi ||_{L^p} (pointwise Frobenius norm).
template <int R>
double approx_critical_distance(const Evaluation<R>& e, const MatrixField<R>& psi, double p) {
  if (!(p >= 1.0)) throw DomainError("approx_critical_distance: p must be >= 1");
  double sum = 0.0;
  for (int s = 0; s < psi.size(); ++s) sum += std::pow((e.s_pair[s] - psi[s]).norm(), p);
  return std::pow(sum * psi.grid().cell_area(), 1.0 / p);
}

}  // namespace ymh
