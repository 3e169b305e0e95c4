#pragma once

// Holomorphic sections of the degree-d Landau sector from the near-kernel of
// the discrete dbar operator.
//
// The central dbar stencil has doubler modes at the momenta (pi,0), (0,pi),
// (pi,pi), so its singular values alone cannot count holomorphic sections.
// We use the stacked operator
//
//     D = [ dbar_central ; a^2 (Lap_5pt - Lap_wide) ]
//
// whose second block is O(a^4) on smooth fields and O(1) on the doublers.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "ymh/geometry.hpp"

namespace ymh {

struct DbarSpectrum {
  int twist = 0;
  /// Ascending singular values of D in L^2-normalized units.
  std::vector<double> singular_values;
  /// Matching right singular vectors, unit L^2 norm.
  std::vector<ScalarField> vectors;
};

namespace detail {

using SparseC = Eigen::SparseMatrix<cd>;

inline SparseC stacked_dbar_operator(const LinkField& links, double penalty = 1.0) {
  const TorusGrid& g = links.grid();
  const int N = g.sites();
  const double a = g.spacing();
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(static_cast<std::size_t>(N) * 16);
  const double c = 0.5 / (2.0 * a);
  for (int s = 0; s < N; ++s) {
    const int xp = g.shift(s, 1, 0), xm = g.shift(s, -1, 0);
    const int yp = g.shift(s, 0, 1), ym = g.shift(s, 0, -1);
    t.emplace_back(s, xp, c * links.x(s));
    t.emplace_back(s, xm, -c * std::conj(links.x(xm)));
    t.emplace_back(s, yp, kI * c * links.y(s));
    t.emplace_back(s, ym, -kI * c * std::conj(links.y(ym)));

    // penalty * a^2 * (L5 - Lw): a^2 L5 = sum(T1) - 4, a^2 Lw = (sum(T2) - 4) / 4.
    const int row = N + s;
    const int xpp = g.shift(s, 2, 0), xmm = g.shift(s, -2, 0);
    const int ypp = g.shift(s, 0, 2), ymm = g.shift(s, 0, -2);
    t.emplace_back(row, xp, penalty * links.x(s));
    t.emplace_back(row, xm, penalty * std::conj(links.x(xm)));
    t.emplace_back(row, yp, penalty * links.y(s));
    t.emplace_back(row, ym, penalty * std::conj(links.y(ym)));
    t.emplace_back(row, s, cd(-4.0 * penalty + penalty, 0.0));
    const double q = -0.25 * penalty;
    t.emplace_back(row, xpp, q * links.x(s) * links.x(xp));
    t.emplace_back(row, xmm, q * std::conj(links.x(xm)) * std::conj(links.x(xmm)));
    t.emplace_back(row, ypp, q * links.y(s) * links.y(yp));
    t.emplace_back(row, ymm, q * std::conj(links.y(ym)) * std::conj(links.y(ymm)));
  }
  SparseC d(2 * N, N);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

}  // namespace detail

/// Smallest `count` singular pairs of the stacked dbar operator on the twist
/// sector, by shift-inverted block subspace iteration from a seeded start.
inline DbarSpectrum dbar_low_spectrum(const TorusGrid& grid, int twist, int count,
                                      std::uint64_t seed) {
  if (count < 1) throw DomainError("dbar_low_spectrum: count must be >= 1");
  const LinkField links = LinkField::landau(grid, twist);
  const detail::SparseC d = detail::stacked_dbar_operator(links);
  const detail::SparseC m = (d.adjoint() * d).pruned();
  const int N = grid.sites();

  const double shift = 0.05;
  detail::SparseC shifted = m;
  for (int i = 0; i < N; ++i) shifted.coeffRef(i, i) += shift;
  Eigen::SimplicialLDLT<detail::SparseC> solver(shifted);
  if (solver.info() != Eigen::Success) throw StateError("dbar_low_spectrum: factorization failed");

  const int block = std::min(N, count + std::abs(twist) + 4);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd x(N, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < N; ++i) x(i, j) = cd(normal(rng), normal(rng));

  Eigen::VectorXd ritz = Eigen::VectorXd::Constant(block, 1e300);
  Eigen::MatrixXcd q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
  for (int iter = 0; iter < 400; ++iter) {
    const Eigen::MatrixXcd y = solver.solve(x);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(y);
    q = qr.householderQ() * Eigen::MatrixXcd::Identity(N, block);
    const Eigen::MatrixXcd mq = m * q;
    Eigen::MatrixXcd gram = q.adjoint() * mq;
    gram = 0.5 * (gram + gram.adjoint()).eval();
    es.compute(gram);
    x = q * es.eigenvectors();
    const Eigen::VectorXd next = es.eigenvalues();
    double change = 0.0;
    for (int j = 0; j < count; ++j)
      change = std::max(change, std::abs(next(j) - ritz(j)) / std::max(std::abs(next(j)), 1e-3));
    ritz = next;
    if (iter > 3 && change < 1e-10) break;
  }

  DbarSpectrum out;
  out.twist = twist;
  const double norm_scale = 1.0 / grid.spacing();  // unit L^2 norm: sum |v|^2 a^2 = 1
  for (int j = 0; j < count; ++j) {
    out.singular_values.push_back(std::sqrt(std::max(ritz(j), 0.0)));
    ScalarField v(grid, FormDegree::zero, {twist});
    const Eigen::VectorXcd col = x.col(j).normalized();
    for (int i = 0; i < N; ++i) v[i] = norm_scale * col(i);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

/// Number of singular values at or below the threshold.
inline int near_kernel_dimension(const DbarSpectrum& spec, double threshold) {
  return static_cast<int>(std::count_if(spec.singular_values.begin(), spec.singular_values.end(),
                                        [&](double s) { return s <= threshold; }));
}

/// sigma_dim / sigma_{dim-1}; with an empty near-kernel the denominator is the threshold.
inline double gap_ratio(const DbarSpectrum& spec, int dim, double threshold) {
  if (dim >= static_cast<int>(spec.singular_values.size()))
    throw DomainError("gap_ratio: spectrum too short");
  const double below = dim > 0 ? spec.singular_values[dim - 1] : threshold;
  return spec.singular_values[dim] / std::max(below, 1e-300);
}

inline double default_holomorphy_tolerance(const TorusGrid& g) {
  return 10.0 / (static_cast<double>(g.n()) * g.n());
}

inline double l2_norm(const ScalarField& f) {
  double sum = 0.0;
  for (const cd& v : f.values()) sum += std::norm(v);
  return std::sqrt(sum * f.grid().cell_area());
}

/// Unit-norm holomorphic section of the degree-`twist` sector.
inline ScalarField solve_holomorphic_section(int twist, const TorusGrid& grid, std::uint64_t seed) {
  if (twist <= 0)
    throw DomainError("solve_holomorphic_section: no nonzero holomorphic section for degree " +
                      std::to_string(twist));
  DbarSpectrum spec = dbar_low_spectrum(grid, twist, 1, seed);
  ScalarField s = std::move(spec.vectors.front());
  const double residual = l2_norm(covariant_dbar(s, LinkField::landau(grid, twist)));
  if (residual > default_holomorphy_tolerance(grid))
    throw StateError("solve_holomorphic_section: dbar residual " + std::to_string(residual) +
                     " exceeds tolerance");
  return s;
}

}  // namespace ymh
