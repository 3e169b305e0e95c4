#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>

#include "ymh/geometry.hpp"

namespace ymh {

template <int R>
Mat<R> hermitian_part(const Mat<R>& m) {
  return 0.5 * (m + m.adjoint());
}

/// Inverse of a positive Hermitian matrix; throws StateError if not positive.
template <int R>
Mat<R> positive_inverse(const Mat<R>& h, int site = -1) {
  Eigen::LLT<Mat<R>> llt(h);
  if (llt.info() != Eigen::Success)
    throw StateError("metric lost positivity" +
                     (site >= 0 ? " at site " + std::to_string(site) : std::string{}));
  return llt.solve(Mat<R>::Identity());
}

/// Eigenvalues (descending) of a Hermitian matrix.
template <int R>
Eigen::Matrix<double, R, 1> eigenvalues_desc(const Mat<R>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

template <int R>
double min_eigenvalue(const Mat<R>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Hermitian positive square root and its inverse.
template <int R>
std::pair<Mat<R>, Mat<R>> positive_sqrt(const Mat<R>& h, int site = -1) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(hermitian_part<R>(h));
  const auto& w = es.eigenvalues();
  if (w.minCoeff() <= 0.0)
    throw StateError("square root of non-positive metric" +
                     (site >= 0 ? " at site " + std::to_string(site) : std::string{}));
  const auto& v = es.eigenvectors();
  const Mat<R> g = v * w.cwiseSqrt().asDiagonal() * v.adjoint();
  const Mat<R> ginv = v * w.cwiseSqrt().cwiseInverse().asDiagonal() * v.adjoint();
  return {g, ginv};
}

template <int R>
double frobenius_sq(const Mat<R>& m) {
  return m.squaredNorm();
}

/// Largest |eigenvalue| of a Hermitian matrix.
template <int R>
double spectral_radius_hermitian(const Mat<R>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(hermitian_part<R>(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ymh
