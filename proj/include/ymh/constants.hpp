#pragma once

// Sign and normalization conventions. Everything else derives from these.
//
//  * Kahler form omega = dx ^ dy on the unit square torus, so Lambda(omega) = 1.
//  * Forms store the coefficient of dz, dzbar or omega. dz ^ dzbar = -2i omega.
//  * |dz|^2 = |dzbar|^2 = 2 in the flat metric.
//  * laplacian() is d_x^2 + d_y^2 (negative semidefinite); 2 sqrt(-1) Lambda dbar del = -laplacian.
//  * A degree-d line factor has sqrt(-1) Lambda F = 2 pi d, so theta = d on it.

#include <complex>
#include <numbers>

namespace ymh {

using cd = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cd kI{0.0, 1.0};

inline constexpr double kLambdaOmega = 1.0;
/// Coefficient of omega in dzbar ^ dz.
inline constexpr cd kDzbarWedgeDz{0.0, 2.0};
inline constexpr double kDzNormSq = 2.0;

}  // namespace ymh
