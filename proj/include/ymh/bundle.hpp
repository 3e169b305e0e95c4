#pragma once

// Split Hermitian Higgs bundles over the torus: line factors of prescribed
// degree, the background Chern connection of H0 = Id, Chern curvature of an
// evolving metric h = H0^{-1} H and the Higgs bracket term.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ymh/geometry.hpp"
#include "ymh/linalg.hpp"
#include "ymh/sections.hpp"

namespace ymh {

enum class BlockKind { constant, section, aliased };

/// Higgs block mapping factor j into factor i.
struct HiggsBlock {
  int i = 0;
  int j = 0;
  BlockKind kind = BlockKind::constant;
  double value = 0.0;        // constant
  std::uint64_t seed = 0;    // section, aliased
  double scale = 1.0;        // section, aliased
  double alias_amplitude = 0.0;  // aliased: multiplies by 1 + amp * (-1)^(x+y)
  int line = 0;              // config line, for diagnostics
};

inline std::string describe(const HiggsBlock& b) {
  std::string s = "block (" + std::to_string(b.i) + "," + std::to_string(b.j) + ")";
  if (b.line > 0) s += " on line " + std::to_string(b.line);
  return s;
}

struct BundleConfig {
  std::vector<int> degrees;
  std::vector<HiggsBlock> blocks;
  std::uint64_t seed = 0;

  int rank() const { return static_cast<int>(degrees.size()); }
  int degree() const { return std::accumulate(degrees.begin(), degrees.end(), 0); }

  /// Rejects blocks with d_i < d_j, non-constant equal-degree blocks and bad indices.
  void validate() const {
    if (degrees.empty()) throw ConfigError("bundle: degrees list is empty");
    for (const HiggsBlock& b : blocks) {
      if (b.i < 0 || b.j < 0 || b.i >= rank() || b.j >= rank())
        throw ConfigError(describe(b) + ": index out of range for rank " + std::to_string(rank()));
      if (b.i == b.j && b.kind != BlockKind::constant)
        throw ConfigError(describe(b) + ": diagonal blocks must be constant");
      const int di = degrees[b.i], dj = degrees[b.j];
      if (di < dj)
        throw ConfigError(describe(b) + ": illegal, Hom(L_" + std::to_string(dj) + ", L_" +
                          std::to_string(di) + ") has no holomorphic sections (d_i < d_j)");
      if (di == dj && b.kind != BlockKind::constant)
        throw ConfigError(describe(b) + ": equal-degree blocks must be constant");
      if (di > dj && b.kind == BlockKind::constant && b.value != 0.0)
        throw ConfigError(describe(b) + ": a nonzero constant is not a section of L_" +
                          std::to_string(di - dj) + "; use kind 'section'");
      for (const HiggsBlock& o : blocks)
        if (&o != &b && o.i == b.i && o.j == b.j) throw ConfigError(describe(b) + ": duplicate");
    }
  }
};

/// lambda = 2 pi deg(E) / rank on the unit-area torus.
inline double einstein_constant(const BundleConfig& c) {
  return kTwoPi * c.degree() / c.rank();
}

template <int R>
struct Background {
  TorusGrid grid;
  Sector degrees;
  SectorLinks<R> links;
  std::vector<LinkField> factor_links;
  /// F_{H0} as an omega coefficient: diag(-i k_i) with k_i = sqrt(-1) Lambda F of factor i.
  MatrixField<R> curvature;
  double lambda = 0.0;
};

template <int R>
Background<R> build_background(const BundleConfig& config, const TorusGrid& grid) {
  if (config.degrees.empty()) throw ConfigError("build_background: empty degree list");
  if (config.rank() != R) throw ConfigError("build_background: rank mismatch");
  int max_d = 0;
  for (int d : config.degrees) max_d = std::max(max_d, std::abs(d));
  if (static_cast<long>(grid.n()) * grid.n() < 32L * max_d)
    throw ConfigError("build_background: n = " + std::to_string(grid.n()) +
                      " too small to resolve degree " + std::to_string(max_d) +
                      " (need n^2 >= 32 max|d|)");
  std::vector<LinkField> factors;
  for (int d : config.degrees) factors.push_back(LinkField::landau(grid, d));
  MatrixField<R> f0(grid, FormDegree::one_one, config.degrees);
  for (int s = 0; s < grid.sites(); ++s)
    for (int i = 0; i < R; ++i) f0[s](i, i) = -kI * factors[i].site_flux_density(s);
  return Background<R>{grid, config.degrees, SectorLinks<R>(grid, config.degrees),
                       std::move(factors), std::move(f0), einstein_constant(config)};
}

template <int R>
struct MetricState {
  double t = 0.0;
  MatrixField<R> h;
};

template <int R>
MetricState<R> initial_state(const Background<R>& bg) {
  return {0.0, MatrixField<R>(bg.grid, FormDegree::zero, bg.degrees, Mat<R>::Identity())};
}

/// dz coefficient Phi of the Higgs field phi = Phi dz.
template <int R>
struct HiggsField {
  MatrixField<R> phi;
  /// False when a deliberately aliased block was requested.
  bool holomorphic = true;
};

inline std::uint64_t mix_seed(std::uint64_t global, std::uint64_t local) {
  std::uint64_t z = global ^ (local + 0x9e3779b97f4a7c15ULL + (global << 6) + (global >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <int R>
HiggsField<R> build_higgs(const BundleConfig& config, const Background<R>& bg) {
  config.validate();
  HiggsField<R> out{MatrixField<R>(bg.grid, FormDegree::one_zero, bg.degrees)};
  for (const HiggsBlock& b : config.blocks) {
    if (b.kind == BlockKind::constant) {
      for (int s = 0; s < bg.grid.sites(); ++s) out.phi[s](b.i, b.j) = b.value;
      continue;
    }
    const int twist = config.degrees[b.i] - config.degrees[b.j];
    const ScalarField sec = solve_holomorphic_section(twist, bg.grid, mix_seed(config.seed, b.seed));
    for (int s = 0; s < bg.grid.sites(); ++s) {
      cd v = b.scale * sec[s];
      if (b.kind == BlockKind::aliased) {
        const int parity = (bg.grid.x_of(s) + bg.grid.y_of(s)) % 2;
        v *= 1.0 + b.alias_amplitude * (parity == 0 ? 1.0 : -1.0);
        out.holomorphic = false;
      }
      out.phi[s](b.i, b.j) = v;
    }
  }
  return out;
}

/// L^2 norm of dbar Phi (dzbar coefficient).
template <int R>
double higgs_dbar_norm(const HiggsField<R>& higgs, const Background<R>& bg) {
  const MatrixField<R> d = covariant_dbar(higgs.phi.with_degree(FormDegree::zero), bg.links);
  double sum = 0.0;
  for (const auto& m : d.values()) sum += m.squaredNorm();
  return std::sqrt(sum * bg.grid.cell_area());
}

/// Pointwise inverse of h; throws StateError on positivity loss.
template <int R>
MatrixField<R> metric_inverse(const MatrixField<R>& h) {
  MatrixField<R> out(h.grid(), FormDegree::zero, h.sector());
  for (int s = 0; s < h.size(); ++s) out[s] = positive_inverse<R>(h[s], s);
  return out;
}

/// F_H = F_{H0} + dbar(h^{-1} del h), as an omega coefficient.
template <int R>
MatrixField<R> chern_curvature(const MatrixField<R>& h, const MatrixField<R>& hinv,
                               const Background<R>& bg) {
  MatrixField<R> a = covariant_del(h, bg.links);
  for (int s = 0; s < a.size(); ++s) a[s] = hinv[s] * a[s];
  MatrixField<R> f = dbar_of_form(a, bg.links);
  f += bg.curvature;
  return f;
}

template <int R>
MatrixField<R> chern_curvature(const MetricState<R>& state, const Background<R>& bg) {
  return chern_curvature(state.h, metric_inverse(state.h), bg);
}

/// [phi, phi^{*H}] as an omega coefficient, with phi^{*H} = h^{-1} Phi^dagger h.
template <int R>
MatrixField<R> higgs_adjoint_bracket(const MatrixField<R>& phi, const MatrixField<R>& h,
                                     const MatrixField<R>& hinv) {
  MatrixField<R> out(h.grid(), FormDegree::one_one, h.sector());
  for (int s = 0; s < h.size(); ++s) {
    const Mat<R> adj = hinv[s] * phi[s].adjoint() * h[s];
    out[s] = -kDzbarWedgeDz * (phi[s] * adj - adj * phi[s]);
  }
  return out;
}

template <int R>
MatrixField<R> higgs_adjoint_bracket(const HiggsField<R>& higgs, const MetricState<R>& state) {
  return higgs_adjoint_bracket(higgs.phi, state.h, metric_inverse(state.h));
}

/// sqrt(-1) Lambda (F_H + [phi, phi^{*H}]) in the metric frame.
///
/// Covariant central differences along x and y do not commute exactly on
/// twisted entries, so the raw discrete curvature is H-self-adjoint only to
/// O(a^2). We keep its H-self-adjoint part (K + h^{-1} K^dagger h) / 2, which
/// has the same trace integral and makes h K exactly Hermitian.
template <int R>
MatrixField<R> total_curvature_operator(const MatrixField<R>& h, const MatrixField<R>& hinv,
                                        const MatrixField<R>& phi, const Background<R>& bg) {
  MatrixField<R> f = chern_curvature(h, hinv, bg);
  f += higgs_adjoint_bracket(phi, h, hinv);
  MatrixField<R> k = lambda_contract(f);
  k *= kI;
  for (int s = 0; s < k.size(); ++s) k[s] = 0.5 * (k[s] + hinv[s] * k[s].adjoint() * h[s]);
  return k;
}

template <int R>
MatrixField<R> total_curvature_operator(const MetricState<R>& state, const HiggsField<R>& higgs,
                                        const Background<R>& bg) {
  return total_curvature_operator(state.h, metric_inverse(state.h), higgs.phi, bg);
}

}  // namespace ymh
