#pragma once

// Complex gauge transformation g = h^{1/2} relating the metric flow to the
// pair flow, and the pair-frame view of the mean curvature.

#include "ymh/bundle.hpp"

namespace ymh {

template <int R>
struct GaugeState {
  MatrixField<R> g;
  MatrixField<R> ginv;
};

/// Pointwise Hermitian positive square root of h.
template <int R>
GaugeState<R> reconstruct_pair(const MatrixField<R>& h) {
  GaugeState<R> out{MatrixField<R>(h.grid(), FormDegree::zero, h.sector()),
                    MatrixField<R>(h.grid(), FormDegree::zero, h.sector())};
  for (int s = 0; s < h.size(); ++s) {
    auto [g, gi] = positive_sqrt<R>(h[s], s);
    out.g[s] = g;
    out.ginv[s] = gi;
  }
  return out;
}

template <int R>
GaugeState<R> reconstruct_pair(const MetricState<R>& state) {
  return reconstruct_pair(state.h);
}

/// g X g^{-1} pointwise (metric frame to pair frame), keeping X's degree.
template <int R>
MatrixField<R> to_pair_frame(const MatrixField<R>& x, const GaugeState<R>& gs) {
  MatrixField<R> out = x;
  for (int s = 0; s < x.size(); ++s) out[s] = gs.g[s] * x[s] * gs.ginv[s];
  return out;
}

template <int R>
MatrixField<R> to_metric_frame(const MatrixField<R>& x, const GaugeState<R>& gs) {
  MatrixField<R> out = x;
  for (int s = 0; s < x.size(); ++s) out[s] = gs.ginv[s] * x[s] * gs.g[s];
  return out;
}

/// dbar_A X = g dbar(g^{-1} X g) g^{-1} for a pair-frame endomorphism X.
template <int R>
MatrixField<R> pair_dbar(const MatrixField<R>& x, const GaugeState<R>& gs, const SectorLinks<R>& links) {
  MatrixField<R> d = covariant_dbar(to_metric_frame(x, gs), links);
  for (int s = 0; s < d.size(); ++s) d[s] = gs.g[s] * d[s] * gs.ginv[s];
  return d;
}

/// del_A X = g^{-1} del(g X g^{-1}) g for a pair-frame endomorphism X.
template <int R>
MatrixField<R> pair_del(const MatrixField<R>& x, const GaugeState<R>& gs, const SectorLinks<R>& links) {
  MatrixField<R> y = x;
  for (int s = 0; s < y.size(); ++s) y[s] = gs.g[s] * x[s] * gs.ginv[s];
  MatrixField<R> d = covariant_del(y, links);
  for (int s = 0; s < d.size(); ++s) d[s] = gs.ginv[s] * d[s] * gs.g[s];
  return d;
}

}  // namespace ymh
