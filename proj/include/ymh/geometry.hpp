#pragma once

// Discrete flat Kahler geometry of the unit square torus: periodic grids,
// background U(1) link fields, form-tagged fields and covariant central
// differences.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "ymh/constants.hpp"
#include "ymh/errors.hpp"
#include "ymh/parallel.hpp"

namespace ymh {

template <int R>
using Mat = Eigen::Matrix<cd, R, R>;
template <int R>
using Vec = Eigen::Matrix<cd, R, 1>;

/// Periodic n x n grid on [0,1)^2. Sites are numbered row-major: s = y*n + x.
class TorusGrid {
 public:
  explicit TorusGrid(int n) : n_(n) {
    if (n < 8) throw ConfigError("grid size n must be >= 8, got " + std::to_string(n));
  }

  int n() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  double cell_area() const { return spacing() * spacing(); }
  int sites() const { return n_ * n_; }
  int wrap(int k) const {
    k %= n_;
    return k < 0 ? k + n_ : k;
  }
  int index(int x, int y) const { return wrap(y) * n_ + wrap(x); }
  int x_of(int s) const { return s % n_; }
  int y_of(int s) const { return s / n_; }
  /// Neighbour of s displaced by (dx, dy).
  int shift(int s, int dx, int dy) const { return index(x_of(s) + dx, y_of(s) + dy); }

  bool operator==(const TorusGrid&) const = default;

 private:
  int n_;
};

enum class FormDegree { zero, one_zero, zero_one, one_one };

inline const char* to_string(FormDegree d) {
  switch (d) {
    case FormDegree::zero: return "0-form";
    case FormDegree::one_zero: return "(1,0)-form";
    case FormDegree::zero_one: return "(0,1)-form";
    case FormDegree::one_one: return "(1,1)-form";
  }
  return "?";
}

/// Flux sector of a field. A scalar field lives in the twist sector[0];
/// a matrix field carries the factor degrees and entry (i,j) has twist
/// sector[i] - sector[j]. Real-valued densities use an empty sector.
using Sector = std::vector<int>;

namespace detail {
template <class T>
T zero_value() {
  if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, cd>) {
    return T{0};
  } else {
    return T::Zero();
  }
}
}  // namespace detail

template <class T>
class Field {
 public:
  Field(TorusGrid grid, FormDegree degree, Sector sector)
      : grid_(grid), degree_(degree), sector_(std::move(sector)),
        data_(static_cast<std::size_t>(grid.sites()), detail::zero_value<T>()) {}

  Field(TorusGrid grid, FormDegree degree, Sector sector, const T& fill)
      : grid_(grid), degree_(degree), sector_(std::move(sector)),
        data_(static_cast<std::size_t>(grid.sites()), fill) {}

  const TorusGrid& grid() const { return grid_; }
  FormDegree degree() const { return degree_; }
  const Sector& sector() const { return sector_; }
  int size() const { return static_cast<int>(data_.size()); }

  T& operator[](int s) { return data_[static_cast<std::size_t>(s)]; }
  const T& operator[](int s) const { return data_[static_cast<std::size_t>(s)]; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  Field with_degree(FormDegree d) const {
    Field out = *this;
    out.degree_ = d;
    return out;
  }

  void require_compatible(const Field& o, const char* op) const {
    if (!(grid_ == o.grid_))
      throw ConfigError(std::string(op) + ": grid mismatch");
    if (degree_ != o.degree_)
      throw ConfigError(std::string(op) + ": form degree mismatch (" + to_string(degree_) +
                        " vs " + to_string(o.degree_) + ")");
    if (sector_ != o.sector_) throw ConfigError(std::string(op) + ": sector mismatch");
  }

  Field& operator+=(const Field& o) {
    require_compatible(o, "field +");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_compatible(o, "field -");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  template <class S>
  Field& operator*=(const S& c) {
    for (auto& v : data_) v *= c;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  template <class S>
  friend Field operator*(const S& c, Field a) {
    return a *= c;
  }

  bool operator==(const Field&) const = default;

 private:
  TorusGrid grid_;
  FormDegree degree_;
  Sector sector_;
  std::vector<T> data_;
};

using RealField = Field<double>;
using ScalarField = Field<cd>;
template <int R>
using MatrixField = Field<Mat<R>>;
template <int R>
using SectionField = Field<Vec<R>>;

/// Fixed background U(1) connection of a given twist in the constant-flux
/// Landau gauge: x-links trivial except the wrap column x = n-1, y-links with
/// an x-dependent phase. Every plaquette carries the same holonomy.
class LinkField {
 public:
  static LinkField landau(const TorusGrid& grid, int twist) {
    LinkField l(grid, twist);
    const int n = grid.n();
    const double nn = static_cast<double>(n) * n;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const int s = grid.index(x, y);
        l.uy_[s] = std::polar(1.0, -kTwoPi * twist * x / nn);
        l.ux_[s] = (x == n - 1) ? std::polar(1.0, kTwoPi * twist * y / n) : cd{1.0, 0.0};
      }
    }
    return l;
  }

  const TorusGrid& grid() const { return grid_; }
  int twist() const { return twist_; }
  Sector sector() const { return {twist_}; }

  /// Parallel transport from s + e_x (resp. e_y) back to s.
  cd x(int s) const { return ux_[static_cast<std::size_t>(s)]; }
  cd y(int s) const { return uy_[static_cast<std::size_t>(s)]; }

  /// Argument of the counter-clockwise holonomy around the cell with lower-left corner (x,y).
  double plaquette_angle(int x, int y) const {
    const int s = grid_.index(x, y);
    const cd hol = ux_[s] * uy_[grid_.index(x + 1, y)] * std::conj(ux_[grid_.index(x, y + 1)]) *
                   std::conj(uy_[s]);
    return std::arg(hol);
  }

  /// sqrt(-1) Lambda F on the cell (x,y): -angle / a^2.
  double cell_flux_density(int x, int y) const {
    return -plaquette_angle(x, y) / grid_.cell_area();
  }

  /// Average of the four cells touching site s.
  double site_flux_density(int s) const {
    const int x = grid_.x_of(s), y = grid_.y_of(s);
    return 0.25 * (cell_flux_density(x, y) + cell_flux_density(x - 1, y) +
                   cell_flux_density(x, y - 1) + cell_flux_density(x - 1, y - 1));
  }

  /// Sum of -plaquette angles; equals 2 pi twist.
  double total_flux() const {
    double sum = 0.0;
    for (int y = 0; y < grid_.n(); ++y)
      for (int x = 0; x < grid_.n(); ++x) sum -= plaquette_angle(x, y);
    return sum;
  }

  double max_modulus_error() const {
    double e = 0.0;
    for (std::size_t i = 0; i < ux_.size(); ++i)
      e = std::max({e, std::abs(std::abs(ux_[i]) - 1.0), std::abs(std::abs(uy_[i]) - 1.0)});
    return e;
  }

 private:
  LinkField(const TorusGrid& grid, int twist)
      : grid_(grid), twist_(twist), ux_(grid.sites()), uy_(grid.sites()) {}

  TorusGrid grid_;
  int twist_;
  std::vector<cd> ux_, uy_;
};

/// Background links for End(E) of a split bundle: entry (i,j) uses the
/// twist d_i - d_j link; sections use the diagonal twist d_i.
template <int R>
class SectorLinks {
 public:
  SectorLinks(const TorusGrid& grid, const Sector& degrees)
      : grid_(grid), degrees_(degrees), mx_(grid.sites()), my_(grid.sites()),
        vx_(grid.sites()), vy_(grid.sites()) {
    if (static_cast<int>(degrees.size()) != R)
      throw ConfigError("SectorLinks: degree list length does not match rank");
    std::vector<LinkField> rel;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) rel.push_back(LinkField::landau(grid, degrees[i] - degrees[j]));
    std::vector<LinkField> diag;
    for (int i = 0; i < R; ++i) diag.push_back(LinkField::landau(grid, degrees[i]));
    for (int s = 0; s < grid.sites(); ++s) {
      for (int i = 0; i < R; ++i) {
        vx_[s](i) = diag[i].x(s);
        vy_[s](i) = diag[i].y(s);
        for (int j = 0; j < R; ++j) {
          mx_[s](i, j) = rel[i * R + j].x(s);
          my_[s](i, j) = rel[i * R + j].y(s);
        }
      }
    }
  }

  const TorusGrid& grid() const { return grid_; }
  const Sector& sector() const { return degrees_; }
  const Mat<R>& x(int s) const { return mx_[s]; }
  const Mat<R>& y(int s) const { return my_[s]; }
  const Vec<R>& section_x(int s) const { return vx_[s]; }
  const Vec<R>& section_y(int s) const { return vy_[s]; }

 private:
  TorusGrid grid_;
  Sector degrees_;
  std::vector<Mat<R>> mx_, my_;
  std::vector<Vec<R>> vx_, vy_;
};

namespace detail {

inline cd apply_phase(cd p, cd v) { return p * v; }
inline cd conj_phase(cd p) { return std::conj(p); }
template <class M>
M apply_phase(const M& p, const M& v) {
  return p.cwiseProduct(v);
}
template <class M>
M conj_phase(const M& p) {
  return p.conjugate();
}

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* op) {
  if (!(a == b)) throw ConfigError(std::string(op) + ": grid mismatch with links");
}

inline const LinkField& check_links(const ScalarField& f, const LinkField& l, const char* op) {
  require_same_grid(f.grid(), l.grid(), op);
  if (f.sector() != l.sector()) throw ConfigError(std::string(op) + ": sector mismatch with links");
  return l;
}

template <int R>
const SectorLinks<R>& check_links(const MatrixField<R>& f, const SectorLinks<R>& l, const char* op) {
  require_same_grid(f.grid(), l.grid(), op);
  if (f.sector() != l.sector()) throw ConfigError(std::string(op) + ": sector mismatch with links");
  return l;
}

/// Central covariant difference along x (dir = 0) or y (dir = 1).
template <class T, class Links>
Field<T> central_difference(const Field<T>& f, const Links& links, int dir) {
  const TorusGrid& g = f.grid();
  Field<T> out(g, f.degree(), f.sector());
  const double inv = 0.5 / g.spacing();
  parallel_for(g.sites(), [&](int s) {
    const int fwd = dir == 0 ? g.shift(s, 1, 0) : g.shift(s, 0, 1);
    const int bwd = dir == 0 ? g.shift(s, -1, 0) : g.shift(s, 0, -1);
    const auto& pf = dir == 0 ? links.x(s) : links.y(s);
    const auto& pb = dir == 0 ? links.x(bwd) : links.y(bwd);
    out[s] = inv * (apply_phase(pf, f[fwd]) - apply_phase(conj_phase(pb), f[bwd]));
  });
  return out;
}

/// Section-valued difference: transports with the diagonal factor phases.
template <int R>
SectionField<R> section_difference(const SectionField<R>& f, const SectorLinks<R>& links, int dir) {
  const TorusGrid& g = f.grid();
  SectionField<R> out(g, f.degree(), f.sector());
  const double inv = 0.5 / g.spacing();
  for (int s = 0; s < g.sites(); ++s) {
    const int fwd = dir == 0 ? g.shift(s, 1, 0) : g.shift(s, 0, 1);
    const int bwd = dir == 0 ? g.shift(s, -1, 0) : g.shift(s, 0, -1);
    const Vec<R>& pf = dir == 0 ? links.section_x(s) : links.section_y(s);
    const Vec<R>& pb = dir == 0 ? links.section_x(bwd) : links.section_y(bwd);
    out[s] = inv * (pf.cwiseProduct(f[fwd]) - pb.conjugate().cwiseProduct(f[bwd]));
  }
  return out;
}

template <class T, class Links>
Field<T> combine_dz(const Field<T>& f, const Links& links, double sign, FormDegree out_degree) {
  Field<T> dx = central_difference(f, links, 0);
  const Field<T> dy = central_difference(f, links, 1);
  const cd c = sign * kI;
  for (int s = 0; s < dx.size(); ++s) dx[s] = 0.5 * (dx[s] + c * dy[s]);
  return dx.with_degree(out_degree);
}

template <class T>
void require_degree(const Field<T>& f, FormDegree d, const char* op) {
  if (f.degree() != d)
    throw ConfigError(std::string(op) + ": expected " + to_string(d) + ", got " +
                      to_string(f.degree()));
}

}  // namespace detail

/// Covariant x / y derivative (central, second order) of a field of any degree.
template <class T, class Links>
Field<T> covariant_dx(const Field<T>& f, const Links& links) {
  detail::check_links(f, links, "covariant_dx");
  return detail::central_difference(f, links, 0);
}
template <class T, class Links>
Field<T> covariant_dy(const Field<T>& f, const Links& links) {
  detail::check_links(f, links, "covariant_dy");
  return detail::central_difference(f, links, 1);
}

/// dbar of a 0-form: the dzbar coefficient (D_x + i D_y) / 2.
template <class T, class Links>
Field<T> covariant_dbar(const Field<T>& f, const Links& links) {
  detail::require_degree(f, FormDegree::zero, "covariant_dbar");
  detail::check_links(f, links, "covariant_dbar");
  return detail::combine_dz(f, links, +1.0, FormDegree::zero_one);
}

/// del of a 0-form: the dz coefficient (D_x - i D_y) / 2.
template <class T, class Links>
Field<T> covariant_del(const Field<T>& f, const Links& links) {
  detail::require_degree(f, FormDegree::zero, "covariant_del");
  detail::check_links(f, links, "covariant_del");
  return detail::combine_dz(f, links, -1.0, FormDegree::one_zero);
}

/// dbar(a dz) = d_zbar(a) dzbar ^ dz, returned as an omega coefficient.
template <class T, class Links>
Field<T> dbar_of_form(const Field<T>& f, const Links& links) {
  detail::require_degree(f, FormDegree::one_zero, "dbar_of_form");
  detail::check_links(f, links, "dbar_of_form");
  Field<T> out = detail::combine_dz(f.with_degree(FormDegree::zero), links, +1.0,
                                    FormDegree::one_one);
  out *= kDzbarWedgeDz;
  return out;
}

/// del(b dzbar) = d_z(b) dz ^ dzbar, returned as an omega coefficient.
template <class T, class Links>
Field<T> del_of_form(const Field<T>& f, const Links& links) {
  detail::require_degree(f, FormDegree::zero_one, "del_of_form");
  detail::check_links(f, links, "del_of_form");
  Field<T> out = detail::combine_dz(f.with_degree(FormDegree::zero), links, -1.0,
                                    FormDegree::one_one);
  out *= -kDzbarWedgeDz;
  return out;
}

/// Contraction with omega; Lambda(omega * Id) = Id.
template <class T>
Field<T> lambda_contract(const Field<T>& f) {
  detail::require_degree(f, FormDegree::one_one, "lambda_contract");
  Field<T> out = f.with_degree(FormDegree::zero);
  out *= kLambdaOmega;
  return out;
}

/// Sum of f * a^2.
inline double integrate(const RealField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.grid().cell_area();
}

/// Covariant five-point Laplacian d_x^2 + d_y^2.
template <class T, class Links>
Field<T> laplacian(const Field<T>& f, const Links& links) {
  detail::require_degree(f, FormDegree::zero, "laplacian");
  detail::check_links(f, links, "laplacian");
  const TorusGrid& g = f.grid();
  Field<T> out(g, f.degree(), f.sector());
  const double inv = 1.0 / g.cell_area();
  parallel_for(g.sites(), [&](int s) {
    const int xp = g.shift(s, 1, 0), xm = g.shift(s, -1, 0);
    const int yp = g.shift(s, 0, 1), ym = g.shift(s, 0, -1);
    using detail::apply_phase;
    using detail::conj_phase;
    out[s] = inv * (apply_phase(links.x(s), f[xp]) + apply_phase(conj_phase(links.x(xm)), f[xm]) +
                    apply_phase(links.y(s), f[yp]) + apply_phase(conj_phase(links.y(ym)), f[ym]) -
                    4.0 * f[s]);
  });
  return out;
}

/// Sector links of a scalar twist field.
inline LinkField links_for(const ScalarField& f) {
  return LinkField::landau(f.grid(), f.sector().at(0));
}

}  // namespace ymh
