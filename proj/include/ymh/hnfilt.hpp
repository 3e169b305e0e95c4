#pragma once

// Harder-Narasimhan machinery for split Higgs bundles: exact slopes, a
// combinatorial HN / HNS oracle, filtration validation through the projection
// degree formula, limit-type estimation and the dominance order.

#include <boost/rational.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ymh/functionals.hpp"

namespace ymh {

using Rational = boost::rational<long long>;

inline Rational slope(Rational degree, long long rank) {
  if (rank <= 0) throw DomainError("slope: rank must be positive");
  return degree / rank;
}

inline double to_double(Rational r) { return boost::rational_cast<double>(r); }

inline std::string to_string(Rational r) {
  std::ostringstream os;
  if (r.denominator() == 1) os << r.numerator();
  else os << r.numerator() << '/' << r.denominator();
  return os.str();
}

/// Nonincreasing slope vector with multiplicities.
struct HNType {
  std::vector<Rational> mu;

  std::vector<double> values() const {
    std::vector<double> v;
    for (Rational r : mu) v.push_back(to_double(r));
    return v;
  }
  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < mu.size(); ++i) s += (i ? "," : "") + to_string(mu[i]);
    return s + ")";
  }
};

/// One step F_i of a filtration: a constant basis in the holomorphic frame,
/// its cumulative degree, and the slope of F_i / F_{i-1}.
struct FiltrationStep {
  Eigen::MatrixXcd basis;
  Rational degree;
  Rational quotient_slope;
  int rank() const { return static_cast<int>(basis.cols()); }
};

struct FiltrationSpec {
  std::vector<FiltrationStep> steps;

  std::vector<double> slopes() const {
    std::vector<double> v;
    for (const auto& s : steps) v.push_back(to_double(s.quotient_slope));
    return v;
  }
};

struct OracleResult {
  HNType type;
  FiltrationSpec hn;
  FiltrationSpec hns;
  /// Slopes of the HNS graded pieces, one per step of `hns`.
  std::vector<Rational> graded_slopes;
};

namespace detail {

// A unit is a single factor, or a whole equal-degree group carrying internal
// constant blocks.
struct Unit {
  std::vector<int> factors;
  int degree = 0;
  bool internal = false;
};

inline Eigen::MatrixXcd columns_of(int rank, const std::vector<int>& factors) {
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(rank, static_cast<int>(factors.size()));
  for (int k = 0; k < static_cast<int>(factors.size()); ++k) b(factors[k], k) = 1.0;
  return b;
}

}  // namespace detail

/// HN type, HN filtration and an HNS refinement of a split Higgs bundle with
/// constant equal-degree blocks and section blocks from lower to higher degree.
inline OracleResult oracle_hn_type(const BundleConfig& config) {
  config.validate();
  const int R = config.rank();
  const auto& d = config.degrees;

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < R; ++i) groups[d[i]].push_back(i);

  std::map<int, bool> has_internal;
  std::map<std::pair<int, int>, int> cross_count;
  for (const HiggsBlock& b : config.blocks) {
    const bool zero = b.kind == BlockKind::constant && b.value == 0.0;
    if (zero) continue;
    if (d[b.i] == d[b.j]) has_internal[d[b.i]] = true;
    else ++cross_count[{d[b.i], d[b.j]}];
  }
  for (const auto& [pair, count] : cross_count) {
    if (count > 1)
      throw OracleUnsupported("oracle_hn_type: " + std::to_string(count) + " blocks between degree " +
                              std::to_string(pair.second) + " and degree " + std::to_string(pair.first) +
                              " factors");
    if (has_internal[pair.first] || has_internal[pair.second])
      throw OracleUnsupported("oracle_hn_type: equal-degree group with internal blocks also has "
                              "blocks to other degrees");
  }

  std::vector<detail::Unit> units;
  std::vector<int> unit_of(R, -1);
  for (const auto& [deg, members] : groups) {
    if (has_internal[deg]) {
      for (int f : members) unit_of[f] = static_cast<int>(units.size());
      units.push_back({members, deg, true});
    } else {
      for (int f : members) {
        unit_of[f] = static_cast<int>(units.size());
        units.push_back({{f}, deg, false});
      }
    }
  }
  const int U = static_cast<int>(units.size());
  if (U > 20) throw OracleUnsupported("oracle_hn_type: too many units");

  // closure: a block (i,j) sends factor j into factor i
  std::vector<unsigned> requires_mask(U, 0u);
  for (const HiggsBlock& b : config.blocks) {
    if (b.kind == BlockKind::constant && b.value == 0.0) continue;
    const int ui = unit_of[b.i], uj = unit_of[b.j];
    if (ui != uj) requires_mask[uj] |= 1u << ui;
  }
  auto closed = [&](unsigned m) {
    for (int u = 0; u < U; ++u)
      if ((m >> u & 1u) && (requires_mask[u] & ~m)) return false;
    return true;
  };
  auto stats = [&](unsigned m) {
    long long deg = 0, rk = 0;
    for (int u = 0; u < U; ++u)
      if (m >> u & 1u) {
        deg += static_cast<long long>(units[u].degree) * static_cast<long long>(units[u].factors.size());
        rk += static_cast<long long>(units[u].factors.size());
      }
    return std::pair{deg, rk};
  };

  OracleResult out;
  const unsigned full = U == 32 ? ~0u : ((1u << U) - 1u);
  unsigned current = 0;
  std::vector<unsigned> chain;
  while (current != full) {
    const auto [d0, r0] = stats(current);
    bool found = false;
    Rational best_mu;
    long long best_rank = 0;
    unsigned best = 0;
    for (unsigned m = 1; m <= full; ++m) {
      if ((m & current) != current || m == current || !closed(m)) continue;
      const auto [dm, rm] = stats(m);
      const Rational mu = slope(Rational(dm - d0), rm - r0);
      if (!found || mu > best_mu || (mu == best_mu && rm > best_rank)) {
        found = true;
        best_mu = mu;
        best_rank = rm;
        best = m;
      }
    }
    const auto [db, rb] = stats(best);
    std::vector<int> factors;
    for (int u = 0; u < U; ++u)
      if (best >> u & 1u)
        for (int f : units[u].factors) factors.push_back(f);
    std::sort(factors.begin(), factors.end());
    out.hn.steps.push_back({detail::columns_of(R, factors), Rational(db), best_mu});
    for (long long k = 0; k < rb - r0; ++k) out.type.mu.push_back(best_mu);
    chain.push_back(best);
    current = best;
  }

  // HNS: refine each HN quotient into line pieces. Plain factors in closure
  // order; a group with internal blocks along its Schur flag.
  unsigned prev = 0;
  Eigen::MatrixXcd acc(R, 0);
  long long acc_deg = 0;
  auto push = [&](const Eigen::VectorXcd& v, int deg) {
    acc.conservativeResize(Eigen::NoChange, acc.cols() + 1);
    acc.col(acc.cols() - 1) = v;
    acc_deg += deg;
    out.hns.steps.push_back({acc, Rational(acc_deg), Rational(deg)});
    out.graded_slopes.push_back(Rational(deg));
  };
  for (unsigned step : chain) {
    unsigned inside = prev;
    const unsigned piece = step & ~prev;
    while (inside != step) {
      int pick = -1;
      for (int u = 0; u < U && pick < 0; ++u)
        if ((piece >> u & 1u) && !(inside >> u & 1u) && closed(inside | (1u << u))) pick = u;
      if (pick < 0) throw OracleUnsupported("oracle_hn_type: no closed refinement of an HN quotient");
      const detail::Unit& unit = units[pick];
      if (!unit.internal) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(R);
        v(unit.factors[0]) = 1.0;
        push(v, unit.degree);
      } else {
        const int k = static_cast<int>(unit.factors.size());
        Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(k, k);
        for (const HiggsBlock& b : config.blocks) {
          const auto ia = std::find(unit.factors.begin(), unit.factors.end(), b.i);
          const auto ja = std::find(unit.factors.begin(), unit.factors.end(), b.j);
          if (ia != unit.factors.end() && ja != unit.factors.end())
            c(ia - unit.factors.begin(), ja - unit.factors.begin()) = b.value;
        }
        // the leading Schur vectors span C-invariant subspaces
        Eigen::ComplexSchur<Eigen::MatrixXcd> schur(c);
        const Eigen::MatrixXcd& q = schur.matrixU();
        for (int col = 0; col < k; ++col) {
          Eigen::VectorXcd v = Eigen::VectorXcd::Zero(R);
          for (int r = 0; r < k; ++r) v(unit.factors[r]) = q(r, col);
          push(v, unit.degree);
        }
      }
      inside |= 1u << pick;
    }
    prev = step;
  }
  return out;
}

struct StepCheck {
  int index = 0;
  int rank = 0;
  double declared_degree = 0.0;
  double measured_degree = 0.0;
  WhcResiduals whc;
  bool degree_ok = false;
  bool whc_ok = false;
  bool ok() const { return degree_ok && whc_ok; }
};

struct FiltrationReport {
  std::vector<StepCheck> steps;
  bool ok() const {
    return std::all_of(steps.begin(), steps.end(), [](const StepCheck& s) { return s.ok(); });
  }
  int first_failure() const {
    for (const auto& s : steps)
      if (!s.ok()) return s.index;
    return -1;
  }
};

/// Checks every step at the reference metric: weak holomorphy residuals below
/// `whc_tol` and the projection degree formula against the declared degree.
template <int R>
FiltrationReport validate_filtration(const FiltrationSpec& spec, const Evaluation<R>& e, double whc_tol = 1e-6) {
  FiltrationReport rep;
  const double deg_tol = 5.0 / e.h.grid().n();
  int last_rank = 0;
  for (std::size_t i = 0; i < spec.steps.size(); ++i) {
    const FiltrationStep& st = spec.steps[i];
    if (st.rank() <= last_rank) throw InputError("validate_filtration: ranks must strictly increase");
    last_rank = st.rank();
    const MatrixField<R> pi = subbundle_projector(st.basis, e);
    StepCheck c;
    c.index = static_cast<int>(i);
    c.rank = st.rank();
    c.declared_degree = to_double(st.degree);
    c.measured_degree = degree_via_projection(pi, e);
    c.whc = whc_residuals(pi, e);
    c.degree_ok = std::abs(c.measured_degree - c.declared_degree) <= deg_tol;
    c.whc_ok = c.whc.max() < whc_tol;
    rep.steps.push_back(c);
  }
  return rep;
}

template <int R>
FiltrationReport validate_filtration(const FiltrationSpec& spec, const BundleConfig& config, const TorusGrid& grid) {
  const Background<R> bg = build_background<R>(config, grid);
  const HiggsField<R> higgs = build_higgs(config, bg);
  return validate_filtration<R>(spec, evaluate(initial_state(bg), higgs, bg));
}

/// Pair-frame projectors of a filtration in the evolving metric.
template <int R>
std::vector<MatrixField<R>> filtration_projectors(const FiltrationSpec& spec, const Evaluation<R>& e) {
  std::vector<MatrixField<R>> out;
  for (const auto& st : spec.steps) out.push_back(subbundle_projector(st.basis, e));
  return out;
}

struct TypeEstimate {
  std::vector<double> lambda;
  double spatial_dev = 0.0;
};

/// Spatial mean of the descending site eigenvalues and the max deviation from it.
template <int R>
TypeEstimate estimate_limit_type(const MeanCurvature<R>& s) {
  const auto w = site_eigenvalues(s);
  Eigen::Matrix<double, R, 1> mean = Eigen::Matrix<double, R, 1>::Zero();
  for (const auto& v : w) mean += v;
  mean /= static_cast<double>(w.size());
  TypeEstimate out;
  for (const auto& v : w) out.spatial_dev = std::max(out.spatial_dev, (v - mean).cwiseAbs().maxCoeff());
  for (int j = 0; j < R; ++j) out.lambda.push_back(mean(j));
  return out;
}

enum class Dominance { less_equal, greater_equal, equal, incomparable };

inline const char* to_string(Dominance d) {
  switch (d) {
    case Dominance::less_equal: return "less-equal";
    case Dominance::greater_equal: return "greater-equal";
    case Dominance::equal: return "equal";
    case Dominance::incomparable: return "incomparable";
  }
  return "?";
}

/// Partial-sum order: mu <= lam iff sum_{i<=k} mu_i <= sum_{i<=k} lam_i for all k.
inline Dominance dominance_compare(const std::vector<double>& mu, const std::vector<double>& lam, double tol = 1e-9) {
  if (mu.size() != lam.size()) throw DomainError("dominance_compare: length mismatch");
  double sm = 0, sl = 0;
  bool le = true, ge = true;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    sm += mu[k];
    sl += lam[k];
    if (sm > sl + tol) le = false;
    if (sm < sl - tol) ge = false;
  }
  if (std::abs(sm - sl) > tol) throw DomainError("dominance_compare: totals differ");
  if (le && ge) return Dominance::equal;
  if (le) return Dominance::less_equal;
  if (ge) return Dominance::greater_equal;
  return Dominance::incomparable;
}

inline Dominance dominance_compare(const HNType& mu, const HNType& lam) {
  return dominance_compare(mu.values(), lam.values());
}

/// Largest partial-sum shortfall of lam below mu (<= 0 when lam dominates).
inline double dominance_defect(const std::vector<double>& mu, const std::vector<double>& lam) {
  double sm = 0, sl = 0, worst = -1e300;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    sm += mu[k];
    sl += lam[k];
    worst = std::max(worst, sm - sl);
  }
  return worst;
}

struct Cluster {
  double value = 0.0;
  int multiplicity = 0;
};

enum class GradedStatus { pass, fail, indeterminate };

inline const char* to_string(GradedStatus s) {
  switch (s) {
    case GradedStatus::pass: return "pass";
    case GradedStatus::fail: return "fail";
    case GradedStatus::indeterminate: return "indeterminate";
  }
  return "?";
}

struct GradedReport {
  GradedStatus status = GradedStatus::fail;
  std::vector<Cluster> clusters;
  std::vector<Cluster> expected;
  std::vector<WhcResiduals> whc;
  std::string reason;
};

/// Groups a descending vector into clusters whose neighbours differ by < merge_tol.
inline std::vector<Cluster> cluster_values(const std::vector<double>& lam, double merge_tol) {
  std::vector<Cluster> out;
  for (std::size_t i = 0; i < lam.size(); ++i) {
    if (!out.empty() && std::abs(lam[i - 1] - lam[i]) < merge_tol) {
      Cluster& c = out.back();
      c.value = (c.value * c.multiplicity + lam[i]) / (c.multiplicity + 1);
      ++c.multiplicity;
    } else {
      out.push_back({lam[i], 1});
    }
  }
  return out;
}

/// Pair-frame spectral projectors onto the top k clusters, k = 1..clusters-1,
/// using the per-site descending eigenbasis of S.
template <int R>
std::vector<MatrixField<R>> cluster_flag_projectors(const MeanCurvature<R>& s, const std::vector<Cluster>& clusters) {
  std::vector<MatrixField<R>> out;
  int cum = 0;
  for (std::size_t k = 0; k + 1 < clusters.size(); ++k) {
    cum += clusters[k].multiplicity;
    MatrixField<R> pi(s.s.grid(), FormDegree::zero, s.s.sector());
    for (int i = 0; i < pi.size(); ++i) {
      Eigen::SelfAdjointEigenSolver<Mat<R>> es(hermitian_part<R>(s.s[i]));
      // ascending order: the top `cum` eigenvectors are the last columns
      const auto v = es.eigenvectors().rightCols(cum);
      pi[i] = v * v.adjoint();
    }
    out.push_back(std::move(pi));
  }
  return out;
}

/// Compares the limit spectrum with the oracle's graded pieces and checks
/// that the cluster projections split holomorphically.
template <int R>
GradedReport seshadri_graded_check(const OracleResult& oracle, const Evaluation<R>& e, double type_tol = 0.02,
                                   double whc_tol = 1e-3) {
  GradedReport rep;
  const MeanCurvature<R> s = mean_curvature(e, Frame::pair);
  const TypeEstimate est = estimate_limit_type(s);
  const double merge_tol = 2.0 * type_tol;
  rep.clusters = cluster_values(est.lambda, merge_tol);

  std::vector<double> graded;
  for (Rational r : oracle.graded_slopes) graded.push_back(to_double(r));
  std::sort(graded.begin(), graded.end(), std::greater<>());
  rep.expected = cluster_values(graded, 1e-12);

  for (std::size_t k = 1; k < rep.clusters.size(); ++k) {
    if (rep.clusters[k - 1].value - rep.clusters[k].value < 10.0 * est.spatial_dev) {
      rep.status = GradedStatus::indeterminate;
      rep.reason = "cluster gap below 10*spatial_dev";
      return rep;
    }
  }
  if (rep.clusters.size() != rep.expected.size()) {
    rep.reason = "cluster count " + std::to_string(rep.clusters.size()) + " != graded " +
                 std::to_string(rep.expected.size());
    return rep;
  }
  for (std::size_t k = 0; k < rep.clusters.size(); ++k) {
    if (rep.clusters[k].multiplicity != rep.expected[k].multiplicity ||
        std::abs(rep.clusters[k].value - rep.expected[k].value) > type_tol) {
      rep.reason = "cluster " + std::to_string(k) + " does not match graded slope";
      return rep;
    }
  }
  for (const auto& pi : cluster_flag_projectors(s, rep.clusters)) {
    rep.whc.push_back(whc_residuals(pi, e));
    if (rep.whc.back().max() >= whc_tol) {
      rep.reason = "cluster projection fails weak holomorphy";
      return rep;
    }
  }
  rep.status = GradedStatus::pass;
  return rep;
}

}  // namespace ymh
