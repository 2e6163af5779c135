#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hardylab/capacity.hpp"
#include "hardylab/energy.hpp"
#include "hardylab/family.hpp"
#include "hardylab/parallel.hpp"
#include "hardylab/solver.hpp"

namespace hardylab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SetRow {
  std::string set_descriptor;
  double weight_mass = 0.0;
  double capacity = 0.0;
  double ratio = 0.0;
  bool converged = true;
  bool zero_capacity = false;
};

struct HardyReport {
  double mazya_norm = 0.0;
  std::string argmax_set;
  double best_constant_B = 0.0;
  double S_g = kInf;
  double sandwich_ratio = std::numeric_limits<double>::quiet_NaN();
  std::vector<SetRow> per_set_table;
  std::vector<std::string> zero_capacity_sets;
  bool indeterminate = false;
  bool sandwich_holds = true;
  bool converged = true;
  std::vector<std::string> diagnostics;
};

/// sum over cells inside F of m_c |g_c| |ubar_c|^p.
inline double weight_mass(const Problem& pr, const ScalarField& u, const SubsetMask& F) {
  require_same_geometry(pr.geometry, F.geometry, "weight_mass");
  require_same_geometry(pr.geometry, u.geometry, "weight_mass");
  const Geometry& geo = *pr.geometry;
  double sum = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    if (pr.g[c] == 0.0 || !F.contains_cell(c)) continue;
    const CellNodes cn = geo.cell_nodes(c);
    double ubar = 0.0;
    for (int k = 0; k < cn.count; ++k) ubar += u[cn.index[k]];
    ubar /= cn.count;
    sum += geo.cell_measure(c) * std::abs(pr.g[c]) * std::pow(std::abs(ubar), pr.p);
  }
  return sum;
}

/// Discrete Maz'ya norm: max over the family of weight_mass / capacity.
/// Sets whose capacity does not exceed `tol_zero` are listed separately.
inline HardyReport mazya_norm(const Problem& pr, const ScalarField& u, const std::vector<SubsetMask>& family,
                              const SolverOptions& opts = {}, double tol_zero = 1e-12) {
  if (family.empty()) throw ConfigError("mazya_norm: empty set family");
  HardyReport rep;
  rep.per_set_table.resize(family.size());
  parallel_for(family.size(), opts.jobs, [&](std::size_t k) {
    const VariationalResult cap = capacity(pr, u, family[k], opts);
    SetRow& row = rep.per_set_table[k];
    row.set_descriptor = family[k].descriptor;
    row.weight_mass = weight_mass(pr, u, family[k]);
    row.capacity = cap.value;
    row.converged = cap.converged;
    row.zero_capacity = !(cap.value > tol_zero);
    row.ratio = row.zero_capacity ? 0.0 : row.weight_mass / cap.value;
  });
  bool any = false;
  for (const SetRow& row : rep.per_set_table) {
    rep.converged = rep.converged && row.converged;
    if (row.zero_capacity) {
      rep.zero_capacity_sets.push_back(row.set_descriptor);
      continue;
    }
    if (!any || row.ratio > rep.mazya_norm) {
      rep.mazya_norm = row.ratio;
      rep.argmax_set = row.set_descriptor;
    }
    any = true;
  }
  if (!any) {
    rep.indeterminate = true;
    rep.mazya_norm = std::numeric_limits<double>::quiet_NaN();
    rep.diagnostics.push_back("all sets have zero capacity: criticality suspected, norm indeterminate");
  }
  return rep;
}

namespace detail {

inline std::vector<std::uint8_t> free_nodes(const Geometry& geo, const SubsetMask* domain) {
  std::vector<std::uint8_t> free(geo.num_nodes(), 0);
  for (std::size_t i = 0; i < free.size(); ++i) free[i] = geo.is_interior(i) && (!domain || domain->contains(i));
  return free;
}

inline bool constraint_reachable(const Problem& pr, const std::vector<std::uint8_t>& free) {
  const Geometry& geo = *pr.geometry;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    if (pr.g[c] == 0.0) continue;
    const CellNodes cn = geo.cell_nodes(c);
    for (int k = 0; k < cn.count; ++k)
      if (free[cn.index[k]]) return true;
  }
  return false;
}

inline VariationalResult rayleigh_minimize(const Problem& pr, const std::vector<std::uint8_t>& free,
                                           std::vector<double> x0, const SolverOptions& opts) {
  const std::size_t n = free.size();
  std::vector<double> lo(n, 0.0), hi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (free[i]) hi[i] = kInf;
    else x0[i] = 0.0;
  }
  RayleighObjective obj{&pr};
  return to_result(pr, minimize_projected(obj, std::move(x0), lo, hi, opts));
}

}  // namespace detail

/// S_g restricted to test functions supported on `domain` (all interior
/// nodes when null): inf Q(phi) subject to int |g||phi|^p = 1, phi >= 0.
inline VariationalResult best_constant_on(const Problem& pr, const SubsetMask* domain, const SolverOptions& opts = {}) {
  pr.validate();
  const Geometry& geo = *pr.geometry;
  if (domain) require_same_geometry(pr.geometry, domain->geometry, "best_constant");
  const auto free = detail::free_nodes(geo, domain);
  if (!detail::constraint_reachable(pr, free))
    throw DomainError("best_constant: constraint unreachable (g vanishes on the admissible region)");

  std::vector<double> x(geo.num_nodes());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = free[i] ? 1.0 : 0.0;
  int seed_iters = 0;
  if (pr.p != 2.0) {
    Problem quadratic = pr;
    quadratic.p = 2.0;
    VariationalResult seed = detail::rayleigh_minimize(quadratic, free, x, opts);
    x = seed.minimizer.values;
    seed_iters = seed.iterations;
  }
  VariationalResult r = detail::rayleigh_minimize(pr, free, std::move(x), opts);
  r.iterations += seed_iters;
  return r;
}

inline VariationalResult best_constant(const Problem& pr, const SolverOptions& opts = {}) {
  return best_constant_on(pr, nullptr, opts);
}

/// Compares the Maz'ya norm over `family` (augmented by upper level sets of
/// the extremal at `level_quantiles` quantiles) with B_g = 1 / S_g.
inline HardyReport sandwich_check(const Problem& pr, const ScalarField& u, std::vector<SubsetMask> family,
                                  const SolverOptions& opts = {}, int level_quantiles = 10) {
  if (family.empty()) throw ConfigError("sandwich_check: empty set family");
  if (pr.g.is_zero()) {
    HardyReport rep = mazya_norm(pr, u, family, opts);
    rep.S_g = kInf;
    rep.best_constant_B = 0.0;
    rep.sandwich_holds = true;
    rep.diagnostics.push_back("g vanishes identically: both sides are zero");
    return rep;
  }
  const VariationalResult S = best_constant(pr, opts);
  for (int k = 0; k < level_quantiles; ++k) {
    SubsetMask m = level_mask(S.minimizer, static_cast<double>(k) / level_quantiles);
    m.descriptor = "extremal-" + m.descriptor;
    if (!m.empty() && std::find(family.begin(), family.end(), m) == family.end()) family.push_back(std::move(m));
  }
  HardyReport rep = mazya_norm(pr, u, family, opts);
  rep.S_g = S.value;
  rep.best_constant_B = 1.0 / S.value;
  rep.converged = rep.converged && S.converged;
  if (!rep.indeterminate) {
    rep.sandwich_ratio = rep.mazya_norm > 0.0 ? rep.best_constant_B / rep.mazya_norm : kInf;
    rep.sandwich_holds = rep.mazya_norm <= rep.best_constant_B * (1.0 + 1e-3);
  }
  if (!rep.sandwich_holds) rep.diagnostics.push_back("necessity direction violated beyond discretization slack");
  return rep;
}

struct KpReport {
  std::vector<double> partial_integrals;
  std::string verdict;
};

/// int over Omega_k minus K1 of |g| u^p along an exhaustion.
inline KpReport kp_necessary_check(const Problem& pr, const ScalarField& u, const SubsetMask& K1,
                                   const std::vector<SubsetMask>& exhaustion) {
  require_same_geometry(pr.geometry, u.geometry, "kp_necessary_check");
  require_same_geometry(pr.geometry, K1.geometry, "kp_necessary_check");
  if (exhaustion.empty()) throw ConfigError("kp_necessary_check: empty exhaustion");
  const Geometry& geo = *pr.geometry;
  for (std::size_t i = 0; i < geo.num_nodes(); ++i)
    if (geo.is_interior(i) && !(u[i] > 0.0)) throw DomainError("kp_necessary_check: u must be positive on the interior");
  KpReport rep;
  for (const SubsetMask& omega : exhaustion) {
    require_same_geometry(pr.geometry, omega.geometry, "kp_necessary_check");
    double sum = 0.0;
    for (std::size_t c = 0; c < geo.num_cells(); ++c) {
      if (pr.g[c] == 0.0 || !omega.contains_cell(c) || K1.contains_cell(c)) continue;
      const CellNodes cn = geo.cell_nodes(c);
      double ubar = 0.0;
      for (int k = 0; k < cn.count; ++k) ubar += u[cn.index[k]];
      ubar /= cn.count;
      sum += geo.cell_measure(c) * std::abs(pr.g[c]) * std::pow(ubar, pr.p);
    }
    rep.partial_integrals.push_back(sum);
  }
  const auto& s = rep.partial_integrals;
  const double total = s.back();
  const double last = s.size() > 1 ? s.back() - s[s.size() - 2] : 0.0;
  rep.verdict = (total <= 0.0 || last <= 0.05 * total) ? "bounded" : "diverging";
  return rep;
}

struct EmbeddingReport {
  double sup = 0.0;
  double exponent = 0.0;  ///< 1/N + 1/(alpha' p) - 1/p
  std::vector<double> values;
  std::string argmax_set;
};

namespace detail {

/// Power mean (avg of v^s)^{1/s} with cell weights; s = +inf gives max.
inline double power_mean(const std::vector<double>& v, const std::vector<double>& w, double s) {
  if (std::isinf(s)) return *std::max_element(v.begin(), v.end());
  double total = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    total += w[k];
    acc += w[k] * std::pow(v[k], s);
  }
  return std::pow(acc / total, 1.0 / s);
}

}  // namespace detail

/// Supremum over `sets` of
/// |A|^{1/N + 1/(alpha' p) - 1/p} (avg_A u^{alpha' p r / beta'})^{1/(alpha' p r)} (avg_A u^{-p' r})^{1/(p' r)}.
/// beta may be +inf. Averages use the cells inside each set and cell-averaged u.
inline EmbeddingReport weighted_embedding_check(const ScalarField& u, double alpha, double beta, double r, double p,
                                                const std::vector<SubsetMask>& sets) {
  if (sets.empty()) throw ConfigError("weighted_embedding_check: empty set list");
  const Geometry& geo = *u.geometry;
  const int N = geo.dim();
  if (!(p > 1.0)) throw ConfigError("weighted_embedding_check: p must be > 1");
  if (!(alpha >= 1.0 && alpha <= N / p + 1e-12)) throw ConfigError("weighted_embedding_check: alpha must lie in [1, N/p]");
  if (!(beta >= 1.0)) throw ConfigError("weighted_embedding_check: beta must be >= 1");
  if (!(r > 1.0)) throw ConfigError("weighted_embedding_check: r must be > 1");

  const double inv_ap = 1.0 - 1.0 / alpha;                     // 1/alpha'
  const double inv_bp = std::isinf(beta) ? 1.0 : 1.0 - 1.0 / beta;  // 1/beta'
  const double pprime = p / (p - 1.0);
  EmbeddingReport rep;
  rep.exponent = 1.0 / N + inv_ap / p - 1.0 / p;
  for (const SubsetMask& A : sets) {
    require_same_geometry(u.geometry, A.geometry, "weighted_embedding_check");
    std::vector<double> vals, w;
    for (std::size_t c = 0; c < geo.num_cells(); ++c) {
      if (!A.contains_cell(c)) continue;
      const CellNodes cn = geo.cell_nodes(c);
      double ubar = 0.0;
      for (int k = 0; k < cn.count; ++k) ubar += u[cn.index[k]];
      ubar /= cn.count;
      if (!(ubar > 0.0)) throw DomainError("weighted_embedding_check: u vanishes on " + A.descriptor);
      vals.push_back(ubar);
      w.push_back(geo.cell_measure(c));
    }
    if (vals.empty()) throw DomainError("weighted_embedding_check: set without cells " + A.descriptor);
    double measure = 0.0;
    for (double m : w) measure += m;
    double second = 1.0;
    if (inv_bp > 0.0) {
      const double s = inv_ap > 0.0 ? p * r * inv_bp / inv_ap : kInf;
      second = std::pow(detail::power_mean(vals, w, s), inv_bp);
    }
    const double third = 1.0 / detail::power_mean(vals, w, -pprime * r);
    const double value = std::pow(measure, rep.exponent) * second * third;
    rep.values.push_back(value);
    if (rep.values.size() == 1 || value > rep.sup) {
      rep.sup = value;
      rep.argmax_set = A.descriptor;
    }
  }
  return rep;
}

/// Discrete L^s norm of a cell field.
inline double lebesgue_norm(const CellField& f, double s) {
  const Geometry& geo = *f.geometry;
  double acc = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) acc += geo.cell_measure(c) * std::pow(std::abs(f[c]), s);
  return std::pow(acc, 1.0 / s);
}

}  // namespace hardylab
