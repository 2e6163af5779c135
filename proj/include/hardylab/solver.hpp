#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "hardylab/energy.hpp"

namespace hardylab {

enum class CapacityRoute { direct, simplified };

struct SolverOptions {
  int max_iters = 50000;
  double tol_energy = 1e-10;
  double tol_grad = 1e-8;
  int multistarts = 3;
  std::uint64_t seed = 0;
  CapacityRoute route = CapacityRoute::direct;
  /// Consecutive iterations with relative energy change below tol_energy
  /// after which the iteration stops as stagnated.
  int stagnation_window = 10;
  /// Worker threads for independent sweeps (not a numerical setting).
  int jobs = 1;
};

/// Outcome of one variational computation.
///
/// `value` is always the functional evaluated at the (feasible) minimizer,
/// hence an upper bound for the discrete infimum. `residual` is the relative
/// projected-gradient norm; converged implies residual <= tol_grad.
struct VariationalResult {
  double value = 0.0;
  ScalarField minimizer;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double multistart_spread = 0.0;
  std::vector<std::string> warnings;
};

template <class F>
concept SmoothObjective = requires(const F& f, std::span<const double> x, std::span<double> g) {
  { f.value(x) } -> std::convertible_to<double>;
  f.gradient(x, g);
  { f.preconditioner(x) } -> std::same_as<Eigen::SparseMatrix<double>>;
};

/// Objectives whose gradient is a difference of large terms report the
/// size of those terms, used to make the residual relative.
template <class F>
concept ScaledObjective = SmoothObjective<F> && requires(const F& f, std::span<const double> x) {
  { f.gradient_scale(x) } -> std::convertible_to<double>;
};

/// Quotient objectives offering the Lagrangian Hessian H_Q - theta R H_G,
/// which turns the preconditioned step into a shifted inverse iteration.
template <class F>
concept ShiftableObjective = SmoothObjective<F> && requires(const F& f, std::span<const double> x, double theta) {
  { f.shifted_preconditioner(x, theta) } -> std::same_as<Eigen::SparseMatrix<double>>;
};

template <class F>
concept NormalizingObjective = SmoothObjective<F> && requires(const F& f, std::span<double> x) { f.normalize(x); };

struct SolveOutcome {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::string stop_reason;
};

namespace detail {

inline double projected_residual(std::span<const double> x, std::span<const double> g, std::span<const double> lo,
                                 std::span<const double> hi, std::vector<std::uint8_t>& free, double scale = 0.0) {
  double res = 0.0;
  free.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(g[i]));
    if (lo[i] >= hi[i]) continue;
    double mag = 1.0;
    if (std::isfinite(lo[i])) mag = std::max(mag, std::abs(lo[i]));
    if (std::isfinite(hi[i])) mag = std::max(mag, std::abs(hi[i]));
    const double tol = 1e-14 * mag;
    const bool at_lo = x[i] <= lo[i] + tol && g[i] > 0.0;
    const bool at_hi = x[i] >= hi[i] - tol && g[i] < 0.0;
    if (at_lo || at_hi) continue;
    free[i] = 1;
    res = std::max(res, std::abs(g[i]));
  }
  return scale > 0.0 ? res / scale : 0.0;
}

/// Solves H_ff d = -g_f on the free index set; falls back to Jacobi scaling
/// when the restricted matrix cannot be factorized. With `strict` set, an
/// empty vector is returned instead whenever H_ff is not positive definite.
inline std::vector<double> preconditioned_direction(const Eigen::SparseMatrix<double>& H, std::span<const double> g,
                                                    const std::vector<std::uint8_t>& free, bool strict = false) {
  const std::size_t n = g.size();
  std::vector<int> map(n, -1);
  int nf = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (free[i]) map[i] = nf++;
  std::vector<double> d(n, 0.0);
  if (nf == 0) return d;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(H.nonZeros()));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(nf);
  for (int col = 0; col < H.outerSize(); ++col) {
    if (map[col] < 0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(H, col); it; ++it) {
      const int r = map[it.row()];
      if (r < 0) continue;
      trip.emplace_back(r, map[col], it.value());
      if (r == map[col]) diag[r] += it.value();
    }
  }
  Eigen::VectorXd rhs(nf);
  for (std::size_t i = 0; i < n; ++i)
    if (map[i] >= 0) rhs[map[i]] = -g[i];

  Eigen::SparseMatrix<double> Hf(nf, nf);
  Hf.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hf);
  Eigen::VectorXd sol;
  bool ok = ldlt.info() == Eigen::Success;
  if (strict && (!ok || !(ldlt.vectorD().minCoeff() > 0.0))) return {};
  if (ok) {
    sol = ldlt.solve(rhs);
    ok = ldlt.info() == Eigen::Success && sol.allFinite() && sol.dot(rhs) > 0.0;
  }
  if (!ok) {
    sol.resize(nf);
    for (int i = 0; i < nf; ++i) sol[i] = rhs[i] / (diag[i] > 0.0 ? diag[i] : 1.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (map[i] >= 0) d[i] = sol[map[i]];
  return d;
}

inline double quad_form(const Eigen::SparseMatrix<double>& H, const std::vector<double>& s) {
  Eigen::Map<const Eigen::VectorXd> v(s.data(), static_cast<Eigen::Index>(s.size()));
  return v.dot(H * v);
}

template <SmoothObjective F>
double residual_scale(const F& f, std::span<const double> x) {
  if constexpr (ScaledObjective<F>) return f.gradient_scale(x);
  return 0.0;
}

template <SmoothObjective F>
double objective_residual(const F& f, std::span<const double> x, std::span<const double> g, std::span<const double> lo,
                          std::span<const double> hi, std::vector<std::uint8_t>& free) {
  return projected_residual(x, g, lo, hi, free, residual_scale(f, x));
}

}  // namespace detail

/// Minimizes a smooth objective over the box lo <= x <= hi (lo == hi pins a
/// node) by a two-metric projected gradient method: free variables are
/// preconditioned with the objective's sparse Hessian approximation, the step
/// length is a Barzilai-Borwein estimate in that metric, and Armijo
/// backtracking along the projected path enforces monotone decrease.
template <SmoothObjective F>
SolveOutcome minimize_projected(const F& f, std::vector<double> x, const std::vector<double>& lo,
                                const std::vector<double>& hi, const SolverOptions& opts) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  if constexpr (NormalizingObjective<F>) f.normalize(x);

  SolveOutcome out;
  std::vector<double> g(n), gn(n), xn(n), s_prev, y_prev;
  std::vector<std::uint8_t> free;
  double fx = f.value(x);
  f.gradient(x, g);
  int stagnant = 0;
  double window_residual = 0.0;
  out.stop_reason = "max_iters";
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    out.residual = detail::objective_residual(f, x, g, lo, hi, free);
    if (out.residual <= opts.tol_grad) {
      out.stop_reason = "gradient";
      break;
    }
    std::vector<double> d;
    if constexpr (ShiftableObjective<F>) {
      for (double theta : {0.99, 0.9}) {
        d = detail::preconditioned_direction(f.shifted_preconditioner(x, theta), g, free, true);
        if (!d.empty()) break;
      }
    }
    const Eigen::SparseMatrix<double> H = f.preconditioner(x);
    if (d.empty()) d = detail::preconditioned_direction(H, g, free);

    double alpha = 1.0;
    if (!NormalizingObjective<F> && !s_prev.empty()) {
      double sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) sy += s_prev[i] * y_prev[i];
      if (sy > 0.0) alpha = std::clamp(detail::quad_form(H, s_prev) / sy, 1e-3, 1e3);
    }

    bool accepted = false, have_gn = false;
    double fn = fx;
    for (int ls = 0; ls < 60; ++ls) {
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xn[i] = free[i] ? std::clamp(x[i] + alpha * d[i], lo[i], hi[i]) : x[i];
        decrease += g[i] * (xn[i] - x[i]);
      }
      if constexpr (NormalizingObjective<F>) f.normalize(xn);
      fn = f.value(xn);
      const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(fx);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * decrease + noise) {
        accepted = true;
        break;
      }
      // Below the summation noise of f the values cannot rank the full
      // step; fall back to the projected residual.
      const double sum_noise = noise * std::sqrt(static_cast<double>(n));
      if (ls == 0 && std::isfinite(fn) && std::abs(decrease) <= sum_noise && std::abs(fn - fx) <= sum_noise) {
        std::vector<std::uint8_t> free_n;
        f.gradient(xn, gn);
        have_gn = true;
        if (detail::objective_residual(f, xn, gn, lo, hi, free_n) < 0.5 * out.residual) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.stop_reason = "line_search";
      break;
    }
    if (!have_gn || alpha != 1.0) f.gradient(xn, gn);
    s_prev.resize(n);
    y_prev.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s_prev[i] = xn[i] - x[i];
      y_prev[i] = gn[i] - g[i];
    }
    const double change = std::abs(fx - fn);
    if (change <= opts.tol_energy * std::max(std::abs(fx), std::numeric_limits<double>::min())) {
      if (stagnant == 0) window_residual = out.residual;
      ++stagnant;
      // The residual still shrinking means the energy has merely reached
      // rounding level; keep iterating.
      if (out.residual < 0.5 * window_residual) stagnant = 0;
    } else {
      stagnant = 0;
    }
    x.swap(xn);
    g.swap(gn);
    fx = fn;
    if (stagnant >= opts.stagnation_window) {
      out.stop_reason = "energy_stagnation";
      ++it;
      break;
    }
  }
  out.residual = detail::objective_residual(f, x, g, lo, hi, free);
  out.converged = out.residual <= opts.tol_grad;
  out.iterations = it;
  out.value = fx;
  out.x = std::move(x);
  return out;
}

/// Q_{p,A,V} as an objective.
struct EnergyObjective {
  const Problem* problem;
  double value(std::span<const double> x) const { return energy_Q(*problem, x); }
  void gradient(std::span<const double> x, std::span<double> g) const { energy_gradient(*problem, x, g); }
  Eigen::SparseMatrix<double> preconditioner(std::span<const double> x) const { return assemble_hessian(*problem, x); }
};

/// E_u(psi) as an objective in the quotient psi = phi / u.
struct SimplifiedEnergyObjective {
  const Problem* problem;
  const std::vector<double>* u;
  double value(std::span<const double> x) const { return simplified_energy(*problem, *u, x); }
  void gradient(std::span<const double> x, std::span<double> g) const { simplified_energy_gradient(*problem, *u, x, g); }
  Eigen::SparseMatrix<double> preconditioner(std::span<const double> x) const {
    // Kinetic Hessian of u-weighted Dirichlet energy; adequate up to scaling.
    Problem weighted = Problem::make(problem->geometry, 2.0);
    std::vector<CellMatrix> cells(problem->geometry->num_cells());
    const CellField ubar = cell_average(ScalarField(problem->geometry, *u));
    double scale = 0.0;
    const double gmax = detail::max_gradient_norm(*problem, x);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double w = ubar[c] * ubar[c] * std::pow(std::max(ubar[c] * gmax, 1e-300), problem->p - 2.0);
      scale = std::max(scale, w);
      const CellMatrix& a = problem->A[c];
      cells[c] = {w * a.a11, w * a.a12, w * a.a22};
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!(cells[c].a11 > 1e-12 * scale)) cells[c] = {1e-12 * scale, 0.0, 1e-12 * scale};
    }
    weighted.A = CoefficientA(problem->geometry, std::move(cells));
    return assemble_hessian(weighted, x, false);
  }
};

/// Rayleigh quotient Q(phi) / int |g||phi|^p, kept on the unit constraint
/// surface by rescaling after every step.
struct RayleighObjective {
  const Problem* problem;

  double value(std::span<const double> x) const {
    const double G = weight_integral(*problem, x);
    if (!(G > 0.0)) return std::numeric_limits<double>::infinity();
    return energy_Q(*problem, x) / G;
  }
  void gradient(std::span<const double> x, std::span<double> out) const {
    const double G = weight_integral(*problem, x);
    const double R = energy_Q(*problem, x) / G;
    std::vector<double> gw(x.size());
    energy_gradient(*problem, x, out);
    weight_gradient(*problem, x, gw);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (out[i] - R * gw[i]) / G;
  }
  Eigen::SparseMatrix<double> preconditioner(std::span<const double> x) const {
    const double G = weight_integral(*problem, x);
    return assemble_hessian(*problem, x) / G;
  }
  Eigen::SparseMatrix<double> shifted_preconditioner(std::span<const double> x, double theta) const {
    const double G = weight_integral(*problem, x);
    const double R = energy_Q(*problem, x) / G;
    Eigen::SparseMatrix<double> H = assemble_hessian(*problem, x) - (theta * R) * assemble_weight_hessian(*problem, x);
    return H / G;
  }
  double gradient_scale(std::span<const double> x) const {
    const double G = weight_integral(*problem, x);
    const double R = energy_Q(*problem, x) / G;
    std::vector<double> gq(x.size()), gw(x.size());
    energy_gradient(*problem, x, gq);
    weight_gradient(*problem, x, gw);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s = std::max({s, std::abs(gq[i]), R * std::abs(gw[i])});
    return s / G;
  }
  void normalize(std::span<double> x) const {
    const double G = weight_integral(*problem, x);
    if (!(G > 0.0)) return;
    const double s = std::pow(G, -1.0 / problem->p);
    for (double& v : x) v *= s;
  }
};

/// Minimizes Q with prescribed values on non-interior nodes (a discrete
/// Dirichlet problem; its minimizer solves the discrete Euler-Lagrange
/// equation Q'[u] = 0 at interior nodes).
inline VariationalResult solve_dirichlet(const Problem& pr, const ScalarField& boundary_values,
                                         const SolverOptions& opts = {}) {
  pr.validate();
  require_same_geometry(pr.geometry, boundary_values.geometry, "solve_dirichlet");
  const Geometry& geo = *pr.geometry;
  const std::size_t n = geo.num_nodes();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(n, -inf), hi(n, inf), x(n, 0.0);
  double mean = 0.0;
  int nb = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!geo.is_interior(i)) {
      lo[i] = hi[i] = x[i] = boundary_values[i];
      mean += boundary_values[i];
      ++nb;
    }
  for (std::size_t i = 0; i < n; ++i)
    if (geo.is_interior(i)) x[i] = nb ? mean / nb : 0.0;
  EnergyObjective obj{&pr};
  SolveOutcome o = minimize_projected(obj, std::move(x), lo, hi, opts);
  VariationalResult r;
  r.value = o.value;
  r.minimizer = ScalarField(pr.geometry, std::move(o.x));
  r.iterations = o.iterations;
  r.residual = o.residual;
  r.converged = o.converged;
  return r;
}

}  // namespace hardylab
