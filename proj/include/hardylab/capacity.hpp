#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hardylab/energy.hpp"
#include "hardylab/family.hpp"
#include "hardylab/parallel.hpp"
#include "hardylab/solver.hpp"

namespace hardylab {

namespace detail {

struct CapacityBounds {
  std::vector<double> lo, hi, start;
};

inline CapacityBounds capacity_bounds(const Geometry& geo, const ScalarField& u, const SubsetMask& F,
                                      const SubsetMask* domain) {
  const std::size_t n = geo.num_nodes();
  CapacityBounds b{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const bool free = geo.is_interior(i) && (!domain || domain->contains(i));
    if (!free) continue;
    if (F.contains(i)) {
      b.lo[i] = b.hi[i] = b.start[i] = u[i];
    } else {
      b.hi[i] = u[i];
    }
  }
  return b;
}

inline void check_capacity_inputs(const Problem& pr, const ScalarField& u, const SubsetMask& F, const SubsetMask* domain) {
  pr.validate();
  require_same_geometry(pr.geometry, u.geometry, "capacity");
  require_same_geometry(pr.geometry, F.geometry, "capacity");
  if (!F.inside_interior()) throw DomainError("capacity: F intersects the boundary (" + F.descriptor + ")");
  if (domain) {
    require_same_geometry(pr.geometry, domain->geometry, "capacity");
    if (!F.subset_of(*domain)) throw DomainError("capacity: F is not contained in the domain " + domain->descriptor);
  }
  const Geometry& geo = *pr.geometry;
  for (std::size_t i = 0; i < geo.num_nodes(); ++i)
    if (geo.is_interior(i) && !(u[i] > 0.0)) throw DomainError("capacity: u must be positive on the interior");
}

inline VariationalResult to_result(const Problem& pr, SolveOutcome o) {
  VariationalResult r;
  r.value = o.value;
  r.minimizer = ScalarField(pr.geometry, std::move(o.x));
  r.iterations = o.iterations;
  r.residual = o.residual;
  r.converged = o.converged;
  if (!o.converged) r.warnings.push_back("solver stopped without convergence (" + o.stop_reason + ")");
  return r;
}

inline VariationalResult capacity_direct(const Problem& pr, const CapacityBounds& b, const SolverOptions& opts) {
  std::vector<double> x = b.start;
  int seed_iters = 0;
  if (pr.p != 2.0 || !pr.V.is_zero()) {
    Problem harmonic = Problem::make(pr.geometry, 2.0);
    harmonic.A = pr.A;
    EnergyObjective seed_obj{&harmonic};
    SolveOutcome s = minimize_projected(seed_obj, x, b.lo, b.hi, opts);
    x = std::move(s.x);
    seed_iters = s.iterations;
  }
  EnergyObjective obj{&pr};
  VariationalResult best = to_result(pr, minimize_projected(obj, x, b.lo, b.hi, opts));
  best.iterations += seed_iters;
  if (!pr.V.has_negative() || opts.multistarts <= 0) return best;

  double vmin = best.value, vmax = best.value;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < opts.multistarts; ++k) {
    std::vector<double> x0(b.lo.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = b.lo[i] + unif(rng) * (b.hi[i] - b.lo[i]);
    VariationalResult r = to_result(pr, minimize_projected(obj, std::move(x0), b.lo, b.hi, opts));
    vmin = std::min(vmin, r.value);
    vmax = std::max(vmax, r.value);
    if (r.value < best.value && r.converged) {
      r.iterations += best.iterations;
      best = std::move(r);
    } else {
      best.iterations += r.iterations;
    }
  }
  best.multistart_spread = (vmax - vmin) / std::max(std::abs(best.value), std::numeric_limits<double>::min());
  if (best.multistart_spread > 1e-6)
    best.warnings.push_back("multistart values differ (nonconvex functional): spread " + detail::fmt_num(best.multistart_spread));
  return best;
}

/// Minimizes the simplified energy of the quotient psi = phi / u over
/// 0 <= psi <= 1, psi = 1 on F; reports Q(u psi) as the value.
inline VariationalResult capacity_simplified(const Problem& pr, const ScalarField& u, const CapacityBounds& b,
                                             const SolverOptions& opts) {
  const std::size_t n = b.lo.size();
  std::vector<double> lo(n, 0.0), hi(n, 0.0), x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (b.hi[i] <= 0.0) continue;
    lo[i] = b.lo[i] > 0.0 ? 1.0 : 0.0;
    hi[i] = 1.0;
  }
  Problem harmonic = Problem::make(pr.geometry, 2.0);
  harmonic.A = pr.A;
  EnergyObjective seed_obj{&harmonic};
  SolveOutcome s = minimize_projected(seed_obj, b.start, b.lo, b.hi, opts);
  for (std::size_t i = 0; i < n; ++i) x[i] = b.hi[i] > 0.0 ? std::clamp(s.x[i] / u[i], lo[i], hi[i]) : 0.0;

  SimplifiedEnergyObjective obj{&pr, &u.values};
  SolveOutcome o = minimize_projected(obj, std::move(x), lo, hi, opts);
  for (std::size_t i = 0; i < n; ++i) o.x[i] *= u[i];
  o.value = energy_Q(pr, o.x);
  VariationalResult r = to_result(pr, std::move(o));
  r.iterations += s.iterations;
  return r;
}

inline VariationalResult capacity_on(const Problem& pr, const ScalarField& u, const SubsetMask& F,
                                     const SubsetMask* domain, const SolverOptions& opts) {
  if (F.empty()) {
    VariationalResult r;
    r.minimizer = ScalarField(pr.geometry, 0.0);
    r.converged = true;
    return r;
  }
  check_capacity_inputs(pr, u, F, domain);
  const CapacityBounds b = capacity_bounds(*pr.geometry, u, F, domain);
  VariationalResult r = opts.route == CapacityRoute::simplified ? capacity_simplified(pr, u, b, opts)
                                                                 : capacity_direct(pr, b, opts);
  if (F.count() < 4) r.warnings.push_back("F has fewer than 4 nodes (" + F.descriptor + ")");
  return r;
}

}  // namespace detail

/// Generalized capacity Cap_u(F, Omega): infimum of Q over 0 <= phi <= u,
/// phi = u on F, phi = 0 off the interior. The value is the energy of a
/// feasible field, hence an upper bound for the discrete infimum.
inline VariationalResult capacity(const Problem& pr, const ScalarField& u, const SubsetMask& F,
                                  const SolverOptions& opts = {}) {
  return detail::capacity_on(pr, u, F, nullptr, opts);
}

/// Cap_u(F, Omega_k) over an exhaustion; each element acts as the domain
/// with zero Dirichlet data on the nodes outside it.
inline std::vector<VariationalResult> capacity_decay(const Problem& pr, const ScalarField& u, const SubsetMask& F,
                                                     const std::vector<SubsetMask>& exhaustion,
                                                     const SolverOptions& opts = {}) {
  if (exhaustion.empty()) throw ConfigError("capacity_decay: empty exhaustion");
  if (!F.subset_of(exhaustion.front()))
    throw DomainError("capacity_decay: F must lie inside the smallest exhaustion element");
  std::vector<VariationalResult> out(exhaustion.size());
  parallel_for(exhaustion.size(), opts.jobs,
               [&](std::size_t k) { out[k] = detail::capacity_on(pr, u, F, &exhaustion[k], opts); });
  return out;
}

}  // namespace hardylab
