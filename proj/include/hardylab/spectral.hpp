#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hardylab/capacity.hpp"
#include "hardylab/family.hpp"
#include "hardylab/hardy.hpp"
#include "hardylab/parallel.hpp"

namespace hardylab {

struct CurvePoint {
  double parameter = 0.0;
  double S = kInf;
  bool converged = true;
};

struct LocalCurve {
  Point center;
  std::string label;
  std::vector<CurvePoint> points;
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool diverging = false;
};

struct InfinityCurve {
  std::vector<CurvePoint> points;
  std::string trend;  ///< "increasing" or "saturated"
  bool diverging = false;
  double S_overline_infty = kInf;
  double S_infty = kInf;
  std::string note;
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// Local curves diverge when any value is unbounded or log S falls with
/// slope at most -0.5 in log r.
inline void classify_local(LocalCurve& curve) {
  std::vector<double> r, s;
  bool infinite = false;
  for (const CurvePoint& pt : curve.points) {
    if (std::isinf(pt.S)) {
      infinite = true;
    } else if (pt.S > 0.0) {
      r.push_back(pt.parameter);
      s.push_back(pt.S);
    }
  }
  curve.slope = loglog_slope(r, s);
  curve.diverging = infinite || (std::isfinite(curve.slope) && curve.slope <= -0.5);
}

/// The tail diverges when the last value is unbounded or rose at least 20%
/// over the previous exhaustion step.
inline void classify_infinity(InfinityCurve& curve) {
  const auto& pts = curve.points;
  const double last = pts.back().S;
  const double prev = pts.size() > 1 ? pts[pts.size() - 2].S : last;
  curve.diverging = std::isinf(last) || (std::isfinite(prev) && last >= 1.2 * prev);
  curve.trend = curve.diverging ? "increasing" : "saturated";
  curve.S_overline_infty = curve.diverging ? kInf : last;
  curve.S_infty = curve.S_overline_infty;
  curve.note = "ball-complement constant deferred to the exhaustion-complement estimate";
}

namespace detail {

inline CurvePoint restricted_constant(const Problem& pr, const SubsetMask& domain, double parameter,
                                      const SolverOptions& opts) {
  CurvePoint pt{parameter, kInf, true};
  try {
    const VariationalResult r = best_constant_on(pr, &domain, opts);
    pt.S = r.value;
    pt.converged = r.converged;
  } catch (const DomainError&) {
    // g vanishes on the restricted region: the constant is +inf.
  }
  return pt;
}

inline std::string point_label(const Geometry& geo, const Point& p) { return fmt_point(geo, p); }

}  // namespace detail

/// S_g on Omega intersected with B_r(center) (zero Dirichlet data on the
/// sphere), for each radius in decreasing order.
inline LocalCurve local_constant(const Problem& pr, const Point& center, const std::vector<double>& radii,
                                 const SolverOptions& opts = {}) {
  if (radii.empty()) throw ConfigError("local_constant: no radii");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (!(radii[k] < radii[k - 1])) throw ConfigError("local_constant: radii must decrease");
  const GeometryPtr& geo = pr.geometry;
  const double h = geo->spacing();
  if (radii.back() < 4.0 * h * (1.0 - 1e-12))
    throw ResolutionError("local_constant: radius " + detail::fmt_num(radii.back()) + " is below 4 cells");
  LocalCurve curve;
  curve.center = center;
  curve.label = detail::point_label(*geo, center);
  curve.points.resize(radii.size());
  parallel_for(radii.size(), opts.jobs, [&](std::size_t k) {
    const double r = radii[k];
    const SubsetMask ball = mask_where(geo, [&](const Point& p) { return geo->distance(p, center) < r * (1.0 - 1e-12); },
                                       "ball(" + curve.label + "," + detail::fmt_num(r) + ")");
    if (ball.empty()) throw ResolutionError("local_constant: no interior nodes in " + ball.descriptor);
    curve.points[k] = detail::restricted_constant(pr, ball, r, opts);
  });
  classify_local(curve);
  return curve;
}

/// S_g on the complements Omega minus closure(Omega_k) along an exhaustion.
/// The parameter of element k is `parameters[k]` when given, else 2^k.
inline InfinityCurve constant_at_infinity(const Problem& pr, const std::vector<SubsetMask>& exhaustion,
                                          const SolverOptions& opts = {}, std::vector<double> parameters = {}) {
  if (exhaustion.size() < 3) throw ConfigError("constant_at_infinity: exhaustion needs at least 3 elements");
  if (parameters.empty())
    for (std::size_t k = 0; k < exhaustion.size(); ++k) parameters.push_back(std::ldexp(1.0, static_cast<int>(k) + 1));
  if (parameters.size() != exhaustion.size()) throw ConfigError("constant_at_infinity: parameter count mismatch");
  const GeometryPtr& geo = pr.geometry;
  InfinityCurve curve;
  curve.points.resize(exhaustion.size());
  parallel_for(exhaustion.size(), opts.jobs, [&](std::size_t k) {
    require_same_geometry(geo, exhaustion[k].geometry, "constant_at_infinity");
    SubsetMask complement(geo, "complement(" + exhaustion[k].descriptor + ")");
    for (std::size_t i = 0; i < geo->num_nodes(); ++i)
      complement.flags[i] = geo->is_interior(i) && !exhaustion[k].contains(i);
    if (complement.count() < 3) throw ResolutionError("constant_at_infinity: too few nodes in " + complement.descriptor);
    curve.points[k] = detail::restricted_constant(pr, complement, parameters[k], opts);
  });
  classify_infinity(curve);
  return curve;
}

struct CriticalityReport {
  std::vector<double> parameters;
  std::vector<double> values;
  std::vector<bool> converged;
  std::string verdict;
  double extrapolated_limit = std::numeric_limits<double>::quiet_NaN();
};

/// Classifies a capacity decay curve: saturation (last two within 1%) means
/// subcritical-suspected; a decreasing curve whose a + b / log t fit (or
/// Aitken extrapolation) tends to at most 5% of the first value means
/// critical-suspected.
inline void classify_decay(CriticalityReport& rep) {
  const auto& v = rep.values;
  const auto& t = rep.parameters;
  const std::size_t n = v.size();
  if (n < 2) {
    rep.verdict = "indeterminate";
    return;
  }
  if (std::abs(v[n - 1] - v[n - 2]) <= 0.01 * std::abs(v[n - 2])) {
    rep.verdict = "subcritical-suspected";
    rep.extrapolated_limit = v[n - 1];
    return;
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < n; ++k) decreasing = decreasing && v[k] < v[k - 1];
  double limit = std::numeric_limits<double>::quiet_NaN();
  bool log_ok = true;
  for (double tk : t) log_ok = log_ok && tk > 1.0;
  if (log_ok) {
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mx += 1.0 / std::log(t[k]);
      my += v[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double dx = 1.0 / std::log(t[k]) - mx;
      sxy += dx * (v[k] - my);
      sxx += dx * dx;
    }
    if (sxx > 0.0) limit = my - (sxy / sxx) * mx;
  }
  if (n >= 3) {
    const double d1 = v[n - 2] - v[n - 3], d2 = v[n - 1] - v[n - 2];
    if (d1 != d2) {
      const double aitken = v[n - 1] - d2 * d2 / (d2 - d1);
      if (!std::isfinite(limit) || aitken < limit) limit = aitken;
    }
  }
  rep.extrapolated_limit = limit;
  rep.verdict = (decreasing && std::isfinite(limit) && limit <= 0.05 * v.front()) ? "critical-suspected" : "indeterminate";
}

/// Capacity decay of F along the exhaustion, classified by classify_decay.
/// Parameters default to 2^k.
inline CriticalityReport criticality_test(const Problem& pr, const ScalarField& u, const SubsetMask& F,
                                          const std::vector<SubsetMask>& exhaustion, const SolverOptions& opts = {},
                                          std::vector<double> parameters = {}) {
  if (parameters.empty())
    for (std::size_t k = 0; k < exhaustion.size(); ++k) parameters.push_back(std::ldexp(1.0, static_cast<int>(k) + 1));
  if (parameters.size() != exhaustion.size()) throw ConfigError("criticality_test: parameter count mismatch");
  CriticalityReport rep;
  rep.parameters = parameters;
  for (const VariationalResult& r : capacity_decay(pr, u, F, exhaustion, opts)) {
    rep.values.push_back(r.value);
    rep.converged.push_back(r.converged);
  }
  classify_decay(rep);
  return rep;
}

struct GroundState {
  VariationalResult result;  ///< minimizer = normalized ground state, value = shifted energy
  double S = 0.0;
  std::size_t reference_node = 0;
  Problem shifted;           ///< potential V - S |g|
};

namespace detail {

inline std::size_t default_reference_node(const Geometry& geo) {
  const GeometrySpec& s = geo.spec();
  const Point mid{0.5 * (s.lo + s.hi), 0.5 * (s.lo_y + s.hi_y)};
  std::size_t best = geo.num_nodes();
  double best_d = kInf;
  for (std::size_t i = 0; i < geo.num_nodes(); ++i) {
    if (!geo.is_interior(i)) continue;
    const double d = geo.is_2d() ? std::hypot(geo.node(i).x - mid.x, geo.node(i).y - mid.y)
                                 : std::abs(geo.node(i).x - mid.x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (best == geo.num_nodes()) throw ResolutionError("ground_state: no interior nodes");
  return best;
}

/// max over interior nodes of |Q'(phi) - S G'(phi)|, relative to the size of
/// the two terms over all nodes.
inline double euler_lagrange_residual(const Problem& pr, const std::vector<double>& phi, double S) {
  const std::size_t n = phi.size();
  std::vector<double> gq(n), gw(n);
  energy_gradient(pr, phi, gq);
  weight_gradient(pr, phi, gw);
  double res = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scale = std::max({scale, std::abs(gq[i]), S * std::abs(gw[i])});
    if (pr.geometry->is_interior(i)) res = std::max(res, std::abs(gq[i] - S * gw[i]));
  }
  return scale > 0.0 ? res / scale : 0.0;
}

}  // namespace detail

/// Positive minimizer of Q_{p,A,V - S_g |g|} normalized to 1 at a reference
/// interior node (default: nearest the center of the domain box).
inline GroundState ground_state(const Problem& pr, const SolverOptions& opts = {},
                                std::optional<std::size_t> reference = std::nullopt) {
  const VariationalResult best = best_constant(pr, opts);
  const Geometry& geo = *pr.geometry;
  GroundState gs;
  gs.S = best.value;
  gs.result.iterations = best.iterations;
  gs.result.converged = best.converged;
  gs.result.warnings = best.warnings;
  std::vector<double> phi = best.minimizer.values;
  bool sign_change = false;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (geo.is_interior(i) && phi[i] < 0.0) sign_change = true;
    phi[i] = std::abs(phi[i]);
  }
  if (sign_change) gs.result.warnings.push_back("minimizer changed sign; absolute value returned");
  std::size_t ref = reference ? *reference : detail::default_reference_node(geo);
  if (ref >= phi.size() || !geo.is_interior(ref)) throw ConfigError("ground_state: reference node is not interior");
  if (!(phi[ref] > 0.0)) {
    ref = static_cast<std::size_t>(std::max_element(phi.begin(), phi.end()) - phi.begin());
    gs.result.warnings.push_back("ground state vanishes at the reference node; normalized at its maximum");
  }
  const double scale = 1.0 / phi[ref];
  for (double& v : phi) v *= scale;
  bool positive = true;
  for (std::size_t i = 0; i < phi.size(); ++i) positive = positive && (!geo.is_interior(i) || phi[i] > 0.0);
  if (!positive) gs.result.warnings.push_back("ground state vanishes at some interior nodes");

  gs.reference_node = ref;
  gs.shifted = pr;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) gs.shifted.V[c] = pr.V[c] - gs.S * std::abs(pr.g[c]);
  gs.result.residual = detail::euler_lagrange_residual(pr, phi, gs.S);
  gs.result.value = energy_Q(gs.shifted, phi);
  gs.result.minimizer = ScalarField(pr.geometry, std::move(phi));
  return gs;
}

struct SpectralProfile {
  double S_global = kInf;
  bool S_global_converged = true;
  std::vector<LocalCurve> local_curves;
  double S_star = kInf;
  double S_infty = kInf;
  double S_overline_infty = kInf;
  InfinityCurve at_infinity;
  bool gap_verdict = false;
  double gap_margin = 0.15;
  std::vector<Point> sigma_set;
  std::vector<std::string> notes;

  bool witness_available = false;
  double witness_residual = std::numeric_limits<double>::quiet_NaN();
  double witness_constraint = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

/// The gap holds when S_global lies below both min(S*, S_inf) and the
/// exhaustion constant by the relative margin.
inline bool gap_holds(double S, double S_star, double S_infty, double S_overline, double margin) {
  const double local = std::min(S_star, S_infty);
  auto below = [&](double bound) { return std::isinf(bound) || S < bound * (1.0 - margin); };
  return below(local) && below(S_overline);
}

namespace detail {

inline SpectralProfile build_profile(const Problem& pr, const VariationalResult& global,
                                     const std::vector<Point>& centers, const std::vector<double>& radii,
                                     const std::vector<SubsetMask>& exhaustion, const SolverOptions& opts,
                                     double margin) {
  SpectralProfile prof;
  prof.gap_margin = margin;
  prof.S_global = global.value;
  prof.S_global_converged = global.converged;
  for (const Point& c : centers) prof.local_curves.push_back(local_constant(pr, c, radii, opts));
  prof.at_infinity = constant_at_infinity(pr, exhaustion, opts);
  for (const LocalCurve& curve : prof.local_curves) {
    if (curve.diverging) continue;
    prof.sigma_set.push_back(curve.center);
    for (const CurvePoint& pt : curve.points) prof.S_star = std::min(prof.S_star, pt.S);
  }
  prof.S_overline_infty = prof.at_infinity.S_overline_infty;
  prof.S_infty = prof.at_infinity.S_infty;
  prof.notes.push_back(prof.at_infinity.note);
  prof.gap_verdict = gap_holds(prof.S_global, prof.S_star, prof.S_infty, prof.S_overline_infty, margin);

  const double tol = 1e-6 * std::abs(prof.S_global);
  for (const LocalCurve& curve : prof.local_curves)
    for (const CurvePoint& pt : curve.points)
      if (pt.S < prof.S_global - tol) prof.notes.push_back("local constant below S_global at " + curve.label);
  for (const CurvePoint& pt : prof.at_infinity.points)
    if (pt.S < prof.S_global - tol) prof.notes.push_back("exhaustion-complement constant below S_global");
  return prof;
}

}  // namespace detail

/// Global, local and at-infinity constants with the spectral gap verdict.
inline SpectralProfile spectral_profile(const Problem& pr, const std::vector<Point>& centers,
                                        const std::vector<double>& radii, const std::vector<SubsetMask>& exhaustion,
                                        const SolverOptions& opts = {}, double margin = 0.15) {
  const VariationalResult global = best_constant(pr, opts);
  return detail::build_profile(pr, global, centers, radii, exhaustion, opts, margin);
}

/// Spectral profile plus, when a gap is detected, the extremal's
/// Euler-Lagrange residual and constraint value as a numerical witness.
inline SpectralProfile attainment_run(const Problem& pr, const std::vector<SubsetMask>& exhaustion,
                                      const std::vector<Point>& centers, const std::vector<double>& radii,
                                      const SolverOptions& opts = {}, double margin = 0.15) {
  if (centers.empty()) throw ConfigError("attainment_run: no centers");
  const VariationalResult global = best_constant(pr, opts);
  SpectralProfile prof = detail::build_profile(pr, global, centers, radii, exhaustion, opts, margin);
  if (!prof.gap_verdict) {
    prof.message = "no gap detected: attainment not predicted";
    return prof;
  }
  prof.witness_available = true;
  prof.witness_residual = detail::euler_lagrange_residual(pr, global.minimizer.values, global.value);
  prof.witness_constraint = weight_integral(pr, global.minimizer);
  prof.message = "gap detected: constraint-normalized extremal computed";
  return prof;
}

struct CombineReport {
  Problem combined;
  double epsilon = 0.0;
  double S_g = 0.0;
  double S_g0 = 0.0;
  double threshold = 0.0;
  double S_combined = 0.0;
  double upper_bound = 0.0;  ///< Q(phi0) / int (g + eps g0) |phi0|^p at the g0 extremal
  bool above_threshold = false;
  bool strict_decrease = false;
  bool converged = true;
};

/// Problem with weight g + epsilon g0 and the comparison of epsilon with
/// the threshold S_{g0} / S_g.
inline CombineReport combine_weights(const Problem& pr, const CellField& g0, const CellField& g, double epsilon,
                                     const SolverOptions& opts = {}) {
  require_same_geometry(pr.geometry, g0.geometry, "combine_weights");
  require_same_geometry(pr.geometry, g.geometry, "combine_weights");
  if (!(epsilon > 0.0)) throw ConfigError("combine_weights: epsilon must be positive");
  if (g0.is_zero() || g.is_zero()) throw DomainError("combine_weights: weights must be nonzero");
  if (g0.has_negative() || g.has_negative()) throw DomainError("combine_weights: weights must be nonnegative");

  Problem p0 = pr, pg = pr;
  p0.g = g0;
  pg.g = g;
  CombineReport rep;
  rep.epsilon = epsilon;
  rep.combined = pr;
  for (std::size_t c = 0; c < g.size(); ++c) rep.combined.g[c] = g[c] + epsilon * g0[c];

  const VariationalResult r0 = best_constant(p0, opts);
  const VariationalResult rg = best_constant(pg, opts);
  const VariationalResult rc = best_constant(rep.combined, opts);
  rep.S_g0 = r0.value;
  rep.S_g = rg.value;
  rep.S_combined = rc.value;
  rep.threshold = rep.S_g0 / rep.S_g;
  rep.upper_bound = energy_Q(pr, r0.minimizer) / weight_integral(rep.combined, r0.minimizer);
  rep.above_threshold = epsilon > rep.threshold;
  rep.strict_decrease = rep.S_combined < rep.S_g * (1.0 - std::max(opts.tol_grad, 1e-6));
  rep.converged = r0.converged && rg.converged && rc.converged;
  return rep;
}

struct CompactnessReport {
  std::string verdict;
  std::vector<std::string> offenders;
  std::vector<LocalCurve> local_curves;
  InfinityCurve at_infinity;
};

/// Compactness is predicted iff every local curve and the at-infinity curve
/// diverge. Requires V >= 0.
inline CompactnessReport compactness_characterization(const Problem& pr, const std::vector<Point>& centers,
                                                      const std::vector<double>& radii,
                                                      const std::vector<SubsetMask>& exhaustion,
                                                      const SolverOptions& opts = {}) {
  if (pr.V.has_negative()) throw HypothesisError("compactness_characterization: V must be nonnegative");
  CompactnessReport rep;
  for (const Point& c : centers) {
    rep.local_curves.push_back(local_constant(pr, c, radii, opts));
    if (!rep.local_curves.back().diverging) rep.offenders.push_back(rep.local_curves.back().label);
  }
  rep.at_infinity = constant_at_infinity(pr, exhaustion, opts);
  if (!rep.at_infinity.diverging) rep.offenders.push_back("tail");
  rep.verdict = rep.offenders.empty() ? "compactness-predicted" : "not-predicted";
  return rep;
}

}  // namespace hardylab
