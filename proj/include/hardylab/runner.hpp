#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hardylab/capacity.hpp"
#include "hardylab/energy.hpp"
#include "hardylab/expression.hpp"
#include "hardylab/extrapolation.hpp"
#include "hardylab/family.hpp"
#include "hardylab/hardy.hpp"
#include "hardylab/oracles.hpp"
#include "hardylab/parallel.hpp"
#include "hardylab/report.hpp"
#include "hardylab/scenario.hpp"
#include "hardylab/spectral.hpp"

namespace hardylab {

inline constexpr const char* kToolVersion = "1.0.0";

/// Discretized scenario: the problem and, when requested, the positive solution u.
struct Instance {
  Problem problem;
  std::optional<ScalarField> u;
  std::optional<VariationalResult> u_solve;
};

struct CurveRow {
  std::string scope;
  double parameter = 0.0;
  double S_value = 0.0;
  bool converged = true;
};

struct TaskOutcome {
  std::string task;
  json result;
  bool converged = true;
  std::string summary;
  std::vector<SetRow> sets;
  std::vector<CurveRow> curves;
  double primary = std::numeric_limits<double>::quiet_NaN();
};

struct RunOutput {
  json report;
  std::vector<TaskOutcome> tasks;
  bool converged = true;
  std::string sets_csv;
  std::string curves_csv;
};

namespace detail {

inline CellField cell_field(const GeometryPtr& geo, const FieldSpec& f, const std::map<std::string, double>& constants,
                            const char* what) {
  if (f.tabulated) {
    if (f.values.size() != geo->num_cells())
      throw ConfigError(std::string(what) + ": " + std::to_string(f.values.size()) + " values given, geometry has " +
                        std::to_string(geo->num_cells()) + " cells");
    return CellField(geo, f.values);
  }
  const Expression e = Expression::parse(f.expr, constants);
  CellField out = sample_cells(geo, [&](const Point& p) { return e.at(*geo, p); });
  for (std::size_t c = 0; c < out.size(); ++c)
    if (std::isnan(out[c])) throw DomainError(std::string(what) + ": expression '" + f.expr + "' is undefined at a cell midpoint");
  return out;
}

inline ScalarField node_field(const GeometryPtr& geo, const std::string& expr,
                              const std::map<std::string, double>& constants) {
  const Expression e = Expression::parse(expr, constants);
  return sample_nodes(geo, [&](const Point& p) { return e.at(*geo, p); });
}

inline FieldSpec expr_field(const std::string& e) {
  FieldSpec f;
  f.expr = e;
  return f;
}

inline CoefficientA coefficient(const GeometryPtr& geo, const CoefficientSpec& a,
                                const std::map<std::string, double>& constants) {
  switch (a.kind) {
    case CoefficientSpec::Kind::identity: return CoefficientA::identity(geo);
    case CoefficientSpec::Kind::scalar: return CoefficientA::scalar(cell_field(geo, expr_field(a.scalar), constants, "A.scalar"));
    case CoefficientSpec::Kind::matrix: {
      const CellField a11 = cell_field(geo, expr_field(a.matrix[0]), constants, "A.matrix");
      const CellField a12 = cell_field(geo, expr_field(a.matrix[1]), constants, "A.matrix");
      const CellField a22 = cell_field(geo, expr_field(a.matrix[2]), constants, "A.matrix");
      std::vector<CellMatrix> cells(geo->num_cells());
      for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = {a11[c], a12[c], a22[c]};
      return CoefficientA(geo, std::move(cells));
    }
  }
  return CoefficientA::identity(geo);
}

}  // namespace detail

/// Builds the discrete problem. With `solve_u` false a Dirichlet-solved u
/// is left unset (used by validation).
inline Instance build_instance(const Scenario& sc, const SolverOptions& opts, bool solve_u = true) {
  const GeometryPtr geo = Geometry::build(sc.geometry);
  const auto constants = expression_constants(sc);
  Instance in;
  in.problem = Problem::make(geo, sc.p);
  in.problem.A = detail::coefficient(geo, sc.A, constants);
  in.problem.V = detail::cell_field(geo, sc.V, constants, "V");
  in.problem.g = detail::cell_field(geo, sc.g, constants, "g");
  if (sc.u.kind == USpec::Kind::expr) {
    in.u = detail::node_field(geo, sc.u.expr, constants);
    for (std::size_t i = 0; i < geo->num_nodes(); ++i)
      if (geo->is_interior(i) && !((*in.u)[i] > 0.0 && std::isfinite((*in.u)[i])))
        throw DomainError("u: expression '" + sc.u.expr + "' is not positive and finite at interior node " +
                          std::to_string(i));
  } else if (sc.u.kind == USpec::Kind::solve && solve_u) {
    const ScalarField boundary = detail::node_field(geo, sc.u.expr, constants);
    VariationalResult r = solve_dirichlet(in.problem, boundary, opts);
    for (std::size_t i = 0; i < geo->num_nodes(); ++i)
      if (geo->is_interior(i) && !(r.minimizer[i] > 0.0))
        throw DomainError("u: Dirichlet solution is not positive at interior node " + std::to_string(i));
    in.u = r.minimizer;
    in.u_solve = std::move(r);
  }
  in.problem.validate();
  return in;
}

inline SubsetMask build_set(const Instance& in, const SetSpec& s, const std::map<std::string, double>& constants) {
  const GeometryPtr& geo = in.problem.geometry;
  switch (s.kind) {
    case SetSpec::Kind::ball: return ball_mask(geo, s.center, s.radius);
    case SetSpec::Kind::annulus: return annulus_mask(geo, s.center, s.inner, s.outer);
    case SetSpec::Kind::box: return box_mask(geo, s.box[0], s.box[1], s.box[2], s.box[3]);
    case SetSpec::Kind::interior: return interior_mask(geo);
    case SetSpec::Kind::level: {
      if (s.field == "u") {
        if (!in.u) throw ConfigError("level set of u requested but u is not available");
        SubsetMask m = level_mask(*in.u, s.quantile);
        m.descriptor = "u-" + m.descriptor;
        return m;
      }
      SubsetMask m = level_mask(detail::node_field(geo, s.field, constants), s.quantile);
      m.descriptor = s.field + "-" + m.descriptor;
      return m;
    }
  }
  throw UsageError("build_set: unknown kind");
}

inline std::vector<SubsetMask> build_family(const Instance& in, const std::vector<SetSpec>& specs,
                                            const std::map<std::string, double>& constants) {
  std::vector<SubsetMask> out;
  for (const SetSpec& s : specs) {
    SubsetMask m = build_set(in, s, constants);
    if (m.empty() || std::find(out.begin(), out.end(), m) != out.end()) continue;
    out.push_back(std::move(m));
  }
  if (out.empty()) throw ConfigError("family: every set is empty on this grid");
  return out;
}

inline std::vector<SubsetMask> build_exhaustion(const Instance& in, const ExhaustionSpec& e) {
  if (e.count > 0) return exhaustion(in.problem.geometry, e.count);
  return ball_exhaustion(in.problem.geometry, e.radii, e.center);
}

/// Explicit parameters, else the radii of a ball exhaustion, else 2^k.
inline std::vector<double> exhaustion_parameters(const ExhaustionSpec& e, std::size_t n) {
  if (!e.parameters.empty()) {
    if (e.parameters.size() != n) throw ConfigError("exhaustion.parameters: expected " + std::to_string(n) + " values");
    return e.parameters;
  }
  if (!e.radii.empty()) return e.radii;
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(std::ldexp(1.0, static_cast<int>(k) + 1));
  return out;
}

namespace detail {

inline json result_json(const VariationalResult& r) {
  return {{"value", num(r.value)},           {"iterations", r.iterations},
          {"residual", num(r.residual)},     {"converged", r.converged},
          {"multistart_spread", num(r.multistart_spread)}, {"warnings", r.warnings}};
}

inline json sets_json(const std::vector<SetRow>& rows) {
  json out = json::array();
  for (const SetRow& r : rows)
    out.push_back({{"set_descriptor", r.set_descriptor},
                   {"weight_mass", num(r.weight_mass)},
                   {"capacity", num(r.capacity)},
                   {"ratio", num(r.ratio)},
                   {"converged", r.converged},
                   {"zero_capacity", r.zero_capacity}});
  return out;
}

inline json hardy_json(const HardyReport& h) {
  return {{"mazya_norm", num(h.mazya_norm)},
          {"argmax_set", h.argmax_set},
          {"best_constant_B", num(h.best_constant_B)},
          {"S_g", num(h.S_g)},
          {"sandwich_ratio", num(h.sandwich_ratio)},
          {"sandwich_holds", h.sandwich_holds},
          {"indeterminate", h.indeterminate},
          {"zero_capacity_sets", h.zero_capacity_sets},
          {"per_set_table", sets_json(h.per_set_table)},
          {"converged", h.converged},
          {"diagnostics", h.diagnostics}};
}

inline json points_json(const std::vector<CurvePoint>& pts) {
  json out = json::array();
  for (const CurvePoint& p : pts) out.push_back({{"parameter", num(p.parameter)}, {"S", num(p.S)}, {"converged", p.converged}});
  return out;
}

inline json point_json(const Geometry& geo, const Point& p) {
  if (geo.is_2d()) return json::array({num(p.x), num(p.y)});
  return num(p.x);
}

inline bool curve_converged(const std::vector<CurvePoint>& pts) {
  for (const CurvePoint& p : pts)
    if (!p.converged) return false;
  return true;
}

inline json profile_json(const Geometry& geo, const SpectralProfile& prof, TaskOutcome& out) {
  json local = json::array();
  for (const LocalCurve& c : prof.local_curves) {
    local.push_back({{"center", point_json(geo, c.center)},
                     {"label", c.label},
                     {"points", points_json(c.points)},
                     {"slope", num(c.slope)},
                     {"diverging", c.diverging}});
    for (const CurvePoint& p : c.points) out.curves.push_back({"local(" + c.label + ")", p.parameter, p.S, p.converged});
    out.converged = out.converged && curve_converged(c.points);
  }
  for (const CurvePoint& p : prof.at_infinity.points) out.curves.push_back({"infinity", p.parameter, p.S, p.converged});
  out.converged = out.converged && prof.S_global_converged && curve_converged(prof.at_infinity.points);
  json sigma = json::array();
  for (const Point& p : prof.sigma_set) sigma.push_back(point_json(geo, p));
  return {{"S_global", num(prof.S_global)},
          {"S_global_converged", prof.S_global_converged},
          {"local_curves", local},
          {"S_star", num(prof.S_star)},
          {"S_infty", num(prof.S_infty)},
          {"S_overline_infty", num(prof.S_overline_infty)},
          {"at_infinity",
           {{"points", points_json(prof.at_infinity.points)},
            {"trend", prof.at_infinity.trend},
            {"diverging", prof.at_infinity.diverging},
            {"note", prof.at_infinity.note}}},
          {"gap_verdict", prof.gap_verdict},
          {"gap_margin", num(prof.gap_margin)},
          {"sigma_set", sigma},
          {"notes", prof.notes}};
}

inline std::string fmt6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline TaskOutcome run_task(const Scenario& sc, const Instance& in, const TaskSpec& t, const SolverOptions& opts) {
  const auto constants = expression_constants(sc);
  const Problem& pr = in.problem;
  const Geometry& geo = *pr.geometry;
  TaskOutcome out;
  out.task = t.task;
  auto need_u = [&]() -> const ScalarField& {
    if (!in.u) throw ConfigError(t.task + ": u is required");
    return *in.u;
  };

  if (t.task == "capacity") {
    const ScalarField& u = need_u();
    const SubsetMask F = build_set(in, *t.F, constants);
    out.result["F"] = F.descriptor;
    out.result["weight_mass"] = num(weight_mass(pr, u, F));
    if (t.exhaustion) {
      const auto ex = build_exhaustion(in, *t.exhaustion);
      const auto params = exhaustion_parameters(*t.exhaustion, ex.size());
      const auto rs = capacity_decay(pr, u, F, ex, opts);
      json arr = json::array();
      for (std::size_t k = 0; k < rs.size(); ++k) {
        json r = detail::result_json(rs[k]);
        r["domain"] = ex[k].descriptor;
        r["parameter"] = num(params[k]);
        arr.push_back(r);
        out.curves.push_back({"capacity-decay", params[k], rs[k].value, rs[k].converged});
        out.converged = out.converged && rs[k].converged;
      }
      out.result["decay"] = arr;
      out.primary = rs.back().value;
    } else {
      const VariationalResult r = capacity(pr, u, F, opts);
      out.result["capacity"] = detail::result_json(r);
      out.converged = r.converged;
      out.primary = r.value;
    }
    out.summary = "capacity of " + F.descriptor + " = " + detail::fmt6(out.primary);
  } else if (t.task == "hardy-norm") {
    const HardyReport h = mazya_norm(pr, need_u(), build_family(in, t.family, constants), opts);
    out.result = detail::hardy_json(h);
    out.sets = h.per_set_table;
    out.converged = h.converged;
    out.primary = h.mazya_norm;
    out.summary = "mazya_norm = " + detail::fmt6(h.mazya_norm) + " at " + h.argmax_set;
  } else if (t.task == "best-constant") {
    std::optional<SubsetMask> domain;
    if (t.domain) domain = build_set(in, *t.domain, constants);
    const VariationalResult r = best_constant_on(pr, domain ? &*domain : nullptr, opts);
    out.result = detail::result_json(r);
    out.result["S_g"] = num(r.value);
    out.result["B_g"] = num(1.0 / r.value);
    if (domain) out.result["domain"] = domain->descriptor;
    out.converged = r.converged;
    out.primary = r.value;
    out.summary = "S_g = " + detail::fmt6(r.value) + ", B_g = " + detail::fmt6(1.0 / r.value);
  } else if (t.task == "sandwich") {
    const HardyReport h = sandwich_check(pr, need_u(), build_family(in, t.family, constants), opts, t.level_quantiles);
    out.result = detail::hardy_json(h);
    out.sets = h.per_set_table;
    out.converged = h.converged;
    out.primary = h.sandwich_ratio;
    out.summary = "mazya_norm = " + detail::fmt6(h.mazya_norm) + ", B_g = " + detail::fmt6(h.best_constant_B) +
                  ", ratio = " + detail::fmt6(h.sandwich_ratio) + (h.sandwich_holds ? " (holds)" : " (violated)");
  } else if (t.task == "criticality") {
    const ScalarField& u = need_u();
    const SubsetMask F = build_set(in, *t.F, constants);
    const auto ex = build_exhaustion(in, *t.exhaustion);
    const CriticalityReport c = criticality_test(pr, u, F, ex, opts, exhaustion_parameters(*t.exhaustion, ex.size()));
    out.result = {{"F", F.descriptor},
                  {"parameters", num_array(c.parameters)},
                  {"values", num_array(c.values)},
                  {"converged", c.converged},
                  {"verdict", c.verdict},
                  {"extrapolated_limit", num(c.extrapolated_limit)}};
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      out.curves.push_back({"capacity-decay", c.parameters[k], c.values[k], c.converged[k]});
      out.converged = out.converged && c.converged[k];
    }
    out.primary = c.values.back();
    out.summary = "criticality: " + c.verdict + " (last capacity " + detail::fmt6(c.values.back()) + ")";
  } else if (t.task == "spectral-profile" || t.task == "attainment") {
    const auto ex = build_exhaustion(in, *t.exhaustion);
    const SpectralProfile prof = t.task == "attainment" ? attainment_run(pr, ex, t.centers, t.radii, opts, t.margin)
                                                        : spectral_profile(pr, t.centers, t.radii, ex, opts, t.margin);
    out.result = detail::profile_json(geo, prof, out);
    if (t.task == "attainment") {
      out.result["witness_available"] = prof.witness_available;
      out.result["witness_residual"] = num(prof.witness_residual);
      out.result["witness_constraint"] = num(prof.witness_constraint);
      out.result["message"] = prof.message;
    }
    out.primary = prof.S_global;
    out.summary = "S_g = " + detail::fmt6(prof.S_global) + ", S* = " + detail::fmt6(prof.S_star) +
                  ", S_inf_bar = " + detail::fmt6(prof.S_overline_infty) + ", gap " +
                  (prof.gap_verdict ? "detected" : "not detected");
  } else if (t.task == "combine-weights") {
    const CellField g0 = detail::cell_field(pr.geometry, *t.g0, constants, "g0");
    double eps = t.epsilon;
    if (t.epsilon_factor > 0.0) {
      Problem p0 = pr, pg = pr;
      p0.g = g0;
      const double threshold = best_constant(p0, opts).value / best_constant(pg, opts).value;
      eps = t.epsilon_factor * threshold;
    }
    const CombineReport c = combine_weights(pr, g0, pr.g, eps, opts);
    out.result = {{"epsilon", num(c.epsilon)},         {"S_g", num(c.S_g)},
                  {"S_g0", num(c.S_g0)},               {"threshold", num(c.threshold)},
                  {"S_combined", num(c.S_combined)},   {"upper_bound", num(c.upper_bound)},
                  {"above_threshold", c.above_threshold}, {"strict_decrease", c.strict_decrease},
                  {"converged", c.converged}};
    out.converged = c.converged;
    out.primary = c.S_combined;
    out.summary = "S_{g+eps g0} = " + detail::fmt6(c.S_combined) + " vs S_g = " + detail::fmt6(c.S_g) +
                  (c.strict_decrease ? " (strict decrease)" : " (no strict decrease)");
  } else if (t.task == "morrey") {
    const CellField f = t.f ? detail::cell_field(pr.geometry, *t.f, constants, "f") : pr.g;
    const SubsetMask omega = t.omega ? build_set(in, *t.omega, constants) : interior_mask(pr.geometry);
    out.result["omega"] = omega.descriptor;
    out.result["q"] = num(t.q);
    if (!t.deltas.empty()) {
      const MorreyAdamsFit fit = morrey_adams_fit(f, omega, pr.p, t.q, t.deltas, t.trials, sc.seed);
      out.result["morrey_norm"] = num(fit.morrey_norm);
      out.result["deltas"] = num_array(fit.deltas);
      out.result["constants"] = num_array(fit.constants);
      out.result["delta_exponent"] = num(fit.delta_exponent);
      out.result["prefactor"] = num(fit.prefactor);
      out.primary = fit.morrey_norm;
    } else {
      out.primary = morrey_norm(f, omega, t.q, pr.p);
      out.result["morrey_norm"] = num(out.primary);
    }
    out.summary = "morrey_norm = " + detail::fmt6(out.primary);
  } else if (t.task == "oracle") {
    const OracleValue o = evaluate_oracle(t.oracle, t.params);
    json params = json::object();
    for (const auto& [k, v] : o.parameters) params[k] = num(v);
    out.result = {{"name", o.name}, {"params", params}, {"value", num(o.value)}, {"formula", o.formula_note}};
    out.primary = o.value;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", o.value);
    out.summary = o.name + " = " + buf;
  } else if (t.task == "embedding-check") {
    const auto sets = build_family(in, t.family, constants);
    const EmbeddingReport e = weighted_embedding_check(need_u(), t.alpha, t.beta, t.r, pr.p, sets);
    json rows = json::array();
    for (std::size_t k = 0; k < sets.size(); ++k) rows.push_back({{"set", sets[k].descriptor}, {"value", num(e.values[k])}});
    out.result = {{"sup", num(e.sup)}, {"exponent", num(e.exponent)}, {"argmax_set", e.argmax_set}, {"values", rows}};
    out.primary = e.sup;
    out.summary = "embedding sup = " + detail::fmt6(e.sup) + " at " + e.argmax_set;
  } else if (t.task == "kp-check") {
    const SubsetMask K1 = build_set(in, *t.K1, constants);
    const auto ex = build_exhaustion(in, *t.exhaustion);
    const auto params = exhaustion_parameters(*t.exhaustion, ex.size());
    const KpReport k = kp_necessary_check(pr, need_u(), K1, ex);
    out.result = {{"K1", K1.descriptor}, {"parameters", num_array(params)},
                  {"partial_integrals", num_array(k.partial_integrals)}, {"verdict", k.verdict}};
    for (std::size_t i = 0; i < k.partial_integrals.size(); ++i)
      out.curves.push_back({"kp-partial", params[i], k.partial_integrals[i], true});
    out.primary = k.partial_integrals.back();
    out.summary = "kp-check: " + k.verdict;
  } else if (t.task == "energy") {
    const ScalarField phi = detail::node_field(pr.geometry, t.phi, constants);
    if (!phi.all_finite()) throw DomainError("energy: phi is not finite at every node");
    out.primary = energy_Q(pr, phi);
    out.result = {{"Q", num(out.primary)},
                  {"gradient_energy", num(gradient_energy(pr, phi.values))},
                  {"weight_integral", num(weight_integral(pr, phi))}};
    if (in.u) {
      const ScalarField& u = *in.u;
      ScalarField uphi(pr.geometry);
      for (std::size_t i = 0; i < geo.num_nodes(); ++i) uphi[i] = u[i] * phi[i];
      out.result["Q_u_phi"] = num(energy_Q(pr, uphi));
      out.result["simplified_energy"] = num(simplified_energy(pr, u, phi));
    }
    out.summary = "Q(phi) = " + detail::fmt6(out.primary);
  } else {
    throw ConfigError("unknown task '" + t.task + "'");
  }
  out.result["task"] = t.task;
  out.result["converged"] = out.converged;
  return out;
}

/// Runs every task of the scenario. Tasks run concurrently up to `jobs`
/// workers; the report is assembled in task order.
inline RunOutput run_scenario(const Scenario& sc, int jobs = 1) {
  SolverOptions opts = sc.solver;
  opts.jobs = std::max(1, jobs);
  const Instance in = build_instance(sc, opts);

  RunOutput out;
  out.tasks.resize(sc.tasks.size());
  SolverOptions inner = opts;
  if (sc.tasks.size() > 1) inner.jobs = std::max(1, opts.jobs / static_cast<int>(sc.tasks.size()));
  parallel_for(sc.tasks.size(), opts.jobs, [&](std::size_t k) { out.tasks[k] = run_task(sc, in, sc.tasks[k], inner); });

  json results = json::array();
  CsvTable sets({"task", "set_descriptor", "weight_mass", "capacity", "ratio"});
  CsvTable curves({"task", "scope", "parameter", "S_value", "converged"});
  for (const TaskOutcome& t : out.tasks) {
    out.converged = out.converged && t.converged;
    results.push_back(t.result);
    for (const SetRow& r : t.sets)
      sets.add({t.task, r.set_descriptor, csv_num(r.weight_mass), csv_num(r.capacity), csv_num(r.ratio)});
    for (const CurveRow& c : t.curves)
      curves.add({t.task, c.scope, csv_num(c.parameter), csv_num(c.S_value), c.converged ? "true" : "false"});
  }
  if (in.u_solve) out.converged = out.converged && in.u_solve->converged;
  if (!sets.empty()) out.sets_csv = sets.str();
  if (!curves.empty()) out.curves_csv = curves.str();

  const Geometry& geo = *in.problem.geometry;
  json geometry = {{"kind", to_string(geo.kind())},
                   {"dim", geo.dim()},
                   {"bounds", json::array({num(sc.geometry.lo), num(sc.geometry.hi)})},
                   {"resolution", geo.nx()},
                   {"nodes", geo.num_nodes()},
                   {"cells", geo.num_cells()}};
  if (geo.is_2d()) {
    geometry["bounds_y"] = json::array({num(sc.geometry.lo_y), num(sc.geometry.hi_y)});
    geometry["resolution_y"] = geo.ny();
  }
  json report = {{"name", sc.name},
                 {"status", out.converged ? "converged" : "unconverged"},
                 {"converged", out.converged},
                 {"p", num(sc.p)},
                 {"geometry", geometry},
                 {"results", results},
                 {"declared_assumptions", sc.declared_assumptions},
                 {"provenance",
                  {{"config_hash", "fnv1a64:" + fnv1a_hex(sc.source)},
                   {"seed", sc.seed},
                   {"solver", solver_json(sc.solver)},
                   {"tool_version", kToolVersion}}}};
  if (in.u_solve)
    report["u_solve"] = {{"iterations", in.u_solve->iterations},
                         {"residual", num(in.u_solve->residual)},
                         {"converged", in.u_solve->converged}};
  out.report = std::move(report);
  return out;
}

/// Builds everything a run needs short of solving, so that descriptor
/// errors surface without any computation.
inline void check_scenario(const Scenario& sc) {
  const Instance in = build_instance(sc, sc.solver, false);
  const auto constants = expression_constants(sc);
  auto sets_ok = [&](const SetSpec& s) {
    if (s.kind == SetSpec::Kind::level && s.field == "u" && !in.u) return;
    (void)build_set(in, s, constants);
  };
  for (const TaskSpec& t : sc.tasks) {
    for (const auto* s : {&t.F, &t.domain, &t.K1, &t.omega})
      if (*s) sets_ok(**s);
    for (const SetSpec& s : t.family) sets_ok(s);
    if (t.exhaustion) (void)build_exhaustion(in, *t.exhaustion);
    if (t.g0) (void)detail::cell_field(in.problem.geometry, *t.g0, constants, "g0");
    if (t.f) (void)detail::cell_field(in.problem.geometry, *t.f, constants, "f");
  }
}

struct StudyRow {
  int resolution = 0;
  double h = 0.0;
  double value = 0.0;
  bool converged = true;
};

struct StudyOutput {
  std::vector<StudyRow> rows;
  Extrapolation extrapolation;
  std::optional<double> reference;
  json report;
  std::string csv;
  bool converged = true;
};

/// Reruns the scenario's single task at each resolution and extrapolates
/// its primary value. In 2D the y resolution scales with x.
inline StudyOutput convergence_study(const Scenario& base, const std::vector<int>& resolutions, StepVariable variable,
                                     std::optional<double> reference = {}, int jobs = 1) {
  if (resolutions.size() < 3) throw ConfigError("study: need at least 3 resolutions");
  for (std::size_t k = 1; k < resolutions.size(); ++k)
    if (resolutions[k] <= resolutions[k - 1]) throw ConfigError("study: resolutions must increase");
  if (base.tasks.size() != 1) throw ConfigError("study: scenario must have exactly one task");
  StudyOutput out;
  out.reference = reference;
  for (int n : resolutions) {
    Scenario sc = base;
    if (sc.geometry.resolution_y > 0)
      sc.geometry.resolution_y = std::max(2, static_cast<int>(std::lround(
                                                 static_cast<double>(sc.geometry.resolution_y) * n / sc.geometry.resolution)));
    sc.geometry.resolution = n;
    const RunOutput r = run_scenario(sc, jobs);
    const GeometryPtr geo = Geometry::build(sc.geometry);
    out.rows.push_back({n, geo->spacing(), r.tasks.front().primary, r.converged});
    out.converged = out.converged && r.converged;
  }
  std::vector<double> h, v;
  for (const StudyRow& r : out.rows) {
    h.push_back(r.h);
    v.push_back(r.value);
  }
  out.extrapolation = richardson(h, v, variable);

  CsvTable csv({"resolution", "h", "value", "converged", "error"});
  json rows = json::array();
  for (const StudyRow& r : out.rows) {
    const double err = reference ? std::abs(r.value - *reference) / std::abs(*reference)
                                 : std::numeric_limits<double>::quiet_NaN();
    csv.add({std::to_string(r.resolution), csv_num(r.h), csv_num(r.value), r.converged ? "true" : "false", csv_num(err)});
    rows.push_back({{"resolution", r.resolution}, {"h", num(r.h)}, {"value", num(r.value)},
                    {"converged", r.converged}, {"relative_error", num(err)}});
  }
  out.csv = csv.str();
  out.report = {{"name", base.name},
                {"task", base.tasks.front().task},
                {"rows", rows},
                {"step_variable", to_string(variable)},
                {"extrapolation",
                 {{"limit", num(out.extrapolation.limit)},
                  {"order", num(out.extrapolation.order)},
                  {"ok", out.extrapolation.ok},
                  {"note", out.extrapolation.note}}},
                {"reference", reference ? num(*reference) : json(nullptr)},
                {"converged", out.converged},
                {"provenance",
                 {{"config_hash", "fnv1a64:" + fnv1a_hex(base.source)},
                  {"seed", base.seed},
                  {"solver", solver_json(base.solver)},
                  {"tool_version", kToolVersion}}}};
  return out;
}

}  // namespace hardylab
