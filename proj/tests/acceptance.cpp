// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/hardylab.hpp"
#include "hardylab/runner.hpp"

using namespace hardylab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GeometryPtr radial(int n, int dim, double hi) {
  GeometrySpec s;
  s.kind = GeometryKind::radial;
  s.dim = dim;
  s.hi = hi;
  s.resolution = n;
  return build_geometry(s);
}

GeometryPtr interval(int n) {
  GeometrySpec s;
  s.resolution = n;
  return build_geometry(s);
}

GeometryPtr box(int n) {
  GeometrySpec s;
  s.kind = GeometryKind::box2d;
  s.lo = s.lo_y = -1.0;
  s.resolution = n;
  return build_geometry(s);
}

std::vector<double> random_nodes(const Geometry& geo, std::mt19937_64& rng, double lo, double hi, bool interior) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(geo.num_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (!interior || geo.is_interior(i)) ? d(rng) : 0.0;
  return v;
}

Problem varied_problem(const GeometryPtr& geo, double p, bool with_v) {
  Problem pr = Problem::make(geo, p);
  std::vector<CellMatrix> a(geo->num_cells());
  for (std::size_t c = 0; c < a.size(); ++c) {
    const Point m = geo->cell_midpoint(c);
    a[c] = {1.5 + 0.5 * std::sin(m.x), 0.2 * std::cos(2.0 * m.y), 1.2 + 0.3 * m.x * m.x};
  }
  pr.A = CoefficientA(geo, a);
  if (with_v) pr.V = sample_cells(geo, [](const Point& q) { return 1.0 + q.x * q.x; });
  return pr;
}

Verdict condenser(int N, double p, double r, double limit_s) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto geo = radial(4096, N, 1.0);
  const Problem pr = Problem::make(geo, p);
  const VariationalResult v = capacity(pr, ScalarField(geo, 1.0), ball_mask(geo, {0.0, 0.0}, r));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double exact = radial_condenser_capacity(p, N, r, 1.0);
  const double err = std::abs(v.value / exact - 1.0);
  const double tol = N == 2 && p == 2.0 ? 0.005 : 0.01;
  Verdict out{v.converged && err <= tol && secs < limit_s,
              fmt("value %.6f oracle %.6f rel.err %.2e converged %d time %.2fs (limit %.0fs)", v.value, exact, err,
                  v.converged, secs, limit_s)};
  return out;
}

Verdict criterion3() {
  Verdict v = condenser(2, 3.0, 0.5, 30.0);
  v.detail += fmt("; the stated 2pi=%.6f differs from the oracle formula", 2.0 * std::numbers::pi);
  return v;
}

Verdict hardy_sequence(double p, bool check_monotone, double floor_value) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> h, s;
  bool converged = true;
  for (int k = 9; k <= 14; ++k) {
    const auto geo = interval(1 << k);
    Problem pr = Problem::make(geo, p);
    pr.g = sample_cells(geo, [p](const Point& q) { return std::pow(q.x, -p); });
    const VariationalResult r = best_constant(pr);
    h.push_back(geo->spacing());
    s.push_back(r.value);
    converged = converged && r.converged;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool monotone = true, floor_ok = true;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k > 0 && s[k] > s[k - 1]) monotone = false;
    if (s[k] < floor_value) floor_ok = false;
  }
  const Extrapolation e = richardson(h, s, StepVariable::log);
  const double target = hardy_1d_constant(p);
  const double err = std::abs(e.limit / target - 1.0);
  std::ostringstream os;
  os << "S =";
  for (double v : s) os << fmt(" %.6f", v);
  os << fmt("; limit %.6f (order %.3g in 1/log(1/h)) target %.6f rel.err %.3f; converged %d; time %.1fs", e.limit,
            e.order, target, err, converged, secs);
  const bool pass = converged && e.ok && err <= 0.10 && (!check_monotone || (monotone && floor_ok)) && secs < 120.0;
  if (check_monotone) os << fmt("; nonincreasing %d; all >= %.2f %d", monotone, floor_value, floor_ok);
  return {pass, os.str()};
}

TaskOutcome run_single(const std::string& file) {
  const Scenario sc = load_scenario((fs::path(HARDYLAB_SCENARIO_DIR) / file).string());
  const RunOutput r = run_scenario(sc, 1);
  return r.tasks.front();
}

Verdict criterion6() {
  bool pass = true;
  std::ostringstream os;
  for (const char* f : {"sandwich_hardy_1d.yaml", "sandwich_annulus.yaml", "sandwich_bump_2d.yaml"}) {
    const TaskOutcome t = run_single(f);
    const double m = t.result["mazya_norm"].get<double>();
    const double B = t.result["best_constant_B"].get<double>();
    const double ratio = t.result["sandwich_ratio"].get<double>();
    const bool ok = t.converged && m <= B * (1.0 + 1e-3) && ratio >= 1.0 - 1e-3;
    pass = pass && ok;
    os << fmt("%s: norm %.6g B %.6g ratio %.4f%s; ", f, m, B, ratio, ok ? "" : " [fail]");
  }
  return {pass, os.str()};
}

Verdict criterion7() {
  int checks = 0, failures = 0;
  std::ostringstream os;
  // Monotonicity in F and antimonotonicity in Omega.
  for (double p : {1.5, 2.0, 3.0}) {
    const auto geo = radial(512, 2, 1.0);
    const Problem pr = Problem::make(geo, p);
    const ScalarField u(geo, 1.0);
    double prev = 0.0;
    for (double r : {0.05, 0.1, 0.2, 0.3}) {
      const double v = capacity(pr, u, ball_mask(geo, {0.0, 0.0}, r)).value;
      ++checks;
      if (v * (1.0 + 1e-6) < prev) ++failures;
      prev = v;
    }
    const auto decay = capacity_decay(pr, u, ball_mask(geo, {0.0, 0.0}, 0.05), ball_exhaustion(geo, {0.25, 0.5, 0.75, 1.0}));
    for (std::size_t k = 1; k < decay.size(); ++k) {
      ++checks;
      if (decay[k].value > decay[k - 1].value * (1.0 + 1e-6)) ++failures;
    }
  }
  const int mono_fail = failures;
  // Scaling in u.
  double worst_scale = 0.0;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto geo = box(16);
    const Problem pr = Problem::make(geo, p);
    const ScalarField u = sample_nodes(geo, [](const Point& q) { return 1.0 + 0.5 * q.x * q.x; });
    const SubsetMask F = ball_mask(geo, {0.0, 0.0}, 0.35);
    const double base = capacity(pr, u, F).value;
    for (double c : {0.5, 2.0, 10.0}) {
      ScalarField cu = u;
      for (double& v : cu.values) v *= c;
      const double rel = std::abs(capacity(pr, cu, F).value / (std::pow(c, p) * base) - 1.0);
      worst_scale = std::max(worst_scale, rel);
      ++checks;
      if (rel > 1e-5) ++failures;
    }
  }
  // Truncation on feasible random fields, per scenario.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.0, 2.0);
  int trunc_fail = 0, scenarios = 0;
  for (double p : {1.5, 2.0, 3.0}) {
    for (int kind = 0; kind < 3; ++kind) {
      const auto geo = kind == 0 ? interval(128) : kind == 1 ? radial(128, 3, 1.0) : box(16);
      Problem pr = Problem::make(geo, p);
      ScalarField u(geo, 1.0);
      if (kind == 0) {
        const ScalarField b = sample_nodes(geo, [](const Point& q) { return 1.0 + 3.0 * q.x; });
        u = solve_dirichlet(pr, b).minimizer;
      } else {
        pr.V = CellField(geo, 0.5);
      }
      const SubsetMask F = ball_mask(geo, {kind == 0 ? 0.5 : 0.0, 0.0}, 0.3);
      ++scenarios;
      for (int trial = 0; trial < 100; ++trial) {
        ScalarField phi(geo), cut(geo);
        for (std::size_t i = 0; i < phi.size(); ++i) {
          if (!geo->is_interior(i)) continue;
          phi[i] = F.contains(i) ? u[i] : d(rng) * u[i];
          cut[i] = std::min(phi[i], u[i]);
        }
        ++checks;
        const double q = energy_Q(pr, phi);
        if (energy_Q(pr, cut) > q * (1.0 + 1e-12)) {
          ++failures;
          ++trunc_fail;
        }
      }
    }
  }
  os << fmt("%d checks; monotonicity failures %d; worst scaling rel.err %.2e; truncation failures %d over %d scenarios x 100",
            checks, mono_fail, worst_scale, trunc_fail, scenarios);
  return {failures == 0, os.str()};
}

double picone_scale(const Problem& pr, const ScalarField& phi, const ScalarField& Phi) {
  const Geometry& geo = *pr.geometry;
  double scale = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double Pb = detail::cell_mean(s, Phi.values);
    const double t = Pb > 0.0 ? detail::cell_mean(s, phi.values) / Pb : 0.0;
    for (int k = 0; k < s.nsamples; ++k) {
      const auto xi = detail::sample_gradient(s, s.samples[k], phi.values, geo.is_2d());
      const auto eta = detail::sample_gradient(s, s.samples[k], Phi.values, geo.is_2d());
      const double xa = std::sqrt(detail::dot(xi, detail::apply(pr.A[c], xi, geo.is_2d())));
      const double ea = std::sqrt(detail::dot(eta, detail::apply(pr.A[c], eta, geo.is_2d())));
      scale = std::max(scale, std::pow(xa, pr.p) + (pr.p - 1.0) * std::pow(t * ea, pr.p));
    }
  }
  return scale;
}

Verdict criterion8() {
  std::mt19937_64 rng(8);
  double worst = 0.0;
  int nonzero = 0, equality_cells = 0;
  for (double p : {1.5, 2.0, 3.0}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const auto geo = trial % 3 == 0 ? interval(12) : trial % 3 == 1 ? radial(12, 3, 1.0) : box(6);
      const Problem pr = varied_problem(geo, p, false);
      const ScalarField phi(geo, random_nodes(*geo, rng, 0.0, 2.0, true));
      const ScalarField Phi(geo, random_nodes(*geo, rng, 0.05, 1.0, false));
      const CellField L = picone_lagrangian(pr, phi, Phi);
      const double scale = picone_scale(pr, phi, Phi);
      for (double v : L.values) worst = std::min(worst, v / scale);
      if (trial % 50 == 0) {
        for (double c : {0.5, 2.0, 4.0}) {
          ScalarField eq = Phi;
          for (double& v : eq.values) v *= c;
          for (double v : picone_lagrangian(pr, eq, Phi).values) {
            ++equality_cells;
            if (v != 0.0) ++nonzero;
          }
        }
      }
    }
  }
  return {worst >= -1e-10 && nonzero == 0,
          fmt("min L/scale %.3e over 3000 pairs; equality cases phi=c Phi: %d of %d cells nonzero", worst, nonzero,
              equality_cells)};
}

Verdict criterion9() {
  std::mt19937_64 rng(9);
  double worst_e1 = 0.0;
  std::ostringstream os;
  bool bounded = true;
  for (double p : {1.5, 2.0, 3.0}) {
    for (int trial = 0; trial < 30; ++trial) {
      const auto geo = trial % 3 == 0 ? interval(16) : trial % 3 == 1 ? radial(16, 3, 1.0) : box(8);
      const Problem pr = varied_problem(geo, p, false);
      const ScalarField phi(geo, random_nodes(*geo, rng, 0.0, 1.0, true));
      const double q = energy_Q(pr, phi);
      worst_e1 = std::max(worst_e1, std::abs(simplified_energy(pr, ScalarField(geo, 1.0), phi) / q - 1.0));
    }
    const auto geo = box(16);
    const Problem pr = Problem::make(geo, p);
    const ScalarField b = sample_nodes(geo, [](const Point& q) { return 2.0 + q.x + 0.5 * q.y * q.y; });
    const VariationalResult sol = solve_dirichlet(pr, b);
    double lo = INFINITY, hi = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const ScalarField phi(geo, random_nodes(*geo, rng, 0.0, 1.0, true));
      ScalarField uphi(geo);
      for (std::size_t i = 0; i < uphi.size(); ++i) uphi[i] = sol.minimizer[i] * phi[i];
      const double ratio = simplified_energy(pr, sol.minimizer, phi) / energy_Q(pr, uphi);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    const bool ok = sol.converged && lo > 0.05 && hi < 20.0;
    bounded = bounded && ok;
    os << fmt("p=%g ratio in [%.4f, %.4f]; ", p, lo, hi);
  }
  os << fmt("max |E_1/Q - 1| = %.2e", worst_e1);
  return {bounded && worst_e1 <= 1e-12, os.str()};
}

Verdict criterion10() {
  std::mt19937_64 rng(10);
  std::ostringstream os;
  bool pass = true;
  for (double p : {1.5, 2.0, 3.0}) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto geo = trial % 3 == 0 ? interval(10) : trial % 3 == 1 ? radial(10, 2, 1.0) : box(6);
      const Problem pr = varied_problem(geo, p, true);
      std::vector<double> phi = random_nodes(*geo, rng, -1.0, 1.0, false);
      std::vector<double> g(phi.size());
      energy_gradient(pr, phi, g);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double keep = phi[i];
        phi[i] = keep + 1e-6;
        const double fp = energy_Q(pr, phi);
        phi[i] = keep - 1e-6;
        const double fm = energy_Q(pr, phi);
        phi[i] = keep;
        const double fd = (fp - fm) / 2e-6;
        num = std::max(num, std::abs(g[i] - fd));
        den = std::max(den, std::abs(fd));
      }
      worst = std::max(worst, num / den);
    }
    pass = pass && worst <= 1e-5;
    os << fmt("p=%g max rel.err %.2e; ", p, worst);
  }
  return {pass, os.str()};
}

Verdict criterion11() {
  const TaskOutcome plane = run_single("criticality_plane.yaml");
  const TaskOutcome space = run_single("criticality_space.yaml");
  std::ostringstream os;
  bool pass = plane.converged && space.converged;
  const auto R = plane.result["parameters"].get<std::vector<double>>();
  const auto v = plane.result["values"].get<std::vector<double>>();
  for (std::size_t k = 0; k < R.size(); ++k) {
    const double target = 2.0 * std::numbers::pi / std::log(R[k]);
    const double err = std::abs(v[k] / target - 1.0);
    pass = pass && err <= 0.02;
    os << fmt("N=2 R=%g cap %.5f vs %.5f (%.2f%%); ", R[k], v[k], target, 100.0 * err);
  }
  const std::string pv = plane.result["verdict"].get<std::string>();
  const std::string sv = space.result["verdict"].get<std::string>();
  const double last = space.result["values"].back().get<double>();
  const double target = 4.0 * std::numbers::pi;
  const double err = std::abs(last / target - 1.0);
  pass = pass && pv == "critical-suspected" && sv == "subcritical-suspected" && err <= 0.02;
  os << fmt("plane %s; N=3 %s, last cap %.5f vs 4pi r = %.5f (%.2f%%)", pv.c_str(), sv.c_str(), last, target,
            100.0 * err);
  return {pass, os.str()};
}

Verdict criterion12() {
  std::ostringstream os;
  bool pass = true;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto geo = interval(1024);
    Problem pr = Problem::make(geo, p);
    pr.g = sample_cells(geo, [](const Point& q) { return 1.0 + 0.5 * std::sin(7.0 * q.x); });
    const LocalCurve c = local_constant(pr, {0.5, 0.0}, {0.4, 0.2, 0.1, 0.05, 0.025});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = std::abs(c.slope + p) <= 0.3 && secs < 60.0;
    pass = pass && ok;
    os << fmt("p=%g slope %.4f (%.1fs); ", p, c.slope, secs);
  }
  return {pass, os.str()};
}

Verdict criterion13() {
  std::ostringstream os;
  bool pass = true;
  for (double p : {2.0, 3.0}) {
    const auto geo = interval(1024);
    const Problem pr = Problem::make(geo, p);
    const CellField g(geo, 1.0);
    const CellField g0 = sample_cells(geo, [](const Point& q) {
      const double t = (q.x - 0.3) / 0.1;
      return t * t < 1.0 ? (1.0 - t * t) * (1.0 - t * t) : 0.0;
    });
    SolverOptions opts;
    const CombineReport probe = combine_weights(pr, g0, g, 1.0, opts);
    const CombineReport rep = combine_weights(pr, g0, g, 2.0 * probe.threshold, opts);
    const double margin = 1.0 - rep.S_combined / rep.S_g;
    const bool ok = rep.converged && rep.strict_decrease && margin > opts.tol_grad;
    pass = pass && ok;
    os << fmt("p=%g eps %.4g: S_g %.6f -> %.6f (margin %.2e); ", p, rep.epsilon, rep.S_g, rep.S_combined, margin);
    Problem p0 = pr;
    p0.g = g0;
    const double base = best_constant(p0, opts).value;
    double worst = 0.0;
    for (double eps : {0.5, 2.0}) {
      Problem scaled = p0;
      for (double& v : scaled.g.values) v *= 1.0 + eps;
      worst = std::max(worst, std::abs(best_constant(scaled, opts).value * (1.0 + eps) / base - 1.0));
    }
    pass = pass && worst <= 1e-6;
    os << fmt("scaling rel.err %.2e; ", worst);
  }
  return {pass, os.str()};
}

Verdict criterion14() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(HARDYLAB_SCENARIO_DIR))
    if (e.path().extension() == ".yaml") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int differ = 0;
  for (const auto& f : files) {
    const Scenario sc = load_scenario(f.string());
    const RunOutput a = run_scenario(sc, 1);
    const RunOutput b = run_scenario(sc, 4);
    if (dump(a.report) != dump(b.report) || a.sets_csv != b.sets_csv || a.curves_csv != b.curves_csv) ++differ;
  }
  return {differ == 0 && !files.empty(),
          fmt("%zu scenarios run twice (1 and 4 threads): %d differing reports", files.size(), differ)};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, [] { return condenser(2, 2.0, 0.25, 10.0); }},
      {2, [] { return condenser(3, 2.0, 0.5, 10.0); }},
      {3, criterion3},
      {4, [] { return hardy_sequence(2.0, true, 0.24); }},
      {5, [] { return hardy_sequence(3.0, false, 0.0); }},
      {6, criterion6},
      {7, criterion7},
      {8, criterion8},
      {9, criterion9},
      {10, criterion10},
      {11, criterion11},
      {12, criterion12},
      {13, criterion13},
      {14, criterion14},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
