#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "hardylab/error.hpp"
#include "hardylab/expression.hpp"
#include "hardylab/field.hpp"
#include "hardylab/oracles.hpp"
#include "hardylab/solver.hpp"

namespace hardylab {

/// Cell field given by an expression or by one value per cell.
struct FieldSpec {
  std::string expr = "0";
  std::vector<double> values;
  bool tabulated = false;
};

struct CoefficientSpec {
  enum class Kind { identity, scalar, matrix };
  Kind kind = Kind::identity;
  std::string scalar;
  std::array<std::string, 3> matrix;  ///< a11, a12, a22
};

/// Positive solution u: absent, an expression, or the Dirichlet solution
/// of the scenario's equation with the given boundary expression.
struct USpec {
  enum class Kind { none, expr, solve };
  Kind kind = Kind::none;
  std::string expr;
};

struct SetSpec {
  enum class Kind { ball, box, annulus, level, interior };
  Kind kind = Kind::interior;
  Point center;
  double radius = 0.0;
  double inner = 0.0;
  double outer = 0.0;
  std::array<double, 4> box{};
  std::string field;  ///< expression or "u"
  double quantile = 0.0;
};

struct ExhaustionSpec {
  int count = 0;
  std::vector<double> radii;
  Point center;
  std::vector<double> parameters;
};

struct TaskSpec {
  std::string task;
  std::optional<SetSpec> F;
  std::optional<SetSpec> domain;
  std::optional<SetSpec> K1;
  std::optional<SetSpec> omega;
  std::vector<SetSpec> family;
  std::optional<ExhaustionSpec> exhaustion;
  std::vector<Point> centers;
  std::vector<double> radii;
  double margin = 0.15;
  int level_quantiles = 10;
  std::optional<FieldSpec> g0;
  double epsilon = 0.0;
  double epsilon_factor = 0.0;
  std::optional<FieldSpec> f;
  double q = 0.0;
  std::vector<double> deltas;
  int trials = 20;
  std::string oracle;
  std::map<std::string, double> params;
  double alpha = 1.0;
  double beta = 1.0;
  double r = 2.0;
  std::string phi;
  int line = 0;
};

struct Scenario {
  std::string path;
  std::string source;
  std::string name;
  std::uint64_t seed = 0;
  GeometrySpec geometry;
  double p = 2.0;
  CoefficientSpec A;
  FieldSpec V;
  FieldSpec g;
  USpec u;
  SolverOptions solver;
  std::vector<TaskSpec> tasks;
  std::vector<std::string> declared_assumptions;
};

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "capacity", "hardy-norm",      "best-constant", "sandwich", "criticality", "spectral-profile", "attainment",
      "combine-weights", "morrey", "oracle", "embedding-check", "kp-check", "energy"};
  return names;
}

namespace detail {

/// Keys accepted in a task's options block, and those that must be present.
struct TaskKeys {
  std::set<std::string> allowed;
  std::set<std::string> required;
};

inline const std::map<std::string, TaskKeys>& task_keys() {
  static const std::map<std::string, TaskKeys> keys = {
      {"capacity", {{"F", "exhaustion"}, {"F"}}},
      {"hardy-norm", {{"family"}, {"family"}}},
      {"best-constant", {{"domain"}, {}}},
      {"sandwich", {{"family", "level_quantiles"}, {"family"}}},
      {"criticality", {{"F", "exhaustion"}, {"F", "exhaustion"}}},
      {"spectral-profile", {{"centers", "radii", "exhaustion", "margin"}, {"centers", "radii", "exhaustion"}}},
      {"attainment", {{"centers", "radii", "exhaustion", "margin"}, {"centers", "radii", "exhaustion"}}},
      {"combine-weights", {{"g0", "epsilon", "epsilon_factor"}, {"g0"}}},
      {"morrey", {{"f", "q", "omega", "deltas", "trials"}, {"q"}}},
      {"oracle", {{"name", "params"}, {"name", "params"}}},
      {"embedding-check", {{"alpha", "beta", "r", "family"}, {"alpha", "beta", "r", "family"}}},
      {"kp-check", {{"K1", "exhaustion"}, {"K1", "exhaustion"}}},
      {"energy", {{"phi"}, {"phi"}}},
  };
  return keys;
}

class YamlReader {
 public:
  explicit YamlReader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& key, const std::string& what) const {
    std::ostringstream os;
    os << file_;
    if (at.IsDefined() && at.Mark().line >= 0) os << ":" << at.Mark().line + 1 << ":" << at.Mark().column + 1;
    os << ": " << key << ": " << what;
    throw ConfigError(os.str());
  }

  void check_keys(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed,
                  const std::set<std::string>& required = {}) const {
    if (!map.IsMap()) fail(map, where, "expected a mapping");
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) fail(kv.first, join(where, k), "unknown key");
    }
    for (const std::string& k : required)
      if (!map[k]) fail(map, join(where, k), "missing required key '" + k + "'");
  }

  double number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a number");
    const std::string s = n.as<std::string>();
    if (s == "inf" || s == ".inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(n, key, "expected a number, got '" + s + "'");
    }
  }

  int integer(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(n, key, "expected an integer");
    return static_cast<int>(v);
  }

  std::string string(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a string");
    return n.as<std::string>();
  }

  bool boolean(const YAML::Node& n, const std::string& key) const {
    const std::string s = string(n, key);
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, key, "expected true or false");
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, key, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(number(n[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strings(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, key, "expected a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(string(n[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }

  Point point(const YAML::Node& n, const std::string& key, bool two_d) const {
    if (n.IsScalar()) {
      if (two_d) fail(n, key, "expected [x, y]");
      return {number(n, key), 0.0};
    }
    const std::vector<double> v = numbers(n, key);
    if (v.size() != (two_d ? 2u : 1u)) fail(n, key, two_d ? "expected [x, y]" : "expected a number");
    return {v[0], two_d ? v[1] : 0.0};
  }

  void expression(const YAML::Node& n, const std::string& key, const std::string& text,
                  const std::map<std::string, double>& constants) const {
    try {
      (void)Expression::parse(text, constants);
    } catch (const ConfigError& e) {
      fail(n, key, e.what());
    }
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

 private:
  std::string file_;
};

inline GeometrySpec read_geometry(const YamlReader& rd, const YAML::Node& n) {
  rd.check_keys(n, "geometry", {"kind", "bounds", "bounds_y", "resolution", "resolution_y", "dim", "exclude_origin"},
                {"kind", "bounds", "resolution"});
  GeometrySpec g;
  const std::string kind = rd.string(n["kind"], "geometry.kind");
  if (kind == "interval") g.kind = GeometryKind::interval;
  else if (kind == "radial") g.kind = GeometryKind::radial;
  else if (kind == "box2d") g.kind = GeometryKind::box2d;
  else rd.fail(n["kind"], "geometry.kind", "expected one of interval, radial, box2d");
  const std::vector<double> b = rd.numbers(n["bounds"], "geometry.bounds");
  if (b.size() != 2) rd.fail(n["bounds"], "geometry.bounds", "expected [lo, hi]");
  g.lo = b[0];
  g.hi = b[1];
  g.resolution = rd.integer(n["resolution"], "geometry.resolution");
  if (g.kind == GeometryKind::box2d) {
    if (!n["bounds_y"]) rd.fail(n, "geometry.bounds_y", "missing required key 'bounds_y' for box2d");
    const std::vector<double> by = rd.numbers(n["bounds_y"], "geometry.bounds_y");
    if (by.size() != 2) rd.fail(n["bounds_y"], "geometry.bounds_y", "expected [lo, hi]");
    g.lo_y = by[0];
    g.hi_y = by[1];
    if (n["resolution_y"]) g.resolution_y = rd.integer(n["resolution_y"], "geometry.resolution_y");
  } else if (n["bounds_y"] || n["resolution_y"]) {
    rd.fail(n, "geometry", "bounds_y / resolution_y apply to box2d only");
  }
  if (g.kind == GeometryKind::radial) {
    if (!n["dim"]) rd.fail(n, "geometry.dim", "missing required key 'dim' for radial");
    g.dim = rd.integer(n["dim"], "geometry.dim");
  } else if (n["dim"]) {
    rd.fail(n["dim"], "geometry.dim", "applies to radial only");
  }
  if (n["exclude_origin"]) g.exclude_origin = rd.boolean(n["exclude_origin"], "geometry.exclude_origin");
  try {
    (void)Geometry::build(g);
  } catch (const ConfigError& e) {
    rd.fail(n, "geometry", e.what());
  }
  return g;
}

inline FieldSpec read_field(const YamlReader& rd, const YAML::Node& n, const std::string& key,
                            const std::map<std::string, double>& constants) {
  FieldSpec f;
  if (n.IsMap()) {
    rd.check_keys(n, key, {"values"}, {"values"});
    f.values = rd.numbers(n["values"], key + ".values");
    f.tabulated = true;
    return f;
  }
  f.expr = rd.string(n, key);
  rd.expression(n, key, f.expr, constants);
  return f;
}

inline CoefficientSpec read_coefficient(const YamlReader& rd, const YAML::Node& n,
                                        const std::map<std::string, double>& constants) {
  CoefficientSpec a;
  if (n.IsScalar()) {
    if (rd.string(n, "A") != "identity") rd.fail(n, "A", "expected 'identity', {scalar: expr} or {matrix: [a11, a12, a22]}");
    return a;
  }
  rd.check_keys(n, "A", {"scalar", "matrix"});
  if (n["scalar"]) {
    a.kind = CoefficientSpec::Kind::scalar;
    a.scalar = rd.string(n["scalar"], "A.scalar");
    rd.expression(n["scalar"], "A.scalar", a.scalar, constants);
  } else if (n["matrix"]) {
    a.kind = CoefficientSpec::Kind::matrix;
    const std::vector<std::string> m = rd.strings(n["matrix"], "A.matrix");
    if (m.size() != 3) rd.fail(n["matrix"], "A.matrix", "expected [a11, a12, a22]");
    for (int k = 0; k < 3; ++k) {
      a.matrix[k] = m[k];
      rd.expression(n["matrix"][k], "A.matrix", m[k], constants);
    }
  } else {
    rd.fail(n, "A", "expected scalar or matrix");
  }
  return a;
}

inline SetSpec read_set(const YamlReader& rd, const YAML::Node& n, const std::string& key, bool two_d,
                        const std::map<std::string, double>& constants) {
  SetSpec s;
  if (n.IsScalar()) {
    if (rd.string(n, key) != "interior") rd.fail(n, key, "expected 'interior' or a set mapping");
    return s;
  }
  if (!n.IsMap() || n.size() != 1) rd.fail(n, key, "expected one of ball, box, annulus, level, interior");
  const std::string kind = n.begin()->first.as<std::string>();
  const YAML::Node body = n.begin()->second;
  const std::string sub = key + "." + kind;
  if (kind == "ball") {
    rd.check_keys(body, sub, {"center", "radius"}, {"radius"});
    s.kind = SetSpec::Kind::ball;
    if (body["center"]) s.center = rd.point(body["center"], sub + ".center", two_d);
    s.radius = rd.number(body["radius"], sub + ".radius");
    if (!(s.radius > 0.0)) rd.fail(body["radius"], sub + ".radius", "must be positive");
  } else if (kind == "annulus") {
    rd.check_keys(body, sub, {"center", "inner", "outer"}, {"inner", "outer"});
    s.kind = SetSpec::Kind::annulus;
    if (body["center"]) s.center = rd.point(body["center"], sub + ".center", two_d);
    s.inner = rd.number(body["inner"], sub + ".inner");
    s.outer = rd.number(body["outer"], sub + ".outer");
    if (!(s.outer > s.inner)) rd.fail(body, sub, "inner must be < outer");
  } else if (kind == "box") {
    s.kind = SetSpec::Kind::box;
    const std::vector<double> b = rd.numbers(body, sub);
    if (b.size() != (two_d ? 4u : 2u)) rd.fail(body, sub, two_d ? "expected [x0, x1, y0, y1]" : "expected [x0, x1]");
    for (std::size_t k = 0; k < b.size(); ++k) s.box[k] = b[k];
  } else if (kind == "level") {
    rd.check_keys(body, sub, {"field", "quantile"}, {"field", "quantile"});
    s.kind = SetSpec::Kind::level;
    s.field = rd.string(body["field"], sub + ".field");
    if (s.field != "u") rd.expression(body["field"], sub + ".field", s.field, constants);
    s.quantile = rd.number(body["quantile"], sub + ".quantile");
    if (!(s.quantile >= 0.0 && s.quantile < 1.0)) rd.fail(body["quantile"], sub + ".quantile", "must lie in [0, 1)");
  } else if (kind == "interior") {
    s.kind = SetSpec::Kind::interior;
  } else {
    rd.fail(n, key, "unknown set kind '" + kind + "'");
  }
  return s;
}

/// A family is a list whose entries are single sets or the generators
/// {balls: {centers, radii}}, {annuli: {center, pairs}}, {levels: {field, quantiles}}.
inline std::vector<SetSpec> read_family(const YamlReader& rd, const YAML::Node& n, const std::string& key, bool two_d,
                                        const std::map<std::string, double>& constants) {
  if (!n.IsSequence() || n.size() == 0) rd.fail(n, key, "expected a nonempty list of sets");
  std::vector<SetSpec> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const YAML::Node e = n[i];
    const std::string ek = key + "[" + std::to_string(i) + "]";
    if (e.IsMap() && e.size() == 1 && e["balls"]) {
      const YAML::Node b = e["balls"];
      rd.check_keys(b, ek + ".balls", {"centers", "radii"}, {"radii"});
      std::vector<Point> centers{Point{}};
      if (b["centers"]) {
        if (!b["centers"].IsSequence()) rd.fail(b["centers"], ek + ".balls.centers", "expected a list");
        centers.clear();
        for (std::size_t c = 0; c < b["centers"].size(); ++c)
          centers.push_back(rd.point(b["centers"][c], ek + ".balls.centers", two_d));
      }
      for (const Point& c : centers)
        for (double r : rd.numbers(b["radii"], ek + ".balls.radii")) {
          SetSpec s;
          s.kind = SetSpec::Kind::ball;
          s.center = c;
          s.radius = r;
          out.push_back(s);
        }
    } else if (e.IsMap() && e.size() == 1 && e["annuli"]) {
      const YAML::Node a = e["annuli"];
      rd.check_keys(a, ek + ".annuli", {"center", "pairs"}, {"pairs"});
      Point c;
      if (a["center"]) c = rd.point(a["center"], ek + ".annuli.center", two_d);
      if (!a["pairs"].IsSequence()) rd.fail(a["pairs"], ek + ".annuli.pairs", "expected a list of [inner, outer]");
      for (std::size_t k = 0; k < a["pairs"].size(); ++k) {
        const std::vector<double> pr = rd.numbers(a["pairs"][k], ek + ".annuli.pairs");
        if (pr.size() != 2 || !(pr[1] > pr[0])) rd.fail(a["pairs"][k], ek + ".annuli.pairs", "expected [inner, outer]");
        SetSpec s;
        s.kind = SetSpec::Kind::annulus;
        s.center = c;
        s.inner = pr[0];
        s.outer = pr[1];
        out.push_back(s);
      }
    } else if (e.IsMap() && e.size() == 1 && e["levels"]) {
      const YAML::Node l = e["levels"];
      rd.check_keys(l, ek + ".levels", {"field", "quantiles"}, {"field", "quantiles"});
      const std::string field = rd.string(l["field"], ek + ".levels.field");
      if (field != "u") rd.expression(l["field"], ek + ".levels.field", field, constants);
      for (double q : rd.numbers(l["quantiles"], ek + ".levels.quantiles")) {
        if (!(q >= 0.0 && q < 1.0)) rd.fail(l["quantiles"], ek + ".levels.quantiles", "quantiles must lie in [0, 1)");
        SetSpec s;
        s.kind = SetSpec::Kind::level;
        s.field = field;
        s.quantile = q;
        out.push_back(s);
      }
    } else {
      out.push_back(read_set(rd, e, ek, two_d, constants));
    }
  }
  return out;
}

inline ExhaustionSpec read_exhaustion(const YamlReader& rd, const YAML::Node& n, const std::string& key, bool two_d) {
  rd.check_keys(n, key, {"count", "radii", "center", "parameters"});
  ExhaustionSpec e;
  if (n["count"] && n["radii"]) rd.fail(n, key, "give either count or radii");
  if (n["count"]) {
    e.count = rd.integer(n["count"], key + ".count");
    if (e.count < 1) rd.fail(n["count"], key + ".count", "must be >= 1");
  } else if (n["radii"]) {
    e.radii = rd.numbers(n["radii"], key + ".radii");
    for (std::size_t k = 1; k < e.radii.size(); ++k)
      if (!(e.radii[k] > e.radii[k - 1])) rd.fail(n["radii"], key + ".radii", "radii must increase");
    if (n["center"]) e.center = rd.point(n["center"], key + ".center", two_d);
  } else {
    rd.fail(n, key, "missing required key 'count' or 'radii'");
  }
  if (n["parameters"]) e.parameters = rd.numbers(n["parameters"], key + ".parameters");
  return e;
}

inline TaskSpec read_task(const YamlReader& rd, const YAML::Node& taskNode, const YAML::Node& options,
                          const std::string& key, bool two_d, const std::map<std::string, double>& constants) {
  TaskSpec t;
  t.task = rd.string(taskNode, key);
  t.line = taskNode.Mark().line + 1;
  const auto it = task_keys().find(t.task);
  if (it == task_keys().end()) {
    std::string list;
    for (const std::string& n : task_names()) list += (list.empty() ? "" : ", ") + n;
    rd.fail(taskNode, key, "unknown task '" + t.task + "' (expected one of " + list + ")");
  }
  const std::string ok = key == "task" ? "options" : key.substr(0, key.rfind('.')) + ".options";
  YAML::Node opt = options;
  if (!opt) {
    if (!it->second.required.empty())
      rd.fail(taskNode, ok, "task '" + t.task + "' requires options: missing '" + *it->second.required.begin() + "'");
    return t;
  }
  rd.check_keys(opt, ok, it->second.allowed, it->second.required);
  auto k = [&](const char* name) { return ok + "." + name; };
  if (opt["F"]) t.F = read_set(rd, opt["F"], k("F"), two_d, constants);
  if (opt["domain"]) t.domain = read_set(rd, opt["domain"], k("domain"), two_d, constants);
  if (opt["K1"]) t.K1 = read_set(rd, opt["K1"], k("K1"), two_d, constants);
  if (opt["omega"]) t.omega = read_set(rd, opt["omega"], k("omega"), two_d, constants);
  if (opt["family"]) t.family = read_family(rd, opt["family"], k("family"), two_d, constants);
  if (opt["exhaustion"]) t.exhaustion = read_exhaustion(rd, opt["exhaustion"], k("exhaustion"), two_d);
  if (opt["centers"]) {
    if (!opt["centers"].IsSequence() || opt["centers"].size() == 0)
      rd.fail(opt["centers"], k("centers"), "expected a nonempty list of points");
    for (std::size_t i = 0; i < opt["centers"].size(); ++i) t.centers.push_back(rd.point(opt["centers"][i], k("centers"), two_d));
  }
  if (opt["radii"]) {
    t.radii = rd.numbers(opt["radii"], k("radii"));
    if (t.radii.empty()) rd.fail(opt["radii"], k("radii"), "expected a nonempty list");
    for (std::size_t i = 1; i < t.radii.size(); ++i)
      if (!(t.radii[i] < t.radii[i - 1])) rd.fail(opt["radii"], k("radii"), "radii must decrease");
  }
  if (opt["margin"]) t.margin = rd.number(opt["margin"], k("margin"));
  if (opt["level_quantiles"]) t.level_quantiles = rd.integer(opt["level_quantiles"], k("level_quantiles"));
  if (opt["g0"]) t.g0 = read_field(rd, opt["g0"], k("g0"), constants);
  if (opt["epsilon"]) t.epsilon = rd.number(opt["epsilon"], k("epsilon"));
  if (opt["epsilon_factor"]) t.epsilon_factor = rd.number(opt["epsilon_factor"], k("epsilon_factor"));
  if (opt["f"]) t.f = read_field(rd, opt["f"], k("f"), constants);
  if (opt["q"]) t.q = rd.number(opt["q"], k("q"));
  if (opt["deltas"]) t.deltas = rd.numbers(opt["deltas"], k("deltas"));
  if (opt["trials"]) t.trials = rd.integer(opt["trials"], k("trials"));
  if (opt["name"]) t.oracle = rd.string(opt["name"], k("name"));
  if (opt["params"]) {
    if (!opt["params"].IsMap()) rd.fail(opt["params"], k("params"), "expected a mapping of numbers");
    for (const auto& kv : opt["params"]) {
      const std::string pk = kv.first.as<std::string>();
      t.params[pk] = rd.number(kv.second, k("params") + "." + pk);
    }
  }
  if (opt["alpha"]) t.alpha = rd.number(opt["alpha"], k("alpha"));
  if (opt["beta"]) t.beta = rd.number(opt["beta"], k("beta"));
  if (opt["r"]) t.r = rd.number(opt["r"], k("r"));
  if (opt["phi"]) {
    t.phi = rd.string(opt["phi"], k("phi"));
    rd.expression(opt["phi"], k("phi"), t.phi, constants);
  }

  if (t.task == "combine-weights" && (t.epsilon > 0.0) == (t.epsilon_factor > 0.0))
    rd.fail(opt, ok, "give exactly one positive value of epsilon or epsilon_factor");
  if (t.task == "oracle") {
    const auto names = oracle_names();
    if (std::find(names.begin(), names.end(), t.oracle) == names.end()) rd.fail(opt["name"], k("name"), "unknown oracle '" + t.oracle + "'");
  }
  if ((t.task == "spectral-profile" || t.task == "attainment") && !(t.margin >= 0.0 && t.margin < 1.0))
    rd.fail(opt["margin"], k("margin"), "must lie in [0, 1)");
  if (t.task == "sandwich" && t.level_quantiles < 0) rd.fail(opt["level_quantiles"], k("level_quantiles"), "must be >= 0");
  if (t.task == "morrey" && !(t.q >= 1.0)) rd.fail(opt["q"], k("q"), "must be >= 1");
  if (t.task == "morrey" && !t.deltas.empty() && t.trials < 1) rd.fail(opt["trials"], k("trials"), "must be >= 1");
  return t;
}

inline SolverOptions read_solver(const YamlReader& rd, const YAML::Node& n) {
  rd.check_keys(n, "solver", {"max_iters", "tol_energy", "tol_grad", "multistarts", "route", "stagnation_window"});
  SolverOptions s;
  if (n["max_iters"]) s.max_iters = rd.integer(n["max_iters"], "solver.max_iters");
  if (n["tol_energy"]) s.tol_energy = rd.number(n["tol_energy"], "solver.tol_energy");
  if (n["tol_grad"]) s.tol_grad = rd.number(n["tol_grad"], "solver.tol_grad");
  if (n["multistarts"]) s.multistarts = rd.integer(n["multistarts"], "solver.multistarts");
  if (n["stagnation_window"]) s.stagnation_window = rd.integer(n["stagnation_window"], "solver.stagnation_window");
  if (n["route"]) {
    const std::string r = rd.string(n["route"], "solver.route");
    if (r == "direct") s.route = CapacityRoute::direct;
    else if (r == "simplified") s.route = CapacityRoute::simplified;
    else rd.fail(n["route"], "solver.route", "expected direct or simplified");
  }
  if (s.max_iters < 1) rd.fail(n["max_iters"], "solver.max_iters", "must be >= 1");
  if (!(s.tol_grad > 0.0)) rd.fail(n["tol_grad"], "solver.tol_grad", "must be positive");
  if (!(s.tol_energy >= 0.0)) rd.fail(n["tol_energy"], "solver.tol_energy", "must be >= 0");
  if (s.multistarts < 1) rd.fail(n["multistarts"], "solver.multistarts", "must be >= 1");
  if (s.stagnation_window < 1) rd.fail(n["stagnation_window"], "solver.stagnation_window", "must be >= 1");
  return s;
}

}  // namespace detail

/// Constants visible to field expressions.
inline std::map<std::string, double> expression_constants(const Scenario& sc) {
  return {{"p", sc.p}, {"N", static_cast<double>(Geometry::build(sc.geometry)->dim())}};
}

/// Parses and validates a scenario document. Every error carries the file,
/// line and the dotted key at fault.
inline Scenario parse_scenario(const std::string& text, const std::string& path = "<scenario>") {
  detail::YamlReader rd(path);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(path + ": top level must be a mapping");
  rd.check_keys(root, "",
                {"name", "task", "tasks", "options", "seed", "geometry", "p", "A", "V", "g", "u", "solver",
                 "declared_assumptions"},
                {"name", "geometry", "p"});
  Scenario sc;
  sc.path = path;
  sc.source = text;
  sc.name = rd.string(root["name"], "name");
  if (sc.name.empty() || sc.name.find_first_of("/\\ ") != std::string::npos)
    rd.fail(root["name"], "name", "must be nonempty without spaces or slashes");
  if (root["seed"]) {
    const double s = rd.number(root["seed"], "seed");
    if (s < 0 || s != std::floor(s)) rd.fail(root["seed"], "seed", "expected a nonnegative integer");
    sc.seed = static_cast<std::uint64_t>(s);
  }
  sc.geometry = detail::read_geometry(rd, root["geometry"]);
  sc.p = rd.number(root["p"], "p");
  if (!(sc.p > 1.0) || !std::isfinite(sc.p)) rd.fail(root["p"], "p", "must be a finite number > 1");
  const auto constants = expression_constants(sc);
  const bool two_d = sc.geometry.kind == GeometryKind::box2d;

  if (root["A"]) sc.A = detail::read_coefficient(rd, root["A"], constants);
  if (root["V"]) sc.V = detail::read_field(rd, root["V"], "V", constants);
  if (root["g"]) sc.g = detail::read_field(rd, root["g"], "g", constants);
  if (root["u"]) {
    const YAML::Node u = root["u"];
    if (u.IsMap()) {
      rd.check_keys(u, "u", {"solve"}, {"solve"});
      rd.check_keys(u["solve"], "u.solve", {"boundary"}, {"boundary"});
      sc.u.kind = USpec::Kind::solve;
      sc.u.expr = rd.string(u["solve"]["boundary"], "u.solve.boundary");
      rd.expression(u["solve"]["boundary"], "u.solve.boundary", sc.u.expr, constants);
    } else {
      sc.u.kind = USpec::Kind::expr;
      sc.u.expr = rd.string(u, "u");
      rd.expression(u, "u", sc.u.expr, constants);
    }
  }
  if (root["solver"]) sc.solver = detail::read_solver(rd, root["solver"]);
  sc.solver.seed = sc.seed;
  if (root["declared_assumptions"])
    sc.declared_assumptions = rd.strings(root["declared_assumptions"], "declared_assumptions");

  if (root["task"] && root["tasks"]) rd.fail(root, "task", "give either task or tasks");
  if (root["task"]) {
    sc.tasks.push_back(detail::read_task(rd, root["task"], root["options"], "task", two_d, constants));
  } else if (root["tasks"]) {
    if (root["options"]) rd.fail(root["options"], "options", "with a tasks list, options belong to each entry");
    const YAML::Node list = root["tasks"];
    if (!list.IsSequence() || list.size() == 0) rd.fail(list, "tasks", "expected a nonempty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string key = "tasks[" + std::to_string(i) + "]";
      rd.check_keys(list[i], key, {"task", "options"}, {"task"});
      sc.tasks.push_back(detail::read_task(rd, list[i]["task"], list[i]["options"], key + ".task", two_d, constants));
    }
  } else {
    rd.fail(root, "task", "missing required key 'task'");
  }

  const bool needs_u = std::any_of(sc.tasks.begin(), sc.tasks.end(), [](const TaskSpec& t) {
    return t.task == "capacity" || t.task == "hardy-norm" || t.task == "sandwich" || t.task == "criticality" ||
           t.task == "embedding-check" || t.task == "kp-check";
  });
  if (needs_u && sc.u.kind == USpec::Kind::none) rd.fail(root, "u", "missing required key 'u' for the requested task");
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace hardylab
