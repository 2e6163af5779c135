#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hardylab/error.hpp"
#include "hardylab/geometry.hpp"

namespace hardylab {

struct OracleValue {
  std::string name;
  std::map<std::string, double> parameters;
  double value = 0.0;
  std::string formula_note;
};

namespace detail {

inline int oracle_dim(double N) {
  if (N != std::floor(N) || N < 1.0 || N > 4.0) throw DomainError("oracle: N must be an integer in 1..4");
  return static_cast<int>(N);
}

inline void oracle_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("oracle: p must be > 1");
}

}  // namespace detail

/// p-capacity of the closed ball B_r relative to B_R in R^N.
inline double radial_condenser_capacity(double p, double N, double r, double R) {
  detail::oracle_p(p);
  const int n = detail::oracle_dim(N);
  if (!(r > 0.0) || !(R > r)) throw DomainError("radial_condenser_capacity: need 0 < r < R");
  const double omega = unit_sphere_area(n);
  if (p == N) return omega * std::pow(std::log(R / r), 1.0 - p);
  const double alpha = (p - N) / (p - 1.0);
  return omega * std::pow(std::abs(alpha), p - 1.0) * std::pow(std::abs(std::pow(r, alpha) - std::pow(R, alpha)), 1.0 - p);
}

/// Sharp constant ((p-1)/p)^p of the one-dimensional Hardy inequality.
inline double hardy_1d_constant(double p) {
  detail::oracle_p(p);
  return std::pow((p - 1.0) / p, p);
}

/// Sharp constant (|N-p|/p)^p of the Hardy inequality with weight |x|^{-p}
/// in R^N minus the origin.
inline double hardy_radial_constant(double p, double N) {
  detail::oracle_p(p);
  detail::oracle_dim(N);
  if (p == N) throw DomainError("hardy_radial_constant: degenerate for p = N");
  return std::pow(std::abs(N - p) / p, p);
}

/// Discrete radial condenser: exact minimizer of the midpoint-weighted
/// energy sum_c w_c dr |s_c|^p subject to sum_c s_c dr = 1, where
/// w_c = omega r_c^{N-1}. Converges to radial_condenser_capacity.
inline double radial_condenser_brute_force(double p, double N, double r, double R, int cells = 1 << 16) {
  detail::oracle_p(p);
  const int n = detail::oracle_dim(N);
  if (!(r > 0.0) || !(R > r)) throw DomainError("radial_condenser_brute_force: need 0 < r < R");
  const double omega = unit_sphere_area(n);
  // Midpoint rule in s = log(rho), where the integrand is a pure exponential.
  const double ds = std::log(R / r) / cells;
  double sum = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double mid = r * std::exp((c + 0.5) * ds);
    sum += ds * mid * std::pow(omega * std::pow(mid, n - 1), -1.0 / (p - 1.0));
  }
  return std::pow(sum, 1.0 - p);
}

/// Rayleigh quotient of phi(x) = x^a (1 - x) on the unit ball (radial
/// weight x^{N-1}, Hardy weight x^{-p}), a slightly above the critical power
/// (p - N) / p. In t = -log x both integrands are exp(-kappa t) times a factor
/// that is constant to machine precision beyond t = 60, so Simpson covers
/// [0, 60] and the rest is added in closed form. As a tends to the critical
/// power the quotient tends to hardy_1d_constant (N = 1) or
/// hardy_radial_constant.
inline double hardy_quotient_brute_force(double p, double N, double excess = 1e-7, int panels = 1 << 18) {
  detail::oracle_p(p);
  const int n = detail::oracle_dim(N);
  const double crit = (p - n) / p;
  const double a = crit + excess * std::max(1.0, std::abs(crit));
  const double kappa = p * (a - crit);
  const double T = 60.0;
  const double h = T / panels;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = i * h;
    const double x = std::exp(-t);
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double decay = std::exp(-kappa * t);
    num += w * decay * std::pow(std::abs(a - (a + 1.0) * x), p);
    den += w * decay * std::pow(1.0 - x, p);
  }
  const double tail = std::exp(-kappa * T) / kappa;
  num = num * h / 3.0 + std::pow(std::abs(a), p) * tail;
  den = den * h / 3.0 + tail;
  return num / den;
}

inline OracleValue evaluate_oracle(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key) {
    const auto it = params.find(key);
    if (it == params.end()) throw ConfigError("oracle " + name + ": missing parameter '" + key + "'");
    return it->second;
  };
  OracleValue out{name, params, 0.0, {}};
  if (name == "radial_condenser_capacity") {
    out.value = radial_condenser_capacity(get("p"), get("N"), get("r"), get("R"));
    out.formula_note = get("p") == get("N") ? "omega_{N-1} (ln(R/r))^{1-N}"
                                            : "omega_{N-1} |alpha|^{p-1} |r^alpha - R^alpha|^{1-p}, alpha = (p-N)/(p-1)";
  } else if (name == "hardy_1d_constant") {
    out.value = hardy_1d_constant(get("p"));
    out.formula_note = "((p-1)/p)^p";
  } else if (name == "hardy_radial_constant") {
    out.value = hardy_radial_constant(get("p"), get("N"));
    out.formula_note = get("p") > get("N") ? "(|N-p|/p)^p (p > N: absolute value taken)" : "((N-p)/p)^p";
  } else {
    throw ConfigError("unknown oracle '" + name + "'");
  }
  return out;
}

inline std::vector<std::string> oracle_names() {
  return {"radial_condenser_capacity", "hardy_1d_constant", "hardy_radial_constant"};
}

}  // namespace hardylab
