#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hardylab/error.hpp"

namespace hardylab {

/// Refinement variable of a convergence study: the mesh size h, or
/// s = 1 / log(1/h) for quantities converging logarithmically in h.
enum class StepVariable { h, log };

struct Extrapolation {
  double limit = 0.0;
  double order = 0.0;
  bool ok = false;
  std::string note;
};

namespace detail {

/// q solving (v0 - v1) / (v1 - v2) = (s0^q - s1^q) / (s1^q - s2^q) by bisection.
inline double fit_order(const double s[3], const double v[3]) {
  const double target = (v[0] - v[1]) / (v[1] - v[2]);
  auto ratio = [&](double q) {
    return (std::pow(s[0], q) - std::pow(s[1], q)) / (std::pow(s[1], q) - std::pow(s[2], q));
  };
  double lo = 1e-3, hi = 20.0;
  double flo = ratio(lo) - target, fhi = ratio(hi) - target;
  if (!(flo * fhi < 0.0)) return std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = ratio(mid) - target;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Richardson extrapolation of v(h) = L + C s^q from the three finest
/// samples, with the order q observed from the data. `h` are mesh sizes in
/// any order of refinement; the finest three (smallest h) are used.
inline Extrapolation richardson(const std::vector<double>& h, const std::vector<double>& values,
                                StepVariable variable = StepVariable::h) {
  if (h.size() != values.size() || h.size() < 3) throw ConfigError("richardson: need at least 3 (h, value) samples");
  std::vector<std::size_t> idx(h.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return h[a] > h[b]; });
  double s[3], v[3];
  for (int k = 0; k < 3; ++k) {
    const std::size_t i = idx[idx.size() - 3 + k];
    if (!(h[i] > 0.0)) throw ConfigError("richardson: mesh sizes must be positive");
    if (variable == StepVariable::log && !(h[i] < 1.0)) throw ConfigError("richardson: log variable needs h < 1");
    s[k] = variable == StepVariable::h ? h[i] : 1.0 / std::log(1.0 / h[i]);
    v[k] = values[i];
  }
  Extrapolation out;
  const double d01 = v[0] - v[1], d12 = v[1] - v[2];
  if (d12 == 0.0) {
    out.limit = v[2];
    out.ok = true;
    out.note = "converged samples";
    return out;
  }
  if (d01 * d12 <= 0.0) {
    out.limit = v[2];
    out.note = "non-monotone samples; finest value reported";
    return out;
  }
  const double q = detail::fit_order(s, v);
  if (!std::isfinite(q)) {
    out.limit = v[2];
    out.note = "order fit failed; finest value reported";
    return out;
  }
  const double C = d12 / (std::pow(s[1], q) - std::pow(s[2], q));
  out.order = q;
  out.limit = v[2] - C * std::pow(s[2], q);
  out.ok = true;
  return out;
}

inline std::string to_string(StepVariable v) { return v == StepVariable::h ? "h" : "log"; }

}  // namespace hardylab
