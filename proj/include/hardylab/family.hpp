#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hardylab/field.hpp"

namespace hardylab {

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline std::string fmt_point(const Geometry& geo, const Point& p) {
  if (geo.is_2d()) return "(" + fmt_num(p.x) + "," + fmt_num(p.y) + ")";
  return fmt_num(p.x);
}

}  // namespace detail

/// Distance from each node to the boundary of the domain.
inline ScalarField distance_to_boundary(const GeometryPtr& geo) {
  const GeometrySpec& s = geo->spec();
  return sample_nodes(geo, [&](const Point& p) {
    switch (s.kind) {
      case GeometryKind::interval: return std::min(p.x - s.lo, s.hi - p.x);
      case GeometryKind::radial: {
        const bool inner = s.lo > 0.0 || s.exclude_origin;
        return inner ? std::min(p.x - s.lo, s.hi - p.x) : s.hi - p.x;
      }
      case GeometryKind::box2d:
        return std::min({p.x - s.lo, s.hi - p.x, p.y - s.lo_y, s.hi_y - p.y});
    }
    return 0.0;
  });
}

/// Nested compact masks Omega_1 c Omega_2 c ... c Omega_count.
///
/// Bounded kinds shrink a margin L / 2^{k+1} towards the boundary; a radial
/// ball containing the origin instead grows balls of radius R / 2^{count-k+1}.
inline std::vector<SubsetMask> exhaustion(const GeometryPtr& geo, int count) {
  if (count < 2) throw ConfigError("exhaustion: count must be >= 2");
  const GeometrySpec& s = geo->spec();
  std::vector<SubsetMask> out;
  const double eps = 1e-12 * (s.hi - s.lo);
  for (int k = 1; k <= count; ++k) {
    const double frac = std::ldexp(1.0, -(k + 1));
    switch (s.kind) {
      case GeometryKind::interval: {
        const double m = (s.hi - s.lo) * frac;
        const double a = s.lo + m, b = s.hi - m;
        out.push_back(mask_where(geo, [&](const Point& p) { return p.x >= a - eps && p.x <= b + eps; },
                                 "interval[" + detail::fmt_num(a) + "," + detail::fmt_num(b) + "]"));
        break;
      }
      case GeometryKind::radial: {
        if (s.lo == 0.0 && !s.exclude_origin) {
          const double radius = s.hi * std::ldexp(1.0, -(count - k + 1));
          out.push_back(mask_where(geo, [&](const Point& p) { return p.x <= radius + eps; },
                                   "ball(0," + detail::fmt_num(radius) + ")"));
        } else {
          const double m = (s.hi - s.lo) * frac;
          const double a = s.lo + m, b = s.hi - m;
          out.push_back(mask_where(geo, [&](const Point& p) { return p.x >= a - eps && p.x <= b + eps; },
                                   "shell[" + detail::fmt_num(a) + "," + detail::fmt_num(b) + "]"));
        }
        break;
      }
      case GeometryKind::box2d: {
        const double mx = (s.hi - s.lo) * frac, my = (s.hi_y - s.lo_y) * frac;
        const double x0 = s.lo + mx, x1 = s.hi - mx, y0 = s.lo_y + my, y1 = s.hi_y - my;
        out.push_back(mask_where(
            geo, [&](const Point& p) { return p.x >= x0 - eps && p.x <= x1 + eps && p.y >= y0 - eps && p.y <= y1 + eps; },
            "box[" + detail::fmt_num(x0) + "," + detail::fmt_num(x1) + "]x[" + detail::fmt_num(y0) + "," +
                detail::fmt_num(y1) + "]"));
        break;
      }
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].empty() || (k > 0 && out[k].count() <= out[k - 1].count()))
      throw ConfigError("exhaustion: geometry too coarse to nest " + std::to_string(count) + " levels");
  }
  return out;
}

/// Open balls |x - center| < R_k, used as exhausting subdomains with a
/// Dirichlet condition exactly at radius R_k.
inline std::vector<SubsetMask> ball_exhaustion(const GeometryPtr& geo, const std::vector<double>& radii,
                                               Point center = {}) {
  if (radii.size() < 2) throw ConfigError("ball_exhaustion: need at least two radii");
  std::vector<SubsetMask> out;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (k > 0 && !(radii[k] > radii[k - 1])) throw ConfigError("ball_exhaustion: radii must increase");
    const double R = radii[k];
    const double eps = 1e-12 * R;
    out.push_back(mask_where(geo, [&](const Point& p) { return geo->distance(p, center) < R - eps; },
                             "ball(" + detail::fmt_point(*geo, center) + "," + detail::fmt_num(R) + ")"));
    if (out.back().empty()) throw ConfigError("ball_exhaustion: empty ball of radius " + detail::fmt_num(R));
  }
  return out;
}

struct BallFamily {
  std::vector<Point> centers;
  std::vector<double> radii;
};

/// Upper level sets {field >= t_q}, t_q the q-quantile of the field over
/// interior nodes (by node count).
struct LevelFamily {
  ScalarField field;
  std::vector<double> quantiles;
};

struct AnnulusFamily {
  Point center;
  std::vector<std::pair<double, double>> radius_pairs;
};

using FamilySpec = std::variant<BallFamily, LevelFamily, AnnulusFamily>;

inline SubsetMask ball_mask(const GeometryPtr& geo, const Point& center, double radius) {
  const double eps = 1e-12 * std::max(1.0, radius);
  return mask_where(geo, [&](const Point& p) { return geo->distance(p, center) <= radius + eps; },
                    "ball(" + detail::fmt_point(*geo, center) + "," + detail::fmt_num(radius) + ")");
}

inline SubsetMask annulus_mask(const GeometryPtr& geo, const Point& center, double inner, double outer) {
  const double eps = 1e-12 * std::max(1.0, outer);
  return mask_where(
      geo,
      [&](const Point& p) {
        const double d = geo->distance(p, center);
        return d >= inner - eps && d <= outer + eps;
      },
      "annulus(" + detail::fmt_point(*geo, center) + "," + detail::fmt_num(inner) + "," + detail::fmt_num(outer) + ")");
}

/// Axis-aligned box [x0,x1] (x [y0,y1] in 2D), closed.
inline SubsetMask box_mask(const GeometryPtr& geo, double x0, double x1, double y0 = 0.0, double y1 = 0.0) {
  const double eps = 1e-12 * std::max({1.0, std::abs(x0), std::abs(x1)});
  if (geo->is_2d())
    return mask_where(
        geo, [&](const Point& p) { return p.x >= x0 - eps && p.x <= x1 + eps && p.y >= y0 - eps && p.y <= y1 + eps; },
        "box[" + detail::fmt_num(x0) + "," + detail::fmt_num(x1) + "]x[" + detail::fmt_num(y0) + "," +
            detail::fmt_num(y1) + "]");
  return mask_where(geo, [&](const Point& p) { return p.x >= x0 - eps && p.x <= x1 + eps; },
                    "interval[" + detail::fmt_num(x0) + "," + detail::fmt_num(x1) + "]");
}

inline SubsetMask level_mask(const ScalarField& field, double quantile) {
  const GeometryPtr& geo = field.geometry;
  if (!(quantile >= 0.0 && quantile < 1.0)) throw ConfigError("level set: quantile must be in [0,1)");
  std::vector<double> vals;
  for (std::size_t i = 0; i < field.size(); ++i)
    if (geo->is_interior(i)) vals.push_back(field[i]);
  if (vals.empty()) throw ConfigError("level set: no interior nodes");
  std::sort(vals.begin(), vals.end());
  const auto idx = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(vals.size())));
  const double t = vals[std::min(idx, vals.size() - 1)];
  SubsetMask m(geo, "level(q=" + detail::fmt_num(quantile) + ",t=" + detail::fmt_num(t) + ")");
  for (std::size_t i = 0; i < field.size(); ++i) m.flags[i] = (geo->is_interior(i) && field[i] >= t) ? 1 : 0;
  return m;
}

/// Finite surrogate for "all compact F in Omega": deterministic,
/// duplicate-free, nonempty masks inside the interior.
inline std::vector<SubsetMask> set_family(const GeometryPtr& geo, const std::vector<FamilySpec>& specs) {
  std::vector<SubsetMask> out;
  auto push = [&](SubsetMask m) {
    if (m.empty()) return;
    if (std::find(out.begin(), out.end(), m) != out.end()) return;
    out.push_back(std::move(m));
  };
  for (const FamilySpec& spec : specs) {
    if (const auto* balls = std::get_if<BallFamily>(&spec)) {
      for (const Point& c : balls->centers)
        for (double r : balls->radii) push(ball_mask(geo, c, r));
    } else if (const auto* levels = std::get_if<LevelFamily>(&spec)) {
      require_same_geometry(levels->field.geometry, geo, "set_family");
      for (double q : levels->quantiles) push(level_mask(levels->field, q));
    } else if (const auto* ann = std::get_if<AnnulusFamily>(&spec)) {
      for (const auto& [a, b] : ann->radius_pairs) {
        if (!(b > a)) throw ConfigError("set_family: annulus needs inner < outer");
        push(annulus_mask(geo, ann->center, a, b));
      }
    }
  }
  if (out.empty()) throw ConfigError("set_family: empty family");
  return out;
}

inline std::vector<SubsetMask> set_family(const GeometryPtr& geo, const FamilySpec& spec) {
  return set_family(geo, std::vector<FamilySpec>{spec});
}

}  // namespace hardylab
