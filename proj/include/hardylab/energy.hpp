#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "hardylab/field.hpp"

namespace hardylab {

namespace detail {

/// One gradient sample of a cell: x-difference between nodes x0 -> x1 and,
/// in 2D, y-difference between y0 -> y1.
///
/// 2D cells use the four combinations {bottom, top} x {left, right} of edge
/// differences, i.e. the average over both diagonal triangulations. This
/// has no checkerboard null mode, unlike the bilinear cell average.
struct GradSample {
  std::size_t x0, x1, y0, y1;
};

struct CellStencil {
  CellNodes nodes;
  double measure = 0.0;
  double hx = 1.0;
  double hy = 1.0;
  int nsamples = 1;
  std::array<GradSample, 4> samples{};
};

inline CellStencil stencil(const Geometry& geo, std::size_t c) {
  CellStencil s;
  s.nodes = geo.cell_nodes(c);
  s.measure = geo.cell_measure(c);
  const auto& n = s.nodes.index;
  if (s.nodes.count == 2) {
    s.hx = geo.node(n[1]).x - geo.node(n[0]).x;
    s.nsamples = 1;
    s.samples[0] = {n[0], n[1], n[0], n[0]};
    return s;
  }
  s.hx = geo.hx();
  s.hy = geo.hy();
  s.nsamples = 4;
  // n: 00, 10, 01, 11
  s.samples[0] = {n[0], n[1], n[0], n[2]};  // bottom, left
  s.samples[1] = {n[0], n[1], n[1], n[3]};  // bottom, right
  s.samples[2] = {n[2], n[3], n[0], n[2]};  // top, left
  s.samples[3] = {n[2], n[3], n[1], n[3]};  // top, right
  return s;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 sample_gradient(const CellStencil& s, const GradSample& k, std::span<const double> phi, bool two_d) {
  Vec2 v{(phi[k.x1] - phi[k.x0]) / s.hx, 0.0};
  if (two_d) v.y = (phi[k.y1] - phi[k.y0]) / s.hy;
  return v;
}

inline Vec2 apply(const CellMatrix& a, const Vec2& v, bool two_d) {
  if (!two_d) return {a.a11 * v.x, 0.0};
  return {a.a11 * v.x + a.a12 * v.y, a.a12 * v.x + a.a22 * v.y};
}

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

inline double cell_mean(const CellStencil& s, std::span<const double> phi) {
  double sum = 0.0;
  for (int k = 0; k < s.nodes.count; ++k) sum += phi[s.nodes.index[k]];
  return sum / s.nodes.count;
}

/// sign(t) |t|^{p-1}
inline double signed_pow(double t, double pm1) { return t == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(t), pm1), t); }

inline void check_field(const Problem& pr, const ScalarField& f, const char* what) {
  require_same_geometry(pr.geometry, f.geometry, what);
}

/// max over samples of |xi|_A
inline double max_gradient_norm(const Problem& pr, std::span<const double> phi) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  double mx = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const CellStencil s = stencil(geo, c);
    for (int k = 0; k < s.nsamples; ++k) {
      const Vec2 xi = sample_gradient(s, s.samples[k], phi, two_d);
      mx = std::max(mx, std::sqrt(std::max(0.0, dot(xi, apply(pr.A[c], xi, two_d)))));
    }
  }
  return mx;
}

/// Adds grad_phi of sum_c m_c w_c |phibar_c|^p into out.
inline void add_potential_gradient(const Geometry& geo, const CellField& w, double p, std::span<const double> phi,
                                   std::span<double> out, bool absolute) {
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const double wc = absolute ? std::abs(w[c]) : w[c];
    if (wc == 0.0) continue;
    const CellStencil s = stencil(geo, c);
    const double mean = cell_mean(s, phi);
    const double d = s.measure * wc * p * signed_pow(mean, p - 1.0) / s.nodes.count;
    for (int k = 0; k < s.nodes.count; ++k) out[s.nodes.index[k]] += d;
  }
}

inline double potential_integral(const Geometry& geo, const CellField& w, double p, std::span<const double> phi,
                                 bool absolute) {
  double sum = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const double wc = absolute ? std::abs(w[c]) : w[c];
    if (wc == 0.0) continue;
    const CellStencil s = stencil(geo, c);
    sum += s.measure * wc * std::pow(std::abs(cell_mean(s, phi)), p);
  }
  return sum;
}

}  // namespace detail

/// Kinetic part int |grad phi|_A^p.
inline double gradient_energy(const Problem& pr, std::span<const double> phi) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  const double half_p = 0.5 * pr.p;
  double sum = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    double cell = 0.0;
    for (int k = 0; k < s.nsamples; ++k) {
      const detail::Vec2 xi = detail::sample_gradient(s, s.samples[k], phi, two_d);
      const double a2 = detail::dot(xi, detail::apply(pr.A[c], xi, two_d));
      if (a2 > 0.0) cell += std::pow(a2, half_p);
    }
    sum += s.measure * cell / s.nsamples;
  }
  return sum;
}

/// Q_{p,A,V}(phi) = int |grad phi|_A^p + V |phi|^p (midpoint rule, cell-averaged phi).
inline double energy_Q(const Problem& pr, std::span<const double> phi) {
  return gradient_energy(pr, phi) + detail::potential_integral(*pr.geometry, pr.V, pr.p, phi, false);
}

inline double energy_Q(const Problem& pr, const ScalarField& phi) {
  detail::check_field(pr, phi, "energy_Q");
  return energy_Q(pr, std::span<const double>(phi.values));
}

/// int |g| |phi|^p
inline double weight_integral(const Problem& pr, std::span<const double> phi) {
  return detail::potential_integral(*pr.geometry, pr.g, pr.p, phi, true);
}

inline double weight_integral(const Problem& pr, const ScalarField& phi) {
  detail::check_field(pr, phi, "weight_integral");
  return weight_integral(pr, std::span<const double>(phi.values));
}

inline void weight_gradient(const Problem& pr, std::span<const double> phi, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  detail::add_potential_gradient(*pr.geometry, pr.g, pr.p, phi, out, true);
}

/// Gradient of Q with respect to nodal values. For p < 2 the factor
/// |xi|_A^{p-2} is regularized as (|xi|_A^2 + eps^2)^{(p-2)/2}, eps = 1e-10
/// times the largest sample gradient; energy values are never regularized.
inline void energy_gradient(const Problem& pr, std::span<const double> phi, std::span<double> out) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  const double p = pr.p;
  std::fill(out.begin(), out.end(), 0.0);
  double eps2 = 0.0;
  if (p < 2.0) {
    const double e = 1e-10 * detail::max_gradient_norm(pr, phi);
    eps2 = e * e;
  }
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double w = s.measure / s.nsamples;
    for (int k = 0; k < s.nsamples; ++k) {
      const auto& sm = s.samples[k];
      const detail::Vec2 xi = detail::sample_gradient(s, sm, phi, two_d);
      const detail::Vec2 axi = detail::apply(pr.A[c], xi, two_d);
      const double a2 = detail::dot(xi, axi) + eps2;
      if (a2 <= 0.0) continue;
      const double coef = w * p * std::pow(a2, 0.5 * (p - 2.0));
      const double gx = coef * axi.x / s.hx;
      out[sm.x1] += gx;
      out[sm.x0] -= gx;
      if (two_d) {
        const double gy = coef * axi.y / s.hy;
        out[sm.y1] += gy;
        out[sm.y0] -= gy;
      }
    }
  }
  detail::add_potential_gradient(geo, pr.V, p, phi, out, false);
}

inline ScalarField energy_gradient(const Problem& pr, const ScalarField& phi) {
  detail::check_field(pr, phi, "energy_gradient");
  ScalarField out(pr.geometry);
  energy_gradient(pr, std::span<const double>(phi.values), std::span<double>(out.values));
  return out;
}

/// Simplified energy E_u(phi) = int u^2 |grad phi|_A^2 (phi |grad u|_A + u |grad phi|_A)^{p-2}.
inline double simplified_energy(const Problem& pr, std::span<const double> u, std::span<const double> phi) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  const double p = pr.p;
  double sum = 0.0;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double ubar = detail::cell_mean(s, u);
    const double phibar = detail::cell_mean(s, phi);
    double cell = 0.0;
    for (int k = 0; k < s.nsamples; ++k) {
      const detail::Vec2 xi = detail::sample_gradient(s, s.samples[k], phi, two_d);
      const detail::Vec2 eta = detail::sample_gradient(s, s.samples[k], u, two_d);
      const double a = std::sqrt(std::max(0.0, detail::dot(xi, detail::apply(pr.A[c], xi, two_d))));
      if (a == 0.0) continue;
      const double b = std::sqrt(std::max(0.0, detail::dot(eta, detail::apply(pr.A[c], eta, two_d))));
      const double sfac = phibar * b + ubar * a;
      cell += ubar * ubar * a * a * std::pow(sfac, p - 2.0);
    }
    sum += s.measure * cell / s.nsamples;
  }
  return sum;
}

namespace detail {

inline void check_simplified_inputs(const Problem& pr, const ScalarField& u, const ScalarField& phi) {
  check_field(pr, u, "simplified_energy");
  check_field(pr, phi, "simplified_energy");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (pr.geometry->is_interior(i) && !(u[i] > 0.0)) throw DomainError("simplified_energy: u must be positive on the interior");
    if (u[i] < 0.0) throw DomainError("simplified_energy: u must be nonnegative");
    if (phi[i] < 0.0) throw DomainError("simplified_energy: phi must be nonnegative");
  }
}

}  // namespace detail

inline double simplified_energy(const Problem& pr, const ScalarField& u, const ScalarField& phi) {
  detail::check_simplified_inputs(pr, u, phi);
  return simplified_energy(pr, std::span<const double>(u.values), std::span<const double>(phi.values));
}

/// Gradient of E_u with respect to phi (u fixed).
inline void simplified_energy_gradient(const Problem& pr, std::span<const double> u, std::span<const double> phi,
                                       std::span<double> out) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  const double p = pr.p;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double w = s.measure / s.nsamples;
    const double ubar = detail::cell_mean(s, u);
    const double phibar = detail::cell_mean(s, phi);
    double dmean = 0.0;
    for (int k = 0; k < s.nsamples; ++k) {
      const auto& sm = s.samples[k];
      const detail::Vec2 xi = detail::sample_gradient(s, sm, phi, two_d);
      const detail::Vec2 axi = detail::apply(pr.A[c], xi, two_d);
      const detail::Vec2 eta = detail::sample_gradient(s, sm, u, two_d);
      const double a = std::sqrt(std::max(0.0, detail::dot(xi, axi)));
      if (a == 0.0) continue;
      const double b = std::sqrt(std::max(0.0, detail::dot(eta, detail::apply(pr.A[c], eta, two_d))));
      const double sfac = phibar * b + ubar * a;
      const double spm3 = std::pow(sfac, p - 3.0);
      const double coef = w * ubar * ubar * spm3 * (2.0 * sfac + (p - 2.0) * ubar * a);
      const double gx = coef * axi.x / s.hx;
      out[sm.x1] += gx;
      out[sm.x0] -= gx;
      if (two_d) {
        const double gy = coef * axi.y / s.hy;
        out[sm.y1] += gy;
        out[sm.y0] -= gy;
      }
      dmean += w * ubar * ubar * a * a * (p - 2.0) * spm3 * b;
    }
    for (int k = 0; k < s.nodes.count; ++k) out[s.nodes.index[k]] += dmean / s.nodes.count;
  }
}

/// Per-cell Picone Lagrangian density
/// L(phi, Phi) = |grad phi|_A^p + (p-1) (phi/Phi)^p |grad Phi|_A^p
///               - p (phi/Phi)^{p-1} |grad Phi|_A^{p-2} A grad Phi . grad phi,
/// with phi/Phi the ratio of cell averages. Nonnegative by Young's inequality.
inline CellField picone_lagrangian(const Problem& pr, const ScalarField& phi, const ScalarField& Phi) {
  detail::check_field(pr, phi, "picone_lagrangian");
  detail::check_field(pr, Phi, "picone_lagrangian");
  const Geometry& geo = *pr.geometry;
  for (std::size_t i = 0; i < geo.num_nodes(); ++i) {
    if (geo.is_interior(i) && !(Phi[i] > 0.0)) throw DomainError("picone_lagrangian: Phi must be positive on the interior");
    if (phi[i] < 0.0) throw DomainError("picone_lagrangian: phi must be nonnegative");
  }
  const bool two_d = geo.is_2d();
  const double p = pr.p;
  CellField out(pr.geometry);
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double Phibar = detail::cell_mean(s, Phi.values);
    const double phibar = detail::cell_mean(s, phi.values);
    bool touches_interior = false;
    for (int k = 0; k < s.nodes.count; ++k) touches_interior = touches_interior || geo.is_interior(s.nodes.index[k]);
    if (touches_interior && !(Phibar > 0.0)) throw DomainError("picone_lagrangian: Phi must be positive on cells touching the interior");
    const double t = Phibar > 0.0 ? phibar / Phibar : 0.0;
    double cell = 0.0;
    for (int k = 0; k < s.nsamples; ++k) {
      const detail::Vec2 xi = detail::sample_gradient(s, s.samples[k], phi.values, two_d);
      const detail::Vec2 eta = detail::sample_gradient(s, s.samples[k], Phi.values, two_d);
      const detail::Vec2 aeta = detail::apply(pr.A[c], eta, two_d);
      const double xa = std::sqrt(std::max(0.0, detail::dot(xi, detail::apply(pr.A[c], xi, two_d))));
      const double ea2 = std::max(0.0, detail::dot(eta, aeta));
      double v = std::pow(xa, p);
      if (ea2 > 0.0 && t > 0.0) {
        // Same density regrouped around s = t |grad Phi|_A.
        const double s = t * std::sqrt(ea2);
        v = (std::pow(xa, p) - std::pow(s, p)) - p * std::pow(s, p - 2.0) * t * (detail::dot(aeta, xi) - t * ea2);
      }
      cell += v;
    }
    out[c] = cell / s.nsamples;
  }
  return out;
}

/// Sparse approximation of the Hessian of Q (kinetic part, plus V^+ when
/// requested), regularized so that flat cells stay positive definite.
/// Used as preconditioner by the minimizers.
inline Eigen::SparseMatrix<double> assemble_hessian(const Problem& pr, std::span<const double> phi,
                                                    bool include_potential = true, double rel_reg = 1e-8) {
  const Geometry& geo = *pr.geometry;
  const bool two_d = geo.is_2d();
  const double p = pr.p;
  const double gmax = detail::max_gradient_norm(pr, phi);
  const double delta2 = std::max(rel_reg * gmax * gmax, 1e-300);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(geo.num_cells() * (two_d ? 64 : 4) + geo.num_nodes());
  double phimax = 0.0;
  for (double v : phi) phimax = std::max(phimax, std::abs(v));
  const double pdelta2 = std::max(rel_reg * phimax * phimax, 1e-300);

  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const detail::CellStencil s = detail::stencil(geo, c);
    const double w = s.measure / s.nsamples;
    const CellMatrix& A = pr.A[c];
    for (int k = 0; k < s.nsamples; ++k) {
      const auto& sm = s.samples[k];
      const detail::Vec2 xi = detail::sample_gradient(s, sm, phi, two_d);
      const detail::Vec2 axi = detail::apply(A, xi, two_d);
      const double a2 = detail::dot(xi, axi) + delta2;
      const double base = w * p * std::pow(a2, 0.5 * (p - 2.0));
      const double rank1 = base * (p - 2.0) / a2;
      // 2x2 Hessian in gradient space.
      const double hxx = base * A.a11 + rank1 * axi.x * axi.x;
      const double hxy = base * A.a12 + rank1 * axi.x * axi.y;
      const double hyy = base * A.a22 + rank1 * axi.y * axi.y;
      const std::array<std::size_t, 4> idx{sm.x0, sm.x1, sm.y0, sm.y1};
      const std::array<double, 4> dx{-1.0 / s.hx, 1.0 / s.hx, 0.0, 0.0};
      const std::array<double, 4> dy{0.0, 0.0, -1.0 / s.hy, 1.0 / s.hy};
      const int nloc = two_d ? 4 : 2;
      for (int i = 0; i < nloc; ++i) {
        for (int j = 0; j < nloc; ++j) {
          double v = hxx * dx[i] * dx[j];
          if (two_d) v += hxy * (dx[i] * dy[j] + dy[i] * dx[j]) + hyy * dy[i] * dy[j];
          if (v != 0.0) trip.emplace_back(static_cast<int>(idx[i]), static_cast<int>(idx[j]), v);
        }
      }
    }
    if (include_potential && pr.V[c] > 0.0) {
      const double mean = detail::cell_mean(s, phi);
      const double v = s.measure * pr.V[c] * p * (p - 1.0) * std::pow(mean * mean + pdelta2, 0.5 * (p - 2.0)) /
                       (s.nodes.count * s.nodes.count);
      for (int i = 0; i < s.nodes.count; ++i)
        for (int j = 0; j < s.nodes.count; ++j)
          trip.emplace_back(static_cast<int>(s.nodes.index[i]), static_cast<int>(s.nodes.index[j]), v);
    }
  }
  const int n = static_cast<int>(geo.num_nodes());
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

/// Hessian of int |g||phi|^p (cell-averaged phi), regularized like the
/// potential part of assemble_hessian.
inline Eigen::SparseMatrix<double> assemble_weight_hessian(const Problem& pr, std::span<const double> phi,
                                                           double rel_reg = 1e-8) {
  const Geometry& geo = *pr.geometry;
  const double p = pr.p;
  double phimax = 0.0;
  for (double v : phi) phimax = std::max(phimax, std::abs(v));
  const double pdelta2 = std::max(rel_reg * phimax * phimax, 1e-300);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const double gc = std::abs(pr.g[c]);
    if (gc == 0.0) continue;
    const detail::CellStencil s = detail::stencil(geo, c);
    const double mean = detail::cell_mean(s, phi);
    const double v = s.measure * gc * p * (p - 1.0) * std::pow(mean * mean + pdelta2, 0.5 * (p - 2.0)) /
                     (s.nodes.count * s.nodes.count);
    for (int i = 0; i < s.nodes.count; ++i)
      for (int j = 0; j < s.nodes.count; ++j)
        trip.emplace_back(static_cast<int>(s.nodes.index[i]), static_cast<int>(s.nodes.index[j]), v);
  }
  const int n = static_cast<int>(geo.num_nodes());
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

/// Morrey norm sup { m_q(r) int_{omega cap B_r(y)} |f| } over centers y at
/// the nodes of omega and `num_radii` log-spaced radii in [h, diam(omega)].
/// m_q(r) = r^{-N/q'}; when p equals N the logarithmic modulus
/// [log(diam/r)]^{q/N'} is used instead.
inline double morrey_norm(const CellField& f, const SubsetMask& omega, double q, double p, int num_radii = 32) {
  require_same_geometry(f.geometry, omega.geometry, "morrey_norm");
  if (!(q >= 1.0)) throw DomainError("morrey_norm: q must be >= 1");
  if (omega.empty()) throw DomainError("morrey_norm: empty set");
  const Geometry& geo = *f.geometry;
  const int N = geo.dim();
  std::vector<std::size_t> centers;
  for (std::size_t i = 0; i < omega.flags.size(); ++i)
    if (omega.flags[i]) centers.push_back(i);
  double diam = 0.0;
  if (geo.is_2d()) {
    for (std::size_t a = 0; a < centers.size(); ++a)
      for (std::size_t b = a + 1; b < centers.size(); ++b)
        diam = std::max(diam, geo.distance(geo.node(centers[a]), geo.node(centers[b])));
  } else {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i : centers) {
      lo = std::min(lo, geo.node(i).x);
      hi = std::max(hi, geo.node(i).x);
    }
    diam = hi - lo;
  }
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < geo.num_cells(); ++c)
    if (omega.contains_cell(c)) cells.push_back(c);
  if (cells.empty() || diam <= 0.0) return 0.0;

  const double h = std::min(geo.spacing(), diam);
  std::vector<double> radii(static_cast<std::size_t>(std::max(num_radii, 1)));
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double t = radii.size() == 1 ? 1.0 : static_cast<double>(k) / (radii.size() - 1);
    radii[k] = h * std::pow(diam / h, t);
  }
  radii.back() = diam;

  const bool log_modulus = std::abs(p - N) < 1e-12;
  auto modulus = [&](double r) {
    if (log_modulus) {
      const double inv_nprime = 1.0 - 1.0 / N;
      const double e = q * inv_nprime;
      const double l = std::log(diam / r);
      return e == 0.0 ? 1.0 : std::pow(std::max(l, 0.0), e);
    }
    const double inv_qprime = 1.0 - 1.0 / q;
    return std::pow(r, -N * inv_qprime);
  };

  double best = 0.0;
  std::vector<std::pair<double, double>> dist_mass(cells.size());
  for (std::size_t y : centers) {
    const Point& py = geo.node(y);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::size_t c = cells[k];
      dist_mass[k] = {geo.distance(py, geo.cell_midpoint(c)), geo.cell_measure(c) * std::abs(f[c])};
    }
    std::sort(dist_mass.begin(), dist_mass.end());
    std::vector<double> prefix(dist_mass.size() + 1, 0.0);
    for (std::size_t k = 0; k < dist_mass.size(); ++k) prefix[k + 1] = prefix[k] + dist_mass[k].second;
    for (double r : radii) {
      const auto it = std::upper_bound(dist_mass.begin(), dist_mass.end(), std::make_pair(r * (1.0 + 1e-12), std::numeric_limits<double>::infinity()));
      const double mass = prefix[static_cast<std::size_t>(it - dist_mass.begin())];
      best = std::max(best, modulus(r) * mass);
    }
  }
  return best;
}

struct MorreyAdamsFit {
  std::vector<double> deltas;
  std::vector<double> constants;  ///< smallest K(delta) valid over all trials
  double morrey_norm = 0.0;
  double delta_exponent = 0.0;    ///< N / (pq - N)
  double prefactor = 0.0;         ///< max_delta K(delta) delta^{N/(pq-N)} / ||f||^{pq/(pq-N)}
};

/// Empirical constant in int |f||phi|^p <= delta int |grad phi|^p + K(delta) int |phi|^p
/// over `trials` random test fields supported in omega.
inline MorreyAdamsFit morrey_adams_fit(const CellField& f, const SubsetMask& omega, double p, double q,
                                       const std::vector<double>& deltas, int trials, std::uint64_t seed = 1) {
  require_same_geometry(f.geometry, omega.geometry, "morrey_adams_fit");
  const GeometryPtr& geo = f.geometry;
  const int N = geo->dim();
  if (trials < 1) throw ConfigError("morrey_adams_fit: trials must be >= 1");
  if (p * q <= N) throw ConfigError("morrey_adams_fit: requires pq > N");
  for (double d : deltas)
    if (!(d > 0.0)) throw ConfigError("morrey_adams_fit: deltas must be positive");

  MorreyAdamsFit out;
  out.deltas = deltas;
  out.morrey_norm = morrey_norm(f, omega, q, p);
  out.delta_exponent = N / (p * q - N);

  Problem pr = Problem::make(geo, p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> best(deltas.size(), 0.0);
  std::vector<double> phi(geo->num_nodes());
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = (omega.contains(i) && geo->is_interior(i)) ? unif(rng) : 0.0;
    // Odd trials are smoothed to probe low-frequency fields.
    const int passes = (t % 2 == 1) ? 8 : 0;
    for (int s = 0; s < passes; ++s) {
      std::vector<double> next = phi;
      for (std::size_t c = 0; c < geo->num_cells(); ++c) {
        const CellNodes cn = geo->cell_nodes(c);
        double mean = 0.0;
        for (int k = 0; k < cn.count; ++k) mean += phi[cn.index[k]];
        mean /= cn.count;
        for (int k = 0; k < cn.count; ++k) next[cn.index[k]] = 0.5 * (next[cn.index[k]] + mean);
      }
      for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = (omega.contains(i) && geo->is_interior(i)) ? next[i] : 0.0;
    }
    const double lhs = detail::potential_integral(*geo, f, p, phi, true);
    const double grad = gradient_energy(pr, phi);
    CellField one(geo, 1.0);
    const double mass = detail::potential_integral(*geo, one, p, phi, false);
    if (mass <= 0.0) continue;
    for (std::size_t k = 0; k < deltas.size(); ++k) best[k] = std::max(best[k], (lhs - deltas[k] * grad) / mass);
  }
  out.constants = best;
  if (out.morrey_norm > 0.0) {
    const double norm_pow = std::pow(out.morrey_norm, p * q / (p * q - N));
    for (std::size_t k = 0; k < deltas.size(); ++k)
      out.prefactor = std::max(out.prefactor, best[k] * std::pow(deltas[k], out.delta_exponent) / norm_pow);
  }
  return out;
}

}  // namespace hardylab
