#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hardylab/geometry.hpp"

namespace hardylab {

/// Real values per node (test functions, u, ground states).
struct ScalarField {
  GeometryPtr geometry;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(GeometryPtr geo, double fill = 0.0)
      : geometry(std::move(geo)), values(geometry->num_nodes(), fill) {}
  ScalarField(GeometryPtr geo, std::vector<double> v) : geometry(std::move(geo)), values(std::move(v)) {
    if (values.size() != geometry->num_nodes()) throw UsageError("ScalarField: size mismatch");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// Real values per cell. Weights V and g live here so that singular
/// expressions are sampled at cell midpoints, never at nodes.
struct CellField {
  GeometryPtr geometry;
  std::vector<double> values;

  CellField() = default;
  CellField(GeometryPtr geo, double fill = 0.0)
      : geometry(std::move(geo)), values(geometry->num_cells(), fill) {}
  CellField(GeometryPtr geo, std::vector<double> v) : geometry(std::move(geo)), values(std::move(v)) {
    if (values.size() != geometry->num_cells()) throw UsageError("CellField: size mismatch");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  }
  bool has_negative() const {
    return std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0; });
  }
};

inline ScalarField sample_nodes(const GeometryPtr& geo, const std::function<double(const Point&)>& f) {
  ScalarField out(geo);
  for (std::size_t i = 0; i < geo->num_nodes(); ++i) out[i] = f(geo->node(i));
  return out;
}

inline CellField sample_cells(const GeometryPtr& geo, const std::function<double(const Point&)>& f) {
  CellField out(geo);
  for (std::size_t c = 0; c < geo->num_cells(); ++c) out[c] = f(geo->cell_midpoint(c));
  return out;
}

/// Average of nodal values over each cell.
inline CellField cell_average(const ScalarField& f) {
  const Geometry& geo = *f.geometry;
  CellField out(f.geometry);
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const CellNodes cn = geo.cell_nodes(c);
    double s = 0.0;
    for (int k = 0; k < cn.count; ++k) s += f[cn.index[k]];
    out[c] = s / cn.count;
  }
  return out;
}

/// Set of flagged nodes standing for a compact set F, a subdomain, or an
/// exhaustion element. A cell belongs to the set when all its nodes do.
struct SubsetMask {
  GeometryPtr geometry;
  std::vector<std::uint8_t> flags;
  std::string descriptor;

  SubsetMask() = default;
  SubsetMask(GeometryPtr geo, std::string desc = {})
      : geometry(std::move(geo)), flags(geometry->num_nodes(), 0), descriptor(std::move(desc)) {}

  bool contains(std::size_t i) const { return flags[i] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1)); }
  bool empty() const { return std::none_of(flags.begin(), flags.end(), [](auto f) { return f != 0; }); }

  bool contains_cell(std::size_t c) const {
    const CellNodes cn = geometry->cell_nodes(c);
    for (int k = 0; k < cn.count; ++k)
      if (!flags[cn.index[k]]) return false;
    return true;
  }

  bool subset_of(const SubsetMask& other) const {
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags[i] && !other.flags[i]) return false;
    return true;
  }

  /// True when every flagged node is an interior node.
  bool inside_interior() const {
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags[i] && !geometry->is_interior(i)) return false;
    return true;
  }

  bool operator==(const SubsetMask& other) const { return flags == other.flags; }
};

inline SubsetMask mask_where(const GeometryPtr& geo, const std::function<bool(const Point&)>& pred,
                             std::string descriptor, bool interior_only = true) {
  SubsetMask m(geo, std::move(descriptor));
  for (std::size_t i = 0; i < geo->num_nodes(); ++i)
    m.flags[i] = (pred(geo->node(i)) && (!interior_only || geo->is_interior(i))) ? 1 : 0;
  return m;
}

inline SubsetMask interior_mask(const GeometryPtr& geo) {
  SubsetMask m(geo, "interior");
  m.flags = geo->interior_flags();
  return m;
}

/// Per-cell symmetric positive definite coefficient. In 1D and radial
/// geometries only a11 is used.
struct CellMatrix {
  double a11 = 1.0;
  double a12 = 0.0;
  double a22 = 1.0;
};

class CoefficientA {
 public:
  CoefficientA() = default;

  static CoefficientA identity(const GeometryPtr& geo) {
    return CoefficientA(geo, std::vector<CellMatrix>(geo->num_cells()));
  }

  static CoefficientA scalar(const CellField& a) {
    std::vector<CellMatrix> m(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) m[c] = {a[c], 0.0, a[c]};
    return CoefficientA(a.geometry, std::move(m));
  }

  CoefficientA(GeometryPtr geo, std::vector<CellMatrix> cells) : geometry_(std::move(geo)), cells_(std::move(cells)) {
    if (cells_.size() != geometry_->num_cells()) throw UsageError("CoefficientA: size mismatch");
    eig_min_.resize(cells_.size());
    eig_max_.resize(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const auto [lo, hi] = eigenvalues(cells_[c]);
      if (!(lo > 0.0) || !std::isfinite(hi))
        throw DomainError("CoefficientA: cell matrix is not positive definite (cell " + std::to_string(c) + ")");
      eig_min_[c] = lo;
      eig_max_[c] = hi;
      is_identity_ = is_identity_ && cells_[c].a11 == 1.0 && cells_[c].a12 == 0.0 &&
                     (!geometry_->is_2d() || cells_[c].a22 == 1.0);
    }
  }

  const GeometryPtr& geometry() const { return geometry_; }
  const CellMatrix& operator[](std::size_t c) const { return cells_[c]; }
  bool is_identity() const { return is_identity_; }

  /// Local uniform ellipticity theta with |xi|/theta <= |xi|_A <= theta |xi|.
  double theta(std::size_t c) const { return std::max(std::sqrt(eig_max_[c]), 1.0 / std::sqrt(eig_min_[c])); }
  double lambda_min(std::size_t c) const { return eig_min_[c]; }
  double lambda_max(std::size_t c) const { return eig_max_[c]; }

 private:
  std::pair<double, double> eigenvalues(const CellMatrix& m) const {
    if (!geometry_->is_2d()) return {m.a11, m.a11};
    const double mean = 0.5 * (m.a11 + m.a22);
    const double dev = std::hypot(0.5 * (m.a11 - m.a22), m.a12);
    return {mean - dev, mean + dev};
  }

  GeometryPtr geometry_;
  std::vector<CellMatrix> cells_;
  std::vector<double> eig_min_;
  std::vector<double> eig_max_;
  bool is_identity_ = true;
};

/// One instance of the functional Q_{p,A,V} together with its Hardy data.
struct Problem {
  double p = 2.0;
  GeometryPtr geometry;
  CoefficientA A;
  CellField V;
  CellField g;
  std::optional<ScalarField> u;

  /// Problem with A = I, V = 0, g = 0 on the given geometry.
  static Problem make(GeometryPtr geo, double p) {
    Problem pr;
    pr.p = p;
    pr.geometry = geo;
    pr.A = CoefficientA::identity(geo);
    pr.V = CellField(geo, 0.0);
    pr.g = CellField(geo, 0.0);
    return pr;
  }

  void validate() const {
    if (!(p > 1.0)) throw DomainError("problem: p must be > 1");
    if (A.geometry() != geometry || V.geometry != geometry || g.geometry != geometry)
      throw UsageError("problem: fields live on different geometries");
    if (u) {
      if (u->geometry != geometry) throw UsageError("problem: u lives on a different geometry");
      for (std::size_t i = 0; i < u->size(); ++i)
        if (geometry->is_interior(i) && !((*u)[i] > 0.0)) throw DomainError("problem: u must be positive on interior nodes");
    }
  }
};

inline void require_same_geometry(const GeometryPtr& a, const GeometryPtr& b, const char* what) {
  if (a != b) throw UsageError(std::string(what) + ": geometry mismatch");
}

}  // namespace hardylab
