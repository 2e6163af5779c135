#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "hardylab/error.hpp"

namespace hardylab {

enum class GeometryKind { interval, radial, box2d };

inline std::string to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::interval: return "interval";
    case GeometryKind::radial: return "radial";
    case GeometryKind::box2d: return "box2d";
  }
  return "unknown";
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Surface area of the unit sphere in R^N, 2 pi^{N/2} / Gamma(N/2).
inline double unit_sphere_area(int dim) {
  if (dim < 1) throw DomainError("unit_sphere_area: dimension must be >= 1");
  const double half = 0.5 * dim;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

/// Descriptor from which a Geometry is built.
///
/// For `radial`, [lo, hi] is the radial range and `dim` the ambient
/// dimension N used in the volume weight. For `box2d`, [lo, hi] x [lo_y, hi_y].
struct GeometrySpec {
  GeometryKind kind = GeometryKind::interval;
  int dim = 1;
  double lo = 0.0;
  double hi = 1.0;
  double lo_y = 0.0;
  double hi_y = 1.0;
  int resolution = 2;
  int resolution_y = 0;  // 0 means "same as resolution"
  bool exclude_origin = false;
};

/// Node indices of one cell: 2 for 1D kinds, 4 for box2d ordered
/// (x0,y0), (x1,y0), (x0,y1), (x1,y1).
struct CellNodes {
  std::array<std::size_t, 4> index{};
  int count = 0;
};

class Geometry;
using GeometryPtr = std::shared_ptr<const Geometry>;

/// Tensor-grid discretization of an interval, a radially symmetric ball or
/// annulus in R^N, or a 2D box. Immutable after construction.
class Geometry {
 public:
  static GeometryPtr build(const GeometrySpec& spec) {
    return std::shared_ptr<const Geometry>(new Geometry(spec));
  }

  const GeometrySpec& spec() const { return spec_; }
  GeometryKind kind() const { return spec_.kind; }

  /// Ambient dimension N.
  int dim() const {
    switch (spec_.kind) {
      case GeometryKind::interval: return 1;
      case GeometryKind::radial: return spec_.dim;
      case GeometryKind::box2d: return 2;
    }
    return 1;
  }

  bool is_2d() const { return spec_.kind == GeometryKind::box2d; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_cells() const { return measures_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(std::size_t i) const { return nodes_[i]; }
  double cell_measure(std::size_t c) const { return measures_[c]; }
  const std::vector<double>& cell_measures() const { return measures_; }
  bool is_interior(std::size_t i) const { return interior_[i] != 0; }
  const std::vector<std::uint8_t>& interior_flags() const { return interior_; }

  /// Largest cell diameter.
  double spacing() const { return is_2d() ? std::hypot(hx_, hy_) : hx_; }

  double total_measure() const {
    double sum = 0.0;
    for (double m : measures_) sum += m;
    return sum;
  }

  /// Continuum volume of the domain.
  double exact_measure() const {
    switch (spec_.kind) {
      case GeometryKind::interval: return spec_.hi - spec_.lo;
      case GeometryKind::radial: {
        const int n = spec_.dim;
        return unit_sphere_area(n) / n * (std::pow(spec_.hi, n) - std::pow(spec_.lo, n));
      }
      case GeometryKind::box2d: return (spec_.hi - spec_.lo) * (spec_.hi_y - spec_.lo_y);
    }
    return 0.0;
  }

  CellNodes cell_nodes(std::size_t c) const {
    CellNodes out;
    if (!is_2d()) {
      out.index = {c, c + 1, 0, 0};
      out.count = 2;
      return out;
    }
    const std::size_t i = c / static_cast<std::size_t>(ny_);
    const std::size_t j = c % static_cast<std::size_t>(ny_);
    const std::size_t stride = static_cast<std::size_t>(ny_) + 1;
    const std::size_t n00 = i * stride + j;
    const std::size_t n10 = (i + 1) * stride + j;
    out.index = {n00, n10, n00 + 1, n10 + 1};
    out.count = 4;
    return out;
  }

  Point cell_midpoint(std::size_t c) const {
    const CellNodes cn = cell_nodes(c);
    if (cn.count == 2) return {0.5 * (nodes_[cn.index[0]].x + nodes_[cn.index[1]].x), 0.0};
    return {0.5 * (nodes_[cn.index[0]].x + nodes_[cn.index[1]].x),
            0.5 * (nodes_[cn.index[0]].y + nodes_[cn.index[2]].y)};
  }

  /// Euclidean distance; for radial geometries points are radii.
  double distance(const Point& a, const Point& b) const {
    if (is_2d()) return std::hypot(a.x - b.x, a.y - b.y);
    return std::abs(a.x - b.x);
  }

  /// |x| of a point in the ambient space.
  double norm(const Point& a) const { return is_2d() ? std::hypot(a.x, a.y) : std::abs(a.x); }

 private:
  explicit Geometry(const GeometrySpec& spec) : spec_(spec) {
    validate();
    nx_ = spec.resolution;
    ny_ = is_2d() ? (spec.resolution_y > 0 ? spec.resolution_y : spec.resolution) : 0;
    hx_ = (spec.hi - spec.lo) / nx_;
    hy_ = is_2d() ? (spec.hi_y - spec.lo_y) / ny_ : 0.0;

    if (!is_2d()) {
      nodes_.resize(static_cast<std::size_t>(nx_) + 1);
      interior_.assign(nodes_.size(), 1);
      for (int i = 0; i <= nx_; ++i) nodes_[i] = {i == nx_ ? spec.hi : spec.lo + i * hx_, 0.0};
      interior_.back() = 0;
      const bool inner_boundary = spec.kind == GeometryKind::interval || spec.lo > 0.0 ||
                                  spec.exclude_origin;
      if (inner_boundary) interior_.front() = 0;
      measures_.resize(static_cast<std::size_t>(nx_));
      const double area = spec.kind == GeometryKind::radial ? unit_sphere_area(spec.dim) : 1.0;
      for (int c = 0; c < nx_; ++c) {
        const double dr = nodes_[c + 1].x - nodes_[c].x;
        if (spec.kind == GeometryKind::radial) {
          const double mid = 0.5 * (nodes_[c].x + nodes_[c + 1].x);
          measures_[c] = area * std::pow(mid, spec.dim - 1) * dr;
        } else {
          measures_[c] = dr;
        }
      }
      return;
    }

    const std::size_t stride = static_cast<std::size_t>(ny_) + 1;
    nodes_.resize((static_cast<std::size_t>(nx_) + 1) * stride);
    interior_.assign(nodes_.size(), 0);
    for (int i = 0; i <= nx_; ++i) {
      const double x = i == nx_ ? spec.hi : spec.lo + i * hx_;
      for (int j = 0; j <= ny_; ++j) {
        const double y = j == ny_ ? spec.hi_y : spec.lo_y + j * hy_;
        const std::size_t k = static_cast<std::size_t>(i) * stride + j;
        nodes_[k] = {x, y};
        interior_[k] = (i > 0 && i < nx_ && j > 0 && j < ny_) ? 1 : 0;
      }
    }
    measures_.assign(static_cast<std::size_t>(nx_) * ny_, hx_ * hy_);
  }

  void validate() const {
    if (spec_.resolution < 2) throw ConfigError("geometry: resolution must be >= 2");
    if (!(spec_.hi > spec_.lo) || !std::isfinite(spec_.lo) || !std::isfinite(spec_.hi))
      throw ConfigError("geometry: degenerate bounds");
    if (spec_.kind == GeometryKind::radial) {
      if (spec_.lo < 0.0) throw ConfigError("geometry: radial inner radius must be >= 0");
      if (spec_.dim < 1 || spec_.dim > 4) throw ConfigError("geometry: radial dim must be in 1..4");
    }
    if (spec_.kind == GeometryKind::box2d) {
      if (!(spec_.hi_y > spec_.lo_y)) throw ConfigError("geometry: degenerate y bounds");
      if (spec_.resolution_y != 0 && spec_.resolution_y < 2)
        throw ConfigError("geometry: resolution_y must be >= 2");
    }
  }

  GeometrySpec spec_;
  int nx_ = 0;
  int ny_ = 0;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<Point> nodes_;
  std::vector<double> measures_;
  std::vector<std::uint8_t> interior_;
};

inline GeometryPtr build_geometry(const GeometrySpec& spec) { return Geometry::build(spec); }

}  // namespace hardylab
