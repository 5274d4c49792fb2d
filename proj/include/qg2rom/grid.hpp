#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qg2rom {

struct GridSpec {
  int nx = 1;
  int ny = 1;
  double x0 = 0.0;
  double xf = 1.0;
  double y_lo = -1.0;
  double y_hi = 1.0;

  bool operator==(const GridSpec&) const = default;
};

// Uniform cell-centred mesh over [x0,xf] x [y_lo,y_hi].
//
// Cells are numbered row-major with x fastest: k = j * nx + i. This ordering
// is part of the snapshot file format and must not change.
class Grid {
 public:
  // Throws ConfigError unless nx, ny >= 1 and both intervals are non-empty.
  explicit Grid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int nx() const { return spec_.nx; }
  int ny() const { return spec_.ny; }
  std::size_t size() const { return static_cast<std::size_t>(spec_.nx) * spec_.ny; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double h() const { return hx_ > hy_ ? hx_ : hy_; }
  double cell_volume() const { return hx_ * hy_; }
  double area() const { return (spec_.xf - spec_.x0) * (spec_.y_hi - spec_.y_lo); }

  double xc(int i) const { return spec_.x0 + (i + 0.5) * hx_; }
  double yc(int j) const { return spec_.y_lo + (j + 0.5) * hy_; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * spec_.nx + static_cast<std::size_t>(i);
  }

  // Face numbering. x-faces: (nx+1) per row, face i is the west face of cell i.
  // y-faces: nx per row, ny+1 rows, face row j is the south face of cell row j.
  std::size_t n_xfaces() const { return static_cast<std::size_t>(spec_.nx + 1) * spec_.ny; }
  std::size_t n_yfaces() const { return static_cast<std::size_t>(spec_.nx) * (spec_.ny + 1); }
  std::size_t xface(int i, int j) const {
    return static_cast<std::size_t>(j) * (spec_.nx + 1) + static_cast<std::size_t>(i);
  }
  std::size_t yface(int i, int j) const {
    return static_cast<std::size_t>(j) * spec_.nx + static_cast<std::size_t>(i);
  }

  bool operator==(const Grid& o) const { return spec_ == o.spec_; }

 private:
  GridSpec spec_;
  double hx_;
  double hy_;
};

// Cell averages of one scalar on a grid.
class Field {
 public:
  explicit Field(const Grid& grid, double value = 0.0);
  Field(const Grid& grid, std::vector<double> values);

  static Field from_function(const Grid& grid, const std::function<double(double, double)>& f);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double at(int i, int j) const { return values_[grid_.index(i, j)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double> take() && { return std::move(values_); }

  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

// Midpoint rule: sum_k f_k * hx * hy.
double integrate(const Field& f);

// Boundary data for face-gradient evaluation. Dirichlet values live on
// boundary-face midpoints.
struct BoundaryRule {
  enum class Kind { homogeneous_dirichlet, dirichlet };

  Kind kind = Kind::homogeneous_dirichlet;
  std::function<double(double, double)> value;

  static BoundaryRule homogeneous() { return {}; }
  static BoundaryRule dirichlet(std::function<double(double, double)> g) {
    return {Kind::dirichlet, std::move(g)};
  }

  // Boundary value at (x, y). Throws ConfigError for an unusable rule.
  double at(double x, double y) const;
};

// Per-face scalars in coordinate-direction sign convention: x-face values are
// oriented along +x, y-face values along +y. The east face of cell (i,j) and
// the west face of cell (i+1,j) are the same stored entry.
struct FaceValues {
  Grid grid;
  std::vector<double> x;  // n_xfaces()
  std::vector<double> y;  // n_yfaces()

  explicit FaceValues(const Grid& g)
      : grid(g), x(g.n_xfaces(), 0.0), y(g.n_yfaces(), 0.0) {}

  double west(int i, int j) const { return x[grid.xface(i, j)]; }
  double east(int i, int j) const { return x[grid.xface(i + 1, j)]; }
  double south(int i, int j) const { return y[grid.yface(i, j)]; }
  double north(int i, int j) const { return y[grid.yface(i, j + 1)]; }
};

using FaceGradients = FaceValues;
using FaceFluxes = FaceValues;

// Normal derivative on every face. Interior faces use the two-cell central
// difference; boundary faces use (g_face - f_cell) / (h/2).
FaceGradients face_gradients(const Field& f, const BoundaryRule& bc);

// Finite-volume Laplacian: the net outward gradient flux divided by the
// cell volume.
Field laplacian(const Field& f, const BoundaryRule& bc);

}  // namespace qg2rom
