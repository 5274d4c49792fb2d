#include "qg2rom/grid.hpp"

#include <cmath>
#include <string>

#include "qg2rom/errors.hpp"

namespace qg2rom {

Grid::Grid(const GridSpec& spec) : spec_(spec) {
  if (spec.nx < 1 || spec.ny < 1) {
    throw ConfigError("grid: nx and ny must be positive, got " + std::to_string(spec.nx) +
                      "x" + std::to_string(spec.ny));
  }
  if (!(spec.xf > spec.x0) || !(spec.y_hi > spec.y_lo)) {
    throw ConfigError("grid: domain bounds are empty or inverted");
  }
  hx_ = (spec.xf - spec.x0) / spec.nx;
  hy_ = (spec.y_hi - spec.y_lo) / spec.ny;
  if (!(hx_ > 0.0) || !(hy_ > 0.0) || !std::isfinite(hx_) || !std::isfinite(hy_)) {
    throw ConfigError("grid: non-positive cell size");
  }
}

Field::Field(const Grid& grid, double value) : grid_(grid), values_(grid.size(), value) {}

Field::Field(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw DomainError("field: " + std::to_string(values_.size()) + " values for a grid of " +
                      std::to_string(grid_.size()) + " cells");
  }
}

Field Field::from_function(const Grid& grid, const std::function<double(double, double)>& f) {
  Field out(grid);
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      out[grid.index(i, j)] = f(grid.xc(i), grid.yc(j));
    }
  }
  return out;
}

bool Field::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double integrate(const Field& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.grid().cell_volume();
}

double BoundaryRule::at(double x, double y) const {
  switch (kind) {
    case Kind::homogeneous_dirichlet:
      return 0.0;
    case Kind::dirichlet:
      if (!value) throw ConfigError("boundary rule: Dirichlet rule without a value function");
      return value(x, y);
  }
  throw ConfigError("boundary rule: unknown kind");
}

FaceGradients face_gradients(const Field& f, const BoundaryRule& bc) {
  const Grid& g = f.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  const double hx = g.hx();
  const double hy = g.hy();
  const auto& s = g.spec();
  FaceGradients out(g);

  for (int j = 0; j < ny; ++j) {
    const double y = g.yc(j);
    out.x[g.xface(0, j)] = (f.at(0, j) - bc.at(s.x0, y)) / (0.5 * hx);
    for (int i = 1; i < nx; ++i) {
      out.x[g.xface(i, j)] = (f.at(i, j) - f.at(i - 1, j)) / hx;
    }
    out.x[g.xface(nx, j)] = (bc.at(s.xf, y) - f.at(nx - 1, j)) / (0.5 * hx);
  }
  for (int i = 0; i < nx; ++i) {
    const double x = g.xc(i);
    out.y[g.yface(i, 0)] = (f.at(i, 0) - bc.at(x, s.y_lo)) / (0.5 * hy);
    for (int j = 1; j < ny; ++j) {
      out.y[g.yface(i, j)] = (f.at(i, j) - f.at(i, j - 1)) / hy;
    }
    out.y[g.yface(i, ny)] = (bc.at(x, s.y_hi) - f.at(i, ny - 1)) / (0.5 * hy);
  }
  return out;
}

Field laplacian(const Field& f, const BoundaryRule& bc) {
  const Grid& g = f.grid();
  const FaceGradients grad = face_gradients(f, bc);
  Field out(g);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      out[g.index(i, j)] = (grad.east(i, j) - grad.west(i, j)) / g.hx() +
                           (grad.north(i, j) - grad.south(i, j)) / g.hy();
    }
  }
  return out;
}

}  // namespace qg2rom
