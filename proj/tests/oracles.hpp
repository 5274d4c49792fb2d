#pragma once

// Dense reference implementations, independent of the sparse assembly.

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "qg2rom/fom.hpp"
#include "qg2rom/grid.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline int cell(const qg2rom::Grid& g, int i, int j) { return j * g.nx() + i; }

// Dirichlet five-point Laplacian: L f + b approximates Lap f when the
// boundary value g is imposed at boundary-face midpoints.
struct DenseLaplacian {
  MatrixXd L;
  VectorXd b;
};

inline DenseLaplacian dense_laplacian(const qg2rom::Grid& g,
                                      const std::function<double(double, double)>& bc) {
  const int n = static_cast<int>(g.size());
  DenseLaplacian out{MatrixXd::Zero(n, n), VectorXd::Zero(n)};
  const auto& s = g.spec();
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int k = cell(g, i, j);
      struct Nb {
        int di, dj;
        double h;
        double fx, fy;
      };
      const Nb nbs[4] = {{1, 0, g.hx(), s.x0 + (i + 1) * g.hx(), g.yc(j)},
                         {-1, 0, g.hx(), s.x0 + i * g.hx(), g.yc(j)},
                         {0, 1, g.hy(), g.xc(i), s.y_lo + (j + 1) * g.hy()},
                         {0, -1, g.hy(), g.xc(i), s.y_lo + j * g.hy()}};
      for (const auto& nb : nbs) {
        const int ii = i + nb.di, jj = j + nb.dj;
        if (ii >= 0 && ii < g.nx() && jj >= 0 && jj < g.ny()) {
          out.L(k, k) -= 1.0 / (nb.h * nb.h);
          out.L(k, cell(g, ii, jj)) += 1.0 / (nb.h * nb.h);
        } else {
          out.L(k, k) -= 2.0 / (nb.h * nb.h);
          out.b(k) += 2.0 * bc(nb.fx, nb.fy) / (nb.h * nb.h);
        }
      }
    }
  }
  return out;
}

inline double psi_corner(const qg2rom::Grid& g, const VectorXd& psi, int ci, int cj) {
  if (ci == 0 || cj == 0 || ci == g.nx() || cj == g.ny()) return 0.0;
  return 0.25 * (psi(cell(g, ci - 1, cj - 1)) + psi(cell(g, ci, cj - 1)) + psi(cell(g, ci - 1, cj)) +
                 psi(cell(g, ci, cj)));
}

// Central convection div(u q) with u = curl(0, 0, psi). Returns the matrix
// acting on interior q and the vector carrying boundary values q = y.
inline DenseLaplacian dense_convection(const qg2rom::Grid& g, const VectorXd& psi) {
  const int n = static_cast<int>(g.size());
  DenseLaplacian out{MatrixXd::Zero(n, n), VectorXd::Zero(n)};
  const double vol = g.hx() * g.hy();
  const auto& s = g.spec();
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int k = cell(g, i, j);
      // Outward volume flux through each face.
      const double east = psi_corner(g, psi, i + 1, j + 1) - psi_corner(g, psi, i + 1, j);
      const double west = -(psi_corner(g, psi, i, j + 1) - psi_corner(g, psi, i, j));
      const double north = -(psi_corner(g, psi, i + 1, j + 1) - psi_corner(g, psi, i, j + 1));
      const double south = psi_corner(g, psi, i + 1, j) - psi_corner(g, psi, i, j);
      struct Face {
        int di, dj;
        double flux, y_face;
      };
      const Face faces[4] = {{1, 0, east, g.yc(j)},
                             {-1, 0, west, g.yc(j)},
                             {0, 1, north, s.y_lo + (j + 1) * g.hy()},
                             {0, -1, south, s.y_lo + j * g.hy()}};
      for (const auto& f : faces) {
        const int ii = i + f.di, jj = j + f.dj;
        if (ii >= 0 && ii < g.nx() && jj >= 0 && jj < g.ny()) {
          out.L(k, k) += 0.5 * f.flux / vol;
          out.L(k, cell(g, ii, jj)) += 0.5 * f.flux / vol;
        } else {
          out.b(k) += f.flux * f.y_face / vol;
        }
      }
    }
  }
  return out;
}

inline VectorXd to_vec(const qg2rom::Field& f) {
  VectorXd v(static_cast<int>(f.size()));
  for (std::size_t k = 0; k < f.size(); ++k) v(static_cast<int>(k)) = f[k];
  return v;
}

// One BDF1 step written as a single block lower-triangular system in
// (q1, psi1, q2, psi2) and solved by dense LU.
inline VectorXd monolithic_step(const qg2rom::State& s, const qg2rom::PhysParams& p, double dt,
                                const qg2rom::Field& forcing) {
  const qg2rom::Grid& g = s.grid();
  const int n = static_cast<int>(g.size());
  const auto y_of = [](double, double y) { return y; };
  const DenseLaplacian lap_y = dense_laplacian(g, y_of);
  const MatrixXd L0 = dense_laplacian(g, [](double, double) { return 0.0; }).L;
  const MatrixXd I = MatrixXd::Identity(n, n);
  VectorXd yc(n);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) yc(cell(g, i, j)) = g.yc(j);

  const VectorXd q1 = to_vec(s.q1), q2 = to_vec(s.q2), psi1 = to_vec(s.psi1), psi2 = to_vec(s.psi2);
  const DenseLaplacian c1 = dense_convection(g, psi1);
  const DenseLaplacian c2 = dense_convection(g, psi2);
  const double k1 = p.Fr / (p.Re * p.delta);
  const double k2 = p.Fr / (p.Re * (1.0 - p.delta));
  const double s1 = p.Fr / p.delta;
  const double s2 = p.Fr / (1.0 - p.delta);

  MatrixXd A = MatrixXd::Zero(4 * n, 4 * n);
  VectorXd rhs(4 * n);
  A.block(0, 0, n, n) = I / dt + c1.L - lap_y.L / p.Re;
  rhs.segment(0, n) = to_vec(forcing) + q1 / dt - k1 * L0 * (psi2 - psi1) + lap_y.b / p.Re - c1.b;

  A.block(n, 0, n, n) = -I;
  A.block(n, n, n, n) = p.Ro * L0 - s1 * I;
  rhs.segment(n, n) = -yc - s1 * psi2;

  A.block(2 * n, n, n, n) = k2 * L0;
  A.block(2 * n, 2 * n, n, n) = I / dt + c2.L - lap_y.L / p.Re;
  rhs.segment(2 * n, n) = q2 / dt - p.sigma * L0 * psi2 + k2 * L0 * psi2 + lap_y.b / p.Re - c2.b;

  A.block(3 * n, n, n, n) = s2 * I;
  A.block(3 * n, 2 * n, n, n) = -I;
  A.block(3 * n, 3 * n, n, n) = p.Ro * L0 - s2 * I;
  rhs.segment(3 * n, n) = -yc;

  return A.fullPivLu().solve(rhs);
}

// Smooth pseudo-random state: q = y plus a few random Fourier modes, psi a
// random combination of modes vanishing on the boundary.
inline qg2rom::State random_smooth_state(const qg2rom::Grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pi = 3.14159265358979323846;
  const auto& s = g.spec();
  auto smooth = [&](double amp) {
    const double a = amp * u(rng), b = amp * u(rng), c = amp * u(rng);
    return [=](double x, double y) {
      const double xs = (x - s.x0) / (s.xf - s.x0);
      const double ys = (y - s.y_lo) / (s.y_hi - s.y_lo);
      return a * std::sin(pi * xs) * std::sin(pi * ys) + b * std::sin(2 * pi * xs) * std::sin(pi * ys) +
             c * std::sin(pi * xs) * std::sin(2 * pi * ys);
    };
  };
  auto f1 = smooth(0.5), f2 = smooth(0.5), p1 = smooth(2.0), p2 = smooth(2.0);
  using qg2rom::Field;
  qg2rom::State st{Field::from_function(g, [&](double x, double y) { return y + f1(x, y); }),
                   Field::from_function(g, [&](double x, double y) { return y + f2(x, y); }),
                   Field::from_function(g, p1), Field::from_function(g, p2), 0.0};
  return st;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const char* base = std::getenv("QG2ROM_TEST_TMP");
  std::filesystem::path root = base ? base : std::filesystem::temp_directory_path() / "qg2rom_tests";
  std::filesystem::path dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
