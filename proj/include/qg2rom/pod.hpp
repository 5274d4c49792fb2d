#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qg2rom/grid.hpp"
#include "qg2rom/matrix.hpp"
#include "qg2rom/snapshots.hpp"

namespace qg2rom {

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Values are sorted descending; column i of `vectors` belongs to values[i].
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
  int sweeps = 0;
};
// Iterates until the off-diagonal Frobenius norm is <= tol * ||A||_F.
// Throws DomainError for a non-square input.
SymmetricEigen jacobi_eigen(Matrix a, double tol = 1e-14, int max_sweeps = 100);

struct Svd {
  Matrix u;                             // N_h x rank, orthonormal columns
  std::vector<double> singular_values;  // all N_s values, descending
  Matrix v;                             // N_s x rank
  std::size_t rank = 0;
};

// Thin SVD by the method of snapshots (eigen-decomposition of S^T S).
// Singular values at or below 1e-12 * sigma_1 get no mode. Each mode's sign is
// chosen so that its largest-magnitude entry is positive.
Svd compute_pod(const Matrix& s);

// Smallest N_r with sum_{i<=N_r} sigma_i^p / sum_i sigma_i^p >= threshold.
// p = 1 by default. Throws DomainError for threshold outside (0, 1] or an
// all-zero spectrum.
std::size_t select_modes(std::span<const double> singular_values, double threshold,
                         double exponent = 1.0);
double energy_fraction(std::span<const double> singular_values, std::size_t retained,
                       double exponent = 1.0);

struct PodRequest {
  // Exactly one of the two is used; `rank` wins when set.
  std::optional<std::size_t> rank;
  double threshold = 0.9999;
  double exponent = 1.0;
};

struct PodBasis {
  FieldId field = FieldId::q1;
  GridSpec grid;
  Matrix modes;  // N_h x N_r
  std::vector<double> singular_values;
  std::size_t retained = 0;
  double energy_fraction = 0.0;
  double exponent = 1.0;
  // One mean per parameter block of the snapshot set the basis came from.
  std::vector<TimeAverage> means;
};

// Centres every parameter block on its own mean, computes the POD of the
// concatenated fluctuations and truncates per `request`. Throws DomainError
// when a requested rank exceeds N_s or the numerical rank.
PodBasis build_basis(const SnapshotSet& set, const PodRequest& request);

struct CoefficientSeries {
  FieldId field = FieldId::q1;
  std::vector<double> times;
  std::vector<std::vector<double>> params;
  Matrix coeffs;  // N_r x N_s, columns ordered like the snapshot matrix

  std::size_t n_t() const { return times.size(); }
  std::size_t n_d() const { return params.empty() ? 1 : params.size(); }
  std::size_t n_r() const { return coeffs.rows(); }
};

// C = U_r^T S. Throws DomainError when the row counts differ.
Matrix project(const Matrix& modes, const Matrix& fluct);
CoefficientSeries modal_coefficients(const PodBasis& basis, const SnapshotSet& set);

// mean + sum_i coeffs[i] * modes.col(i). Throws DomainError on a length or
// grid mismatch.
Field reconstruct(const Field& mean, const Matrix& modes, std::span<const double> coeffs);

// Solves -Lap_h xi_i = phi_i with xi = 0 on the boundary for every column.
// Throws SolverError naming the mode index on failure.
Matrix poisson_modes(const Matrix& vorticity_modes, const Grid& grid, double tol = 1e-11);

// Modes go in the snapshot container with mode numbers 1..N_r as "times" and
// the spectrum in its sidecar. Means go in a second container with one
// column per parameter block.
void save_basis(const PodBasis& basis, const std::filesystem::path& modes_path,
                const std::filesystem::path& means_path);
PodBasis load_basis(const std::filesystem::path& modes_path,
                    const std::filesystem::path& means_path);

// t, mu..., alpha_1..alpha_N per column.
void write_coefficients_csv(const CoefficientSeries& c, const std::filesystem::path& path);
CoefficientSeries read_coefficients_csv(const std::filesystem::path& path, FieldId field);

}  // namespace qg2rom
