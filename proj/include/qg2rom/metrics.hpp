#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qg2rom/grid.hpp"

namespace qg2rom {

// sqrt(sum |a - b|^2 / (Nx Ny)), unweighted. Throws DomainError on a grid
// mismatch.
double rmse(const Field& a, const Field& b);

// ||a - b|| / ||a|| in the area-weighted discrete L2 norm. Throws DomainError
// when ||a|| = 0 or the grids differ.
double rel_l2(const Field& reference, const Field& approx);

// 1/2 integral of q^2.
double enstrophy(const Field& q);

// 1/2 integral of |grad psi|^2. The gradients are the face-normal
// differences of face_gradients; each face carries the area of the
// half-cells it joins, so boundary faces weigh half an interior face.
double kinetic_energy(const Field& psi, const BoundaryRule& bc = BoundaryRule::homogeneous());

// ||a - b||_2 / ||a||_2 over samples. Throws DomainError on a length mismatch
// or a zero reference.
double series_rel_l2(std::span<const double> reference, std::span<const double> approx);

struct Pmf {
  std::vector<double> edges;   // n_bins + 1
  std::vector<double> masses;  // n_bins, summing to 1
};

// Uniform bins over [min, max]; the last bin is closed. A constant input
// gives one bin of mass 1. Throws DomainError for empty input or n_bins < 1.
Pmf pmf(std::span<const double> values, int n_bins = 30);

struct FieldErrorReport {
  std::string field;
  double rmse = 0.0;
  double rel_l2 = 0.0;
};

FieldErrorReport field_errors(const std::string& name, const Field& reference, const Field& approx);

// |a - b| per cell.
Field absolute_difference(const Field& a, const Field& b);

// Headers: field,rmse,rel_l2 / t,<names...> / bin_lo,bin_hi,mass
void write_error_report_csv(const std::vector<FieldErrorReport>& rows,
                            const std::filesystem::path& path);
void write_series_csv(std::span<const double> times, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& columns,
                      const std::filesystem::path& path);
void write_pmf_csv(const Pmf& p, const std::filesystem::path& path);

}  // namespace qg2rom
