#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qg2rom {

// Square matrix in compressed-row form.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets;  // n + 1 entries
  std::vector<std::size_t> columns;
  std::vector<double> values;

  // y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  // Entry (r, c), zero when not stored. Linear in the row length.
  double coeff(std::size_t r, std::size_t c) const;
  void scale(double s);
};

// Row-by-row builder; rows must be appended in order.
class CsrBuilder {
 public:
  explicit CsrBuilder(std::size_t n, std::size_t nnz_hint = 0);

  // Adds value to (current row, col); repeated columns in one row are merged.
  void add(std::size_t col, double value);
  void finish_row();
  CsrMatrix build() &&;

 private:
  CsrMatrix m_;
  std::size_t row_start_ = 0;
};

struct SparseSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  // Chooses the Krylov method: CG when true, BiCGStab otherwise.
  bool symmetric = false;
};

// Flip the sign of matrix and right-hand side.
void negate(SparseSystem& system);

struct SolveResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Jacobi-preconditioned CG (symmetric) or BiCGStab (general) to
// ||Ax - b|| <= tol ||b||. Starts from `guess` when it is non-empty.
// Throws SolverError when max_iter is exhausted, DomainError on bad input.
SolveResult solve_linear(const SparseSystem& system, double tol, int max_iter,
                         std::span<const double> guess = {});

}  // namespace qg2rom
