#include "qg2rom/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qg2rom/errors.hpp"

namespace qg2rom {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t p = row_offsets[r]; p < row_offsets[r + 1]; ++p) {
      acc += values[p] * x[columns[p]];
    }
    y[r] = acc;
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) d[r] = coeff(r, r);
  return d;
}

double CsrMatrix::coeff(std::size_t r, std::size_t c) const {
  for (std::size_t p = row_offsets[r]; p < row_offsets[r + 1]; ++p) {
    if (columns[p] == c) return values[p];
  }
  return 0.0;
}

void CsrMatrix::scale(double s) {
  for (double& v : values) v *= s;
}

CsrBuilder::CsrBuilder(std::size_t n, std::size_t nnz_hint) {
  m_.n = n;
  m_.row_offsets.reserve(n + 1);
  m_.row_offsets.push_back(0);
  m_.columns.reserve(nnz_hint);
  m_.values.reserve(nnz_hint);
}

void CsrBuilder::add(std::size_t col, double value) {
  for (std::size_t p = row_start_; p < m_.columns.size(); ++p) {
    if (m_.columns[p] == col) {
      m_.values[p] += value;
      return;
    }
  }
  m_.columns.push_back(col);
  m_.values.push_back(value);
}

void CsrBuilder::finish_row() {
  m_.row_offsets.push_back(m_.columns.size());
  row_start_ = m_.columns.size();
}

CsrMatrix CsrBuilder::build() && {
  if (m_.row_offsets.size() != m_.n + 1) {
    throw UsageError("csr builder: " + std::to_string(m_.row_offsets.size() - 1) +
                     " rows finished, expected " + std::to_string(m_.n));
  }
  return std::move(m_);
}

void negate(SparseSystem& system) {
  system.matrix.scale(-1.0);
  for (double& v : system.rhs) v = -v;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void residual(const CsrMatrix& A, std::span<const double> b, std::span<const double> x,
              std::vector<double>& r) {
  A.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

struct Jacobi {
  std::vector<double> inv;
  explicit Jacobi(const CsrMatrix& A) : inv(A.diagonal()) {
    for (std::size_t i = 0; i < inv.size(); ++i) {
      if (inv[i] == 0.0 || !std::isfinite(inv[i])) {
        throw DomainError("solve_linear: zero or non-finite diagonal in row " + std::to_string(i));
      }
      inv[i] = 1.0 / inv[i];
    }
  }
  void apply(std::span<const double> r, std::span<double> z) const {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv[i] * r[i];
  }
};

// Preconditioned CG with fused vector updates. Returns iterations used; x and
// r are updated in place.
int cg(const CsrMatrix& A, const Jacobi& M, std::vector<double>& x, std::vector<double>& r,
       double target, int budget) {
  const std::size_t n = A.n;
  std::vector<double> p(n), Ap(n);
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = M.inv[i] * r[i];
    rz += r[i] * p[i];
  }
  double rr = dot(r, r);
  const double target2 = target * target;
  int it = 0;
  while (it < budget && rr > target2) {
    double pAp = 0.0;
    for (std::size_t row = 0; row < n; ++row) {
      double acc = 0.0;
      for (std::size_t q = A.row_offsets[row]; q < A.row_offsets[row + 1]; ++q) {
        acc += A.values[q] * p[A.columns[q]];
      }
      Ap[row] = acc;
      pAp += p[row] * acc;
    }
    if (pAp == 0.0 || !std::isfinite(pAp)) break;
    const double alpha = rz / pAp;
    double rz_new = 0.0;
    rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
      rz_new += r[i] * r[i] * M.inv[i];
      rr += r[i] * r[i];
    }
    ++it;
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = M.inv[i] * r[i] + beta * p[i];
  }
  return it;
}

// Right-preconditioned BiCGStab.
int bicgstab(const CsrMatrix& A, const Jacobi& M, std::vector<double>& x, std::vector<double>& r,
             double target, int budget) {
  const std::size_t n = A.n;
  std::vector<double> r_hat = r, p(n, 0.0), v(n, 0.0), y(n), s(n), z(n), t(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  int it = 0;
  while (it < budget) {
    if (norm(r) <= target) break;
    const double rho_new = dot(r_hat, r);
    if (rho_new == 0.0) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    M.apply(p, y);
    A.multiply(y, v);
    const double rv = dot(r_hat, v);
    if (rv == 0.0) break;
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    ++it;
    if (norm(s) <= target) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i];
      r = s;
      break;
    }
    M.apply(s, z);
    A.multiply(z, t);
    const double tt = dot(t, t);
    if (tt == 0.0) break;
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * y[i] + omega * z[i];
      r[i] = s[i] - omega * t[i];
    }
    if (omega == 0.0) break;
  }
  return it;
}

}  // namespace

SolveResult solve_linear(const SparseSystem& system, double tol, int max_iter,
                         std::span<const double> guess) {
  const CsrMatrix& A = system.matrix;
  const std::size_t n = A.n;
  if (!(tol > 0.0)) throw DomainError("solve_linear: tolerance must be positive");
  if (system.rhs.size() != n || A.row_offsets.size() != n + 1) {
    throw DomainError("solve_linear: system dimensions are inconsistent");
  }
  if (!guess.empty() && guess.size() != n) {
    throw DomainError("solve_linear: initial guess has wrong length");
  }

  SolveResult out;
  const double bnorm = norm(system.rhs);
  if (bnorm == 0.0) {
    out.x.assign(n, 0.0);
    return out;
  }
  const Jacobi M(A);
  out.x = guess.empty() ? std::vector<double>(n, 0.0)
                        : std::vector<double>(guess.begin(), guess.end());
  std::vector<double> r(n);
  const double target = tol * bnorm;

  // The recursive residual can drift from the true one; restart from the true
  // residual until it meets the target or the budget runs out.
  int used = 0;
  for (;;) {
    residual(A, system.rhs, out.x, r);
    const double rnorm = norm(r);
    out.relative_residual = rnorm / bnorm;
    if (!std::isfinite(rnorm)) {
      throw SolverError("solve_linear: non-finite residual", out.relative_residual);
    }
    if (rnorm <= target) break;
    if (used >= max_iter) {
      throw SolverError("solve_linear: no convergence after " + std::to_string(used) +
                            " iterations",
                        out.relative_residual);
    }
    const int budget = max_iter - used;
    const int it = system.symmetric ? cg(A, M, out.x, r, target, budget)
                                    : bicgstab(A, M, out.x, r, target, budget);
    // A breakdown without progress would loop forever.
    used += std::max(it, 1);
  }
  out.iterations = used;
  return out;
}

}  // namespace qg2rom
