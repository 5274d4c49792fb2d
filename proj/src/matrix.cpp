#include "qg2rom/matrix.hpp"

#include <cmath>
#include <string>

#include "qg2rom/errors.hpp"

namespace qg2rom {

void Matrix::append_col(std::span<const double> values) {
  if (cols_ == 0 && rows_ == 0) rows_ = values.size();
  if (values.size() != rows_) {
    throw DomainError("matrix: appending a column of length " + std::to_string(values.size()) +
                      " to a matrix with " + std::to_string(rows_) + " rows");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++cols_;
}

Matrix Matrix::cols_range(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw DomainError("matrix: column range out of bounds");
  Matrix out(rows_, count);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(first * rows_),
            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * rows_),
            out.data_.begin());
  return out;
}

Matrix Matrix::transpose() const {
  Matrix out(cols_, rows_);
  for (std::size_t c = 0; c < cols_; ++c) {
    for (std::size_t r = 0; r < rows_; ++r) out(c, r) = (*this)(r, c);
  }
  return out;
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DomainError("multiply_at_b: row counts differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    const auto bj = b.col(j);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const auto ai = a.col(i);
      double s = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) s += ai[k] * bj[k];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DomainError("multiply: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto oj = out.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      const auto ak = a.col(k);
      for (std::size_t r = 0; r < ak.size(); ++r) oj[r] += ak[r] * bkj;
    }
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace qg2rom
