#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qg2rom {

// Dense column-major matrix. Columns are contiguous, which matches the
// snapshot layout (one field per column).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }

  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }
  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  // Appends a column; the first append on an empty 0x0 matrix fixes rows().
  void append_col(std::span<const double> values);
  // Columns [first, first + count).
  Matrix cols_range(std::size_t first, std::size_t count) const;
  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A^T B
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
// C = A B
Matrix multiply(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);

}  // namespace qg2rom
