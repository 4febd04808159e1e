#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sfnn {

// Dense row-major matrix of doubles. Row i of a weight matrix holds the
// incoming weights of unit i; a batch of activations stores one example per
// row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;
  Matrix transposed() const;

  // Rows [first, first + count).
  Matrix slice_rows(std::size_t first, std::size_t count) const;
  // Rows in the order given by `index`.
  Matrix gather_rows(std::span<const std::size_t> index) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws ValidationError unless `m` is rows x cols.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what);

}  // namespace sfnn
