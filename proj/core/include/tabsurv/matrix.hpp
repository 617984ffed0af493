#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabsurv {

/// Thrown on malformed input files (CSV, JSON, bundles).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when data violates a documented contract.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. All numerics in the library run in
/// double precision.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix row_vector(const std::vector<double>& v) {
    Matrix m(1, v.size());
    m.data_ = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix transpose() const;

  /// Selects the given rows into a new matrix.
  Matrix take_rows(const std::vector<std::size_t>& idx) const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// y = a * b. Throws ValidationError on incompatible shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

/// y += a^T * b (used for weight gradients without materializing a^T).
void add_at_b(const Matrix& a, const Matrix& b, Matrix& out);

/// y = a * b^T.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);

}  // namespace tabsurv
