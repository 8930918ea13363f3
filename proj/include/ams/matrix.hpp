#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ams/errors.hpp"

namespace ams {

// Dense row-major matrix of doubles. All sequence data in this library
// (feature sequences, class activation sequences, pseudo-label masks)
// is a T-row matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r].size() == m.cols_, "Matrix::from_rows: ragged rows");
      for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                          const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ValidationError(what + ": expected " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
}

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.all_finite()) throw ValidationError(what + ": non-finite entries");
}

}  // namespace ams
