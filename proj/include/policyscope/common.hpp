#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace policyscope {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: parse/schema/data/undefined-metric -> 2, anything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input bytes (bad JSON, bad CSV cell). Message carries
// line/field context where the reader can provide it.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input violating a shape/dimension contract.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Values that are in-shape but unusable (NaN/Inf, empty dataset).
class DataError : public Error {
 public:
  using Error::Error;
};

// A metric whose denominator set is empty on this input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Dense row-major matrix of doubles. Rows are exposed as spans so tree
// fitting and routing never copy feature vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_)
        throw SchemaError("Matrix::from_rows: ragged row " + std::to_string(r));
      for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace policyscope
