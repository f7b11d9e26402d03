#pragma once

#include <cstddef>
#include <vector>

namespace mpap {

// Dense row-major feature matrix.
struct Matrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : data(r * c, 0.0), rows(r), cols(c) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  Matrix select_rows(const std::vector<std::size_t>& idx) const {
    Matrix m(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) m.at(i, c) = at(idx[i], c);
    }
    return m;
  }

  Matrix select_cols(const std::vector<std::size_t>& idx) const {
    Matrix m(rows, idx.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < idx.size(); ++i) m.at(r, i) = at(r, idx[i]);
    }
    return m;
  }
};

}  // namespace mpap
