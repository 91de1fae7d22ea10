#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sla {

/// Dense row-major binary64 matrix. All training math runs in binary64.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  bool empty() const { return data.empty(); }
};

/// Dense row-major binary32 matrix; the on-disk feature representation.
struct FloatMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FloatMatrix() = default;
  FloatMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

/// Upcasts binary32 features to binary64 for model math.
inline Matrix widen(const FloatMatrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    out.data[i] = static_cast<double>(m.data[i]);
  }
  return out;
}

}  // namespace sla
