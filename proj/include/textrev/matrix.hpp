#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "textrev/rng.hpp"

namespace textrev {

// Dense row-major float matrix. The only numeric container in the project.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

  float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0f); }

  void add_scaled(const Matrix& o, float s) {
    assert(same_shape(o));
    for (size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
  }

  double frobenius_sq() const {
    double acc = 0.0;
    for (float v : data) acc += static_cast<double>(v) * v;
    return acc;
  }
  double frobenius() const { return std::sqrt(frobenius_sq()); }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static Matrix randn(int r, int c, float stddev, Rng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = static_cast<float>(rng.normal(0.0, stddev));
    return m;
  }
};

// C = alpha * op(A) * op(B) + beta * C, row-major. Loop orders are chosen so the
// innermost loop always runs over contiguous memory and auto-vectorizes.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta, float* c,
          int ldc);

}  // namespace textrev
