#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mbhgcn {

// Dense row-major matrix of doubles. All heavy math in this project is
// explicit loops over rows, so this stays deliberately minimal.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const double* a, int d) {
  return std::sqrt(dot(a, a, d));
}

inline void axpy(double alpha, const double* x, double* y, int d) {
  for (int i = 0; i < d; ++i) y[i] += alpha * x[i];
}

}  // namespace mbhgcn
