#pragma once

// Minimal dense matrix, enough for covariance algebra on small n.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace liftlab {

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      double xv = x(i, k);
      if (xv == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) z(i, j) += xv * y(k, j);
    }
  return z;
}

inline Matrix transpose(const Matrix& x) {
  Matrix z(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(j, i) = x(i, j);
  return z;
}

inline Matrix symmetrize(const Matrix& x) {
  if (x.rows != x.cols) throw std::invalid_argument("symmetrize: not square");
  Matrix z(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(i, j) = 0.5 * (x(i, j) + x(j, i));
  return z;
}

inline double trace(const Matrix& x) {
  if (x.rows != x.cols) throw std::invalid_argument("trace: not square");
  double t = 0.0;
  for (int i = 0; i < x.rows; ++i) t += x(i, i);
  return t;
}

inline std::vector<double> matvec(const Matrix& x, std::span<const double> v) {
  if (x.cols != static_cast<int>(v.size()))
    throw std::invalid_argument("matvec: shape mismatch");
  std::vector<double> out(x.rows, 0.0);
  for (int i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols; ++j) s += x(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

inline double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

// v^T M w for square M.
inline double quad_form(std::span<const double> v, const Matrix& m,
                        std::span<const double> w) {
  auto mw = matvec(m, w);
  return dot(v, mw);
}

}  // namespace liftlab
