#pragma once

// Fourier diagnostics for the circle Laplacian: eigenvalues
// lambda_k = 2(1 - cos(2 pi k / n)), a real orthonormal eigenbasis, the
// collapse spectral gap, and the stationary covariance on S.

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "liftlab/lattice.hpp"
#include "liftlab/matrix.hpp"

namespace liftlab {

struct SpectralTable {
  CircleLattice lattice;
  Vec eigenvalues;         // lambda_k, k = 0..n-1; lambda_0 = 0
  std::vector<Vec> modes;  // modes[k][i], orthonormal, modes[0] constant

  double mode_dot(int k, std::span<const double> v) const {
    if (static_cast<int>(v.size()) != lattice.n)
      throw std::invalid_argument("mode_dot: length does not match lattice");
    double s = 0.0;
    const Vec& m = modes[k];
    for (int i = 0; i < lattice.n; ++i) s += m[i] * v[i];
    return s;
  }
};

// Real eigenbasis layout: mode 0 is the constant vector; for 0 < k < n/2
// mode k is the cosine wave and mode n-k the matching sine wave; for even
// n the alternating vector sits at k = n/2. Modes k and n-k share the
// eigenvalue lambda_k.
inline SpectralTable build_spectral_table(CircleLattice lattice) {
  int n = lattice.n;
  SpectralTable table{lattice, Vec(n), std::vector<Vec>(n, Vec(n))};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < n; ++k)
    table.eigenvalues[k] = 2.0 * (1.0 - std::cos(two_pi * k / n));
  double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  double amp = std::sqrt(2.0 / n);
  for (int i = 0; i < n; ++i) table.modes[0][i] = inv_sqrt_n;
  for (int k = 1; 2 * k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      double phase = two_pi * k * i / n;
      table.modes[k][i] = amp * std::cos(phase);
      table.modes[n - k][i] = amp * std::sin(phase);
    }
  }
  if (n % 2 == 0) {
    for (int i = 0; i < n; ++i)
      table.modes[n / 2][i] = (i % 2 == 0 ? inv_sqrt_n : -inv_sqrt_n);
  }
  return table;
}

// Spectral gap of the slowed collapsed dynamics (1/2n) Delta on S:
// lambda_1 / (2n) = (1 - cos(2 pi / n)) / n.
inline double collapse_gap(const CircleLattice& lattice) {
  return (1.0 - std::cos(2.0 * std::numbers::pi / lattice.n)) / lattice.n;
}

// Covariance of the stationary Gaussian on S: pseudo-inverse of -Delta,
// C = sum_{k>=1} lambda_k^{-1} m_k m_k^T.
inline Matrix stationary_covariance(const SpectralTable& table) {
  int n = table.lattice.n;
  Matrix c(n, n);
  for (int k = 1; k < n; ++k) {
    double w = 1.0 / table.eigenvalues[k];
    const Vec& m = table.modes[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) += w * m[i] * m[j];
  }
  return c;
}

// -Delta as a dense matrix, for quadratic-form work.
inline Matrix neg_laplacian_matrix(const CircleLattice& lattice) {
  int n = lattice.n;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = 2.0;
    m(i, lattice.next(i)) -= 1.0;
    m(i, lattice.prev(i)) -= 1.0;
  }
  return m;
}

// Projector onto S as a dense matrix: I - (1/n) 1 1^T.
inline Matrix mean_zero_projector(const CircleLattice& lattice) {
  int n = lattice.n;
  Matrix p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / n;
  return p;
}

}  // namespace liftlab
