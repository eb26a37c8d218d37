#pragma once

// Closed-form Gaussian moments for the stationary profile law, including
// half-moments E[... (Z)_+] that arise from the one-sided jump rates, plus
// the polynomial test-function family used by the verification routines.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liftlab/lattice.hpp"
#include "liftlab/matrix.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/spectral.hpp"

namespace liftlab {

// Moment calculator over the mean-zero Gaussian field with covariance C.
// All linear forms are expected to have mean-zero coefficient vectors and
// quadratic forms symmetric matrices; results are exact up to rounding.
struct GaussianMoments {
  std::shared_ptr<const SpectralTable> table;
  Matrix C;

  explicit GaussianMoments(std::shared_ptr<const SpectralTable> t)
      : table(std::move(t)), C(stationary_covariance(*table)) {}

  int n() const { return table->lattice.n; }

  // Cov(v.l, w.l)
  double cov_lin(std::span<const double> v, std::span<const double> w) const {
    return quad_form(v, C, w);
  }

  // E[l^T B l] for symmetric B
  double mean_quad(const Matrix& B) const { return trace(matmul(B, C)); }

  // Cov(l^T A l, l^T B l) = 2 tr(A C B C) for symmetric A, B
  double cov_quad(const Matrix& A, const Matrix& B) const {
    Matrix ac = matmul(A, C);
    Matrix bc = matmul(B, C);
    return 2.0 * trace(matmul(ac, bc));
  }

  // E[(Z)_+] for Z ~ N(0, sigma^2)
  static double mean_pos_part(double sigma) {
    return sigma / std::sqrt(2.0 * std::numbers::pi);
  }

  // E[X (Z)_+] for centered jointly Gaussian (X, Z)
  static double lin_pos_part(double cov_xz) { return 0.5 * cov_xz; }

  // E[X Y (Z)_+] for centered jointly Gaussian (X, Y, Z)
  static double linlin_pos_part(double cov_xy, double cov_xz, double cov_yz,
                                double sigma_z) {
    double root = std::sqrt(2.0 * std::numbers::pi);
    return cov_xy * sigma_z / root + cov_xz * cov_yz / (root * sigma_z);
  }

  // E[(l^T B l) (Z)_+] for symmetric B and Z = d.l
  double quad_pos_part(const Matrix& B, std::span<const double> d) const {
    Vec m = matvec(C, d);
    double sigma = std::sqrt(dot(d, matvec(C, d)));
    double root = std::sqrt(2.0 * std::numbers::pi);
    return mean_quad(B) * sigma / root + dot(m, matvec(B, m)) / (sigma * root);
  }
};

// Difference vector whose pairing with the profile is the positive-part
// argument of the right jump rate at site x: Z = l_x - l_{x+1}.
inline Vec right_gap_vector(const CircleLattice& lattice, int x) {
  Vec d(static_cast<std::size_t>(lattice.n), 0.0);
  d[static_cast<std::size_t>(x)] += 1.0;
  d[static_cast<std::size_t>(lattice.next(x))] -= 1.0;
  return d;
}

// Z = l_x - l_{x-1}, the left jump rate argument.
inline Vec left_gap_vector(const CircleLattice& lattice, int x) {
  Vec d(static_cast<std::size_t>(lattice.n), 0.0);
  d[static_cast<std::size_t>(x)] += 1.0;
  d[static_cast<std::size_t>(lattice.prev(x))] -= 1.0;
  return d;
}

// Polynomial test function f(l, x) = phi(l) * psi(x) with phi constant,
// linear v.l, or centered quadratic l^T A l - tr(A C). Empty psi means no
// position dependence (a collapse-level function composed with the
// projection).
struct TestFunction {
  enum class Deg { Constant, Linear, Quadratic };

  Deg deg = Deg::Constant;
  Vec v;      // linear coefficients, mean-zero
  Matrix A;   // stored symmetrized, rows/cols = n
  Vec psi;    // per-site factor; empty = identically 1
  double center = 0.0;
  std::string name = "const";

  bool has_position_factor() const { return !psi.empty(); }

  double psi_at(int x) const {
    return psi.empty() ? 1.0 : psi[static_cast<std::size_t>(x)];
  }

  double phi(std::span<const double> l) const {
    switch (deg) {
      case Deg::Constant:
        return 1.0;
      case Deg::Linear:
        return dot(v, l);
      case Deg::Quadratic:
        return dot(l, matvec(A, l)) - center;
    }
    return 0.0;
  }

  double eval(std::span<const double> l, int x) const {
    return phi(l) * psi_at(x);
  }

  // d phi / d l_i
  double grad(std::span<const double> l, int i) const {
    switch (deg) {
      case Deg::Constant:
        return 0.0;
      case Deg::Linear:
        return v[static_cast<std::size_t>(i)];
      case Deg::Quadratic: {
        double s = 0.0;
        for (int j = 0; j < A.cols; ++j)
          s += A(i, j) * l[static_cast<std::size_t>(j)];
        return 2.0 * s;
      }
    }
    return 0.0;
  }

};

inline TestFunction constant_function() { return TestFunction{}; }

inline TestFunction linear_function(Vec v, std::string name) {
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  for (double& a : v) a -= mean;
  TestFunction f;
  f.deg = TestFunction::Deg::Linear;
  f.v = std::move(v);
  f.name = std::move(name);
  return f;
}

inline TestFunction quadratic_function(const Matrix& A, const GaussianMoments& mom,
                                       std::string name) {
  if (A.rows != A.cols || A.rows != mom.n())
    throw std::invalid_argument("quadratic_function: matrix shape mismatch");
  TestFunction f;
  f.deg = TestFunction::Deg::Quadratic;
  // Project onto the mean-zero sector and symmetrize so the gradient stays
  // tangent to it.
  Matrix p = mean_zero_projector(mom.table->lattice);
  f.A = symmetrize(matmul(p, matmul(A, p)));
  f.center = mom.mean_quad(f.A);
  f.name = std::move(name);
  return f;
}

inline TestFunction with_position_factor(TestFunction f, Vec psi,
                                         const std::string& suffix) {
  f.psi = std::move(psi);
  f.name += "*" + suffix;
  return f;
}

struct TestFunctionPair {
  TestFunction f;
  TestFunction g;
  std::string label() const { return f.name + " | " + g.name; }
};

// Deterministic battery of pairs covering linear, quadratic, mixed, and
// position-factored members. Always at least 20 pairs.
inline std::vector<TestFunctionPair> test_function_battery(
    const GaussianMoments& mom, RngStream& rng) {
  const SpectralTable& table = *mom.table;
  const int n = mom.n();
  auto mode_vec = [&](int k) { return table.modes[static_cast<std::size_t>(k)]; };
  auto random_s_vector = [&]() {
    Vec v(static_cast<std::size_t>(n));
    for (double& a : v) a = rng.normal();
    return project_to_S(v, table.lattice).entries;
  };
  auto indicator_psi = [&](int j) {
    Vec psi(static_cast<std::size_t>(n), 0.0);
    psi[static_cast<std::size_t>(j)] = 1.0;
    return psi;
  };
  auto cos_psi = [&]() {
    Vec psi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      psi[static_cast<std::size_t>(i)] =
          std::cos(2.0 * std::numbers::pi * i / n);
    return psi;
  };
  auto outer_sym = [&](const Vec& a, const Vec& b) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m(i, j) = a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
    return symmetrize(m);
  };

  TestFunction l1 = linear_function(mode_vec(1), "lin:mode1");
  TestFunction l2 = linear_function(mode_vec(2), "lin:mode2");
  TestFunction lr1 = linear_function(random_s_vector(), "lin:rand1");
  TestFunction lr2 = linear_function(random_s_vector(), "lin:rand2");
  TestFunction q11 =
      quadratic_function(outer_sym(mode_vec(1), mode_vec(1)), mom, "quad:m1m1");
  TestFunction q12 =
      quadratic_function(outer_sym(mode_vec(1), mode_vec(2)), mom, "quad:m1m2");
  Matrix ar(n, n);
  for (double& a : ar.a) a = rng.normal();
  TestFunction qr = quadratic_function(ar, mom, "quad:rand");
  TestFunction neg_lap =
      quadratic_function(neg_laplacian_matrix(table.lattice), mom, "quad:energy");

  std::vector<TestFunctionPair> pairs;
  pairs.push_back({l1, l1});
  pairs.push_back({l1, l2});
  pairs.push_back({l2, l1});
  pairs.push_back({lr1, lr2});
  pairs.push_back({lr1, l1});
  pairs.push_back({l2, lr2});
  pairs.push_back({q11, q11});
  pairs.push_back({q11, q12});
  pairs.push_back({q12, qr});
  pairs.push_back({qr, qr});
  pairs.push_back({neg_lap, q11});
  pairs.push_back({neg_lap, neg_lap});
  pairs.push_back({l1, q11});
  pairs.push_back({q12, l2});
  pairs.push_back({lr1, qr});
  pairs.push_back({constant_function(), l1});
  pairs.push_back({constant_function(), q11});

  Vec ind0 = indicator_psi(0);
  Vec ind1 = indicator_psi(n / 2);
  Vec cosp = cos_psi();
  pairs.push_back({with_position_factor(l1, ind0, "ind0"), l2});
  pairs.push_back({with_position_factor(l1, cosp, "cos"),
                   with_position_factor(l2, ind1, "indh")});
  pairs.push_back({with_position_factor(q11, ind0, "ind0"), lr1});
  pairs.push_back({with_position_factor(lr2, cosp, "cos"),
                   with_position_factor(qr, cosp, "cos")});
  pairs.push_back({with_position_factor(constant_function(), cosp, "cos"),
                   with_position_factor(l1, ind0, "ind0")});
  pairs.push_back({with_position_factor(q12, ind1, "indh"),
                   with_position_factor(q11, ind0, "ind0")});
  return pairs;
}

}  // namespace liftlab
