#pragma once

// Discrete circle Z_n: site indexing, the periodic graph Laplacian, and
// mean-zero profiles (the hyperplane S where the local-time shape lives).

#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <vector>

namespace liftlab {

using Vec = std::vector<double>;

struct CircleLattice {
  int n;

  explicit CircleLattice(int n_sites) : n(n_sites) {
    if (n_sites < 3)
      throw std::domain_error("CircleLattice: need at least 3 sites");
  }

  int next(int i) const { return i + 1 == n ? 0 : i + 1; }
  int prev(int i) const { return i == 0 ? n - 1 : i - 1; }
};

// (Delta v)_i = v_{i+1} - 2 v_i + v_{i-1} with periodic wrap.
inline Vec laplacian_apply(std::span<const double> v,
                           const CircleLattice& lattice) {
  if (static_cast<int>(v.size()) != lattice.n)
    throw std::invalid_argument("laplacian_apply: length does not match lattice");
  int n = lattice.n;
  Vec out(n);
  for (int i = 0; i < n; ++i)
    out[i] = v[lattice.next(i)] - 2.0 * v[i] + v[lattice.prev(i)];
  return out;
}

// A profile constrained to the mean-zero hyperplane S.
struct MeanZeroProfile {
  CircleLattice lattice;
  Vec entries;

  MeanZeroProfile(CircleLattice lat, Vec values)
      : lattice(lat), entries(std::move(values)) {
    if (static_cast<int>(entries.size()) != lattice.n)
      throw std::invalid_argument("MeanZeroProfile: length does not match lattice");
    double sum = 0.0;
    for (double e : entries) sum += e;
    if (std::abs(sum) > 1e-9 * lattice.n)
      throw std::invalid_argument("MeanZeroProfile: entries do not sum to zero");
  }
};

// Orthogonal projection onto S: subtract the site average.
inline MeanZeroProfile project_to_S(std::span<const double> v,
                                    const CircleLattice& lattice) {
  if (static_cast<int>(v.size()) != lattice.n)
    throw std::invalid_argument("project_to_S: length does not match lattice");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= lattice.n;
  Vec out(lattice.n);
  for (int i = 0; i < lattice.n; ++i) out[i] = v[i] - mean;
  // Guard against accumulated rounding; one extra sweep is exact enough.
  double resid = 0.0;
  for (double x : out) resid += x;
  resid /= lattice.n;
  for (double& x : out) x -= resid;
  return MeanZeroProfile(lattice, std::move(out));
}

}  // namespace liftlab
