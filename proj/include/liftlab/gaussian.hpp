#pragma once

// The stationary Gaussian field mu = N(0, (-Delta)^+) on the mean-zero
// hyperplane, the Dirichlet potential, and exact Ornstein-Uhlenbeck
// propagation mode by mode under either time normalization.

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "liftlab/lattice.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/spectral.hpp"

namespace liftlab {

struct GaussianTarget {
  std::shared_ptr<const SpectralTable> table;
  Vec mode_std;  // sigma_k = lambda_k^{-1/2}, sigma_0 = 0

  int n() const { return table->lattice.n; }
};

inline GaussianTarget make_gaussian_target(
    std::shared_ptr<const SpectralTable> table) {
  GaussianTarget t{table, Vec(table->lattice.n, 0.0)};
  for (int k = 1; k < t.n(); ++k)
    t.mode_std[k] = 1.0 / std::sqrt(table->eigenvalues[k]);
  return t;
}

inline Vec synthesize_modes(const SpectralTable& table,
                            std::span<const double> z) {
  int n = table.lattice.n;
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("synthesize_modes: length mismatch");
  Vec x(n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (z[k] == 0.0) continue;
    const Vec& m = table.modes[k];
    for (int i = 0; i < n; ++i) x[i] += z[k] * m[i];
  }
  return x;
}

// Mode coordinates of a stationary draw; z_0 = 0. One normal per mode,
// drawn in ascending k, so streams stay alignment-stable.
inline Vec sample_mu_modes(const GaussianTarget& target, RngStream& rng) {
  Vec z(target.n(), 0.0);
  for (int k = 1; k < target.n(); ++k) z[k] = target.mode_std[k] * rng.normal();
  return z;
}

inline MeanZeroProfile sample_mu(const GaussianTarget& target, RngStream& rng) {
  Vec z = sample_mu_modes(target, rng);
  return MeanZeroProfile(target.table->lattice,
                         synthesize_modes(*target.table, z));
}

// U(x) = (1/2) sum_i (x_{i+1} - x_i)^2 over the periodic bonds.
inline double potential(std::span<const double> x, const CircleLattice& lattice) {
  if (static_cast<int>(x.size()) != lattice.n)
    throw std::invalid_argument("potential: length does not match lattice");
  double u = 0.0;
  for (int i = 0; i < lattice.n; ++i) {
    double d = x[lattice.next(i)] - x[i];
    u += d * d;
  }
  return 0.5 * u;
}

inline double potential(const MeanZeroProfile& profile) {
  return potential(profile.entries, profile.lattice);
}

enum class OuSpeed { Slowed, Unit };

struct OuSchedule {
  OuSpeed speed = OuSpeed::Slowed;

  // Decay rate of mode k. Slowed runs at 1/n the unit speed, matching the
  // clock the walk's shape actually relaxes on.
  double decay_rate(double lambda_k, int n) const {
    return speed == OuSpeed::Slowed ? lambda_k / (2.0 * n) : lambda_k / 2.0;
  }
};

// Exact transition over time t: each mode decays and receives its exact
// Gaussian increment. Draws n-1 normals in ascending k regardless of t.
inline Vec ou_propagate_modes(std::span<const double> z, double t,
                              const GaussianTarget& target,
                              const OuSchedule& schedule, RngStream& rng) {
  if (t < 0.0) throw std::domain_error("ou_propagate: negative time");
  int n = target.n();
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("ou_propagate: length mismatch");
  Vec out(n, 0.0);
  for (int k = 1; k < n; ++k) {
    double r = schedule.decay_rate(target.table->eigenvalues[k], n);
    double decay = std::exp(-r * t);
    double noise = target.mode_std[k] * std::sqrt(-std::expm1(-2.0 * r * t));
    out[k] = decay * z[k] + noise * rng.normal();
  }
  return out;
}

inline MeanZeroProfile ou_propagate(const MeanZeroProfile& state, double t,
                                    const GaussianTarget& target,
                                    const OuSchedule& schedule,
                                    RngStream& rng) {
  const SpectralTable& table = *target.table;
  Vec z(target.n(), 0.0);
  for (int k = 1; k < target.n(); ++k)
    z[k] = table.mode_dot(k, state.entries);
  Vec zt = ou_propagate_modes(z, t, target, schedule, rng);
  return MeanZeroProfile(table.lattice, synthesize_modes(table, zt));
}

// Precomputed one-grid-step propagator for trajectory runs on a fixed
// emission spacing; avoids per-step exp calls.
struct OuGridStep {
  Vec decay;      // e^{-r_k dt}
  Vec noise_std;  // sigma_k sqrt(1 - e^{-2 r_k dt})

  void apply(std::span<double> z, RngStream& rng) const {
    for (std::size_t k = 1; k < decay.size(); ++k)
      z[k] = decay[k] * z[k] + noise_std[k] * rng.normal();
  }
};

inline OuGridStep make_ou_grid_step(const GaussianTarget& target,
                                    const OuSchedule& schedule, double dt) {
  if (dt < 0.0) throw std::domain_error("make_ou_grid_step: negative spacing");
  int n = target.n();
  OuGridStep step{Vec(n, 0.0), Vec(n, 0.0)};
  for (int k = 1; k < n; ++k) {
    double r = schedule.decay_rate(target.table->eigenvalues[k], n);
    step.decay[k] = std::exp(-r * dt);
    step.noise_std[k] = target.mode_std[k] * std::sqrt(-std::expm1(-2.0 * r * dt));
  }
  return step;
}

}  // namespace liftlab
