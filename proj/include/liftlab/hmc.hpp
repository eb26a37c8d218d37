#pragma once

// Randomized Hamiltonian dynamics on the oscillator chain: free flow at
// fixed energy punctuated by full velocity refreshes at rate gamma. The
// harmonic chain rotates each Fourier mode exactly at frequency
// sqrt(lambda_k); general potentials integrate with velocity Verlet, one
// cached gradient evaluation per step.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "liftlab/ecmc.hpp"
#include "liftlab/gaussian.hpp"
#include "liftlab/lattice.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/spectral.hpp"

namespace liftlab {

struct FlowKind {
  enum class Scheme { Exact, Verlet };

  Scheme scheme = Scheme::Exact;
  double eta = 0.0;

  static FlowKind exact() { return FlowKind{}; }

  static FlowKind verlet(double eta) {
    if (eta <= 0.0) throw std::domain_error("FlowKind: step size must be positive");
    return FlowKind{Scheme::Verlet, eta};
  }
};

struct HmcState {
  std::shared_ptr<const SpectralTable> table;
  Vec q, v;
  double wall_clock = 0.0;
  double gamma = 0.0;
  double beta = 1.0;
  std::uint64_t work_counter = 0;  // gradient evaluations
  Vec force_cache;
  bool force_valid = false;

  int n() const { return table->lattice.n; }
};

inline HmcState make_hmc_state(std::shared_ptr<const SpectralTable> table,
                               Vec q, Vec v, double gamma, double beta = 1.0) {
  if (gamma < 0.0) throw std::domain_error("make_hmc_state: negative refresh rate");
  if (beta <= 0.0) throw std::domain_error("make_hmc_state: beta must be positive");
  int n = table->lattice.n;
  if (static_cast<int>(q.size()) != n || static_cast<int>(v.size()) != n)
    throw std::invalid_argument("make_hmc_state: length does not match lattice");
  return HmcState{std::move(table), std::move(q), std::move(v), 0.0, gamma,
                  beta,             0,            Vec{},        false};
}

namespace detail {

// Velocities from the refresh marginal N(0, beta^{-1} I) on S; one normal
// per mode, ascending k.
inline Vec draw_velocity_modes(const SpectralTable& table, double beta,
                               RngStream& rng) {
  int n = table.lattice.n;
  Vec z(n, 0.0);
  double scale = 1.0 / std::sqrt(beta);
  for (int k = 1; k < n; ++k) z[k] = scale * rng.normal();
  return z;
}

inline void site_force(const Vec& q, const CircleLattice& lattice,
                       const InteractionPotential& potential, Vec& out) {
  int n = lattice.n;
  out.resize(n);
  for (int i = 0; i < n; ++i)
    out[i] = potential.w_prime(q[lattice.next(i)] - q[i]) -
             potential.w_prime(q[i] - q[lattice.prev(i)]);
}

}  // namespace detail

// Positions and velocities drawn from the product stationary law: the
// field from mu scaled by beta, velocities from the refresh marginal.
inline HmcState hmc_stationary_start(const GaussianTarget& target, double gamma,
                                     double beta, RngStream& rng) {
  if (beta <= 0.0)
    throw std::domain_error("hmc_stationary_start: beta must be positive");
  Vec zq = sample_mu_modes(target, rng);
  double scale = 1.0 / std::sqrt(beta);
  for (double& z : zq) z *= scale;
  Vec zv = detail::draw_velocity_modes(*target.table, beta, rng);
  return make_hmc_state(target.table, synthesize_modes(*target.table, zq),
                        synthesize_modes(*target.table, zv), gamma, beta);
}

inline double hmc_energy(const HmcState& state,
                         const InteractionPotential& potential) {
  const CircleLattice& lattice = state.table->lattice;
  double u = 0.0;
  for (int i = 0; i < lattice.n; ++i)
    u += potential.w(state.q[lattice.next(i)] - state.q[i]);
  double kin = 0.0;
  for (double vi : state.v) kin += vi * vi;
  return u + 0.5 * kin;
}

// Exact harmonic rotation of every mode: (q_k, v_k) advances by angle
// sqrt(lambda_k) * dt on its energy ellipse. Mode 0 stays put.
inline void hmc_exact_flow(HmcState& state, double dt) {
  if (dt < 0.0) throw std::domain_error("hmc_exact_flow: negative duration");
  const SpectralTable& table = *state.table;
  int n = table.lattice.n;
  Vec zq(n, 0.0), zv(n, 0.0);
  for (int k = 1; k < n; ++k) {
    zq[k] = table.mode_dot(k, state.q);
    zv[k] = table.mode_dot(k, state.v);
  }
  for (int k = 1; k < n; ++k) {
    double omega = std::sqrt(table.eigenvalues[k]);
    double c = std::cos(omega * dt);
    double s = std::sin(omega * dt);
    double q0 = zq[k], v0 = zv[k];
    zq[k] = c * q0 + (s / omega) * v0;
    zv[k] = -omega * s * q0 + c * v0;
  }
  state.q = synthesize_modes(table, zq);
  state.v = synthesize_modes(table, zv);
  state.wall_clock += dt;
  state.force_valid = false;
}

// Velocity Verlet with a force cache: each full or partial step costs
// exactly one new gradient evaluation once the cache is warm. A duration
// that is not a multiple of eta ends with one shorter step.
inline void hmc_verlet_flow(HmcState& state, double dt, double eta,
                            const InteractionPotential& potential) {
  if (dt < 0.0) throw std::domain_error("hmc_verlet_flow: negative duration");
  if (eta <= 0.0) throw std::domain_error("hmc_verlet_flow: step size must be positive");
  const CircleLattice& lattice = state.table->lattice;
  int n = lattice.n;
  if (!state.force_valid) {
    detail::site_force(state.q, lattice, potential, state.force_cache);
    state.force_valid = true;
    ++state.work_counter;
  }
  auto one_step = [&](double h) {
    double half = 0.5 * h;
    for (int i = 0; i < n; ++i) state.v[i] += half * state.force_cache[i];
    for (int i = 0; i < n; ++i) state.q[i] += h * state.v[i];
    detail::site_force(state.q, lattice, potential, state.force_cache);
    ++state.work_counter;
    for (int i = 0; i < n; ++i) state.v[i] += half * state.force_cache[i];
  };
  auto steps = static_cast<std::uint64_t>(dt / eta + 1e-9);
  for (std::uint64_t s = 0; s < steps; ++s) one_step(eta);
  double remainder = dt - static_cast<double>(steps) * eta;
  if (remainder > 1e-12 * eta) one_step(remainder);
  state.wall_clock += dt;
}

// One refresh cycle: flow for an Exp(gamma) duration, then redraw all
// velocities. Exact flow demands the harmonic chain.
inline EventRecord hmc_step(HmcState& state, const FlowKind& flow,
                            const InteractionPotential& potential,
                            RngStream& rng) {
  if (state.gamma <= 0.0)
    throw std::domain_error("hmc_step: refresh rate must be positive");
  if (flow.scheme == FlowKind::Scheme::Exact && !potential.harmonic)
    throw std::invalid_argument("hmc_step: exact flow requires the harmonic chain");
  double wait = rng.exponential() / state.gamma;
  if (flow.scheme == FlowKind::Scheme::Exact)
    hmc_exact_flow(state, wait);
  else
    hmc_verlet_flow(state, wait, flow.eta, potential);
  Vec zv = detail::draw_velocity_modes(*state.table, state.beta, rng);
  state.v = synthesize_modes(*state.table, zv);
  return EventRecord{state.wall_clock, EventKind::Refresh, -1};
}

struct HmcResult {
  TrajectorySeries series;
  std::vector<EventRecord> events;
  std::uint64_t refresh_count = 0;
  HmcState final_state;
};

// Grid-emitting trajectory run. The exact scheme keeps mode coordinates as
// its working state and reuses precomputed rotation coefficients for whole
// grid steps; Verlet advances in site space. The work column reports
// cumulative gradient evaluations (zero for exact flow). An emission tied
// with a refresh sees the pre-refresh state.
inline HmcResult hmc_simulate(HmcState state, double horizon,
                              const FlowKind& flow,
                              const InteractionPotential& potential,
                              const ObserverSchedule& observer, RngStream& rng,
                              bool record_events = false) {
  if (horizon < 0.0) throw std::domain_error("hmc_simulate: negative horizon");
  if (flow.scheme == FlowKind::Scheme::Exact && !potential.harmonic)
    throw std::invalid_argument("hmc_simulate: exact flow requires the harmonic chain");

  HmcResult out;
  out.series.obs_names = observer.set.names();
  out.series.obs.resize(observer.set.size());

  const SpectralTable& table = *state.table;
  int n = table.lattice.n;
  double start = state.wall_clock;
  double end = start + horizon;
  bool emitting = std::isfinite(observer.spacing) && observer.spacing > 0.0;
  bool exact = flow.scheme == FlowKind::Scheme::Exact;

  // Exact-path working state.
  Vec zq(n, 0.0), zv(n, 0.0), rot_cos(n, 0.0), rot_sin(n, 0.0), omega(n, 0.0);
  if (exact) {
    for (int k = 1; k < n; ++k) {
      zq[k] = table.mode_dot(k, state.q);
      zv[k] = table.mode_dot(k, state.v);
      omega[k] = std::sqrt(table.eigenvalues[k]);
      if (emitting) {
        rot_cos[k] = std::cos(omega[k] * observer.spacing);
        rot_sin[k] = std::sin(omega[k] * observer.spacing);
      }
    }
  }

  auto rotate = [&](double c, double s, int k) {
    double q0 = zq[k], v0 = zv[k];
    zq[k] = c * q0 + (s / omega[k]) * v0;
    zv[k] = -omega[k] * s * q0 + c * v0;
  };
  auto advance_exact = [&](double dt, bool full_grid_step) {
    if (full_grid_step) {
      for (int k = 1; k < n; ++k) rotate(rot_cos[k], rot_sin[k], k);
    } else {
      for (int k = 1; k < n; ++k)
        rotate(std::cos(omega[k] * dt), std::sin(omega[k] * dt), k);
    }
    state.wall_clock += dt;
  };

  double t_refresh = state.gamma > 0.0
                         ? state.wall_clock + rng.exponential() / state.gamma
                         : std::numeric_limits<double>::infinity();
  std::uint64_t next_emit = 0;
  bool on_grid = true;  // wall clock sits exactly on emission grid point next_emit - 1

  while (true) {
    double t_emit = emitting
                        ? start + static_cast<double>(next_emit) * observer.spacing
                        : std::numeric_limits<double>::infinity();
    if (t_emit > end) t_emit = std::numeric_limits<double>::infinity();

    if (t_emit <= t_refresh && t_emit <= end) {
      bool full = exact && on_grid && next_emit > 0;
      double dt = t_emit - state.wall_clock;
      if (dt > 0.0) {
        if (exact)
          advance_exact(dt, full);
        else
          hmc_verlet_flow(state, dt, flow.eta, potential);
      }
      state.wall_clock = t_emit;
      out.series.times.push_back(t_emit);
      out.series.positions.push_back(-1);
      if (exact) {
        for (int j = 0; j < observer.set.size(); ++j)
          out.series.obs[j].push_back(observer.set.eval_modes(j, zq));
      } else {
        for (int j = 0; j < observer.set.size(); ++j)
          out.series.obs[j].push_back(observer.set.eval(j, state.q, -1));
      }
      out.series.work.push_back(static_cast<double>(state.work_counter));
      ++next_emit;
      on_grid = true;
      continue;
    }

    if (t_refresh <= end) {
      double dt = t_refresh - state.wall_clock;
      if (dt > 0.0) {
        if (exact)
          advance_exact(dt, false);
        else
          hmc_verlet_flow(state, dt, flow.eta, potential);
      }
      state.wall_clock = t_refresh;
      Vec znew = detail::draw_velocity_modes(table, state.beta, rng);
      if (exact) {
        zv = znew;
      } else {
        state.v = synthesize_modes(table, znew);
      }
      ++out.refresh_count;
      if (record_events)
        out.events.push_back(EventRecord{t_refresh, EventKind::Refresh, -1});
      t_refresh = state.wall_clock + rng.exponential() / state.gamma;
      on_grid = false;
      continue;
    }

    double dt = end - state.wall_clock;
    if (dt > 0.0) {
      if (exact)
        advance_exact(dt, false);
      else
        hmc_verlet_flow(state, dt, flow.eta, potential);
    }
    state.wall_clock = end;
    break;
  }

  if (exact) {
    state.q = synthesize_modes(table, zq);
    state.v = synthesize_modes(table, zv);
    state.force_valid = false;
  }
  out.final_state = std::move(state);
  return out;
}

}  // namespace liftlab
