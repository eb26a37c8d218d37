#pragma once

// Event-chain Monte Carlo for a periodic chain of oscillators coupled by a
// pair potential W. One particle is active and moves at unit speed; lift
// moves hand activity to a neighbor at rate beta (W' of the gap)_-/+.
// Harmonic W uses the exact ramp clock and reproduces the self-repellent
// walk clocks draw for draw at beta = 1; general W is sampled by Poisson
// thinning under adaptive doubling envelope windows.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liftlab/gaussian.hpp"
#include "liftlab/lattice.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/ramp_clock.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/srw.hpp"

namespace liftlab {

struct InteractionPotential {
  std::string tag;
  std::function<double(double)> w;
  std::function<double(double)> w_prime;
  bool harmonic = false;
  // Upper bound on |w'| over a gap interval [lo, hi]; must dominate the
  // true gradient there or thinning aborts.
  std::function<double(double, double)> dw_abs_bound;
};

inline InteractionPotential harmonic_potential() {
  InteractionPotential p;
  p.tag = "harmonic";
  p.w = [](double y) { return 0.5 * y * y; };
  p.w_prime = [](double y) { return y; };
  p.harmonic = true;
  p.dw_abs_bound = [](double lo, double hi) {
    return std::max(std::abs(lo), std::abs(hi));
  };
  return p;
}

// Convex W: W' is nondecreasing, so |W'| peaks at an interval endpoint.
inline InteractionPotential make_convex_potential(
    std::string tag, std::function<double(double)> w,
    std::function<double(double)> w_prime) {
  InteractionPotential p;
  p.tag = std::move(tag);
  p.w = std::move(w);
  p.w_prime = std::move(w_prime);
  auto dw = p.w_prime;
  p.dw_abs_bound = [dw](double lo, double hi) {
    return std::max(std::abs(dw(lo)), std::abs(dw(hi)));
  };
  return p;
}

inline InteractionPotential quartic_potential() {
  return make_convex_potential(
      "quartic", [](double y) { return 0.25 * y * y * y * y; },
      [](double y) { return y * y * y; });
}

struct EnvelopeViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ThinningTrace {
  std::vector<std::pair<double, double>> proposals;  // (true rate, bound)
};

struct EcmcState {
  CircleLattice lattice;
  Vec positions;
  double wall_clock = 0.0;
  int active = 0;
  double beta = 1.0;
  RefreshKind refresh;
  double offset_correction = 0.0;
  int renorm_countdown = renorm_check_interval;

  // Centered oscillator profile; the raw positions drift upward at total
  // rate one, exactly like raw local times.
  Vec profile() const {
    Vec out(lattice.n);
    double mean = 0.0;
    for (double y : positions) mean += y;
    mean /= lattice.n;
    for (int i = 0; i < lattice.n; ++i) out[i] = positions[i] - mean;
    return out;
  }
};

inline EcmcState make_ecmc_state(CircleLattice lattice, Vec positions,
                                 double beta, RefreshKind refresh,
                                 int active = 0) {
  if (beta <= 0.0) throw std::domain_error("make_ecmc_state: beta must be positive");
  if (static_cast<int>(positions.size()) != lattice.n)
    throw std::invalid_argument("make_ecmc_state: length does not match lattice");
  if (active < 0 || active >= lattice.n)
    throw std::invalid_argument("make_ecmc_state: active index out of range");
  return EcmcState{lattice, std::move(positions), 0.0,
                   active,  beta,                 refresh,
                   0.0,     renorm_check_interval};
}

// Harmonic-chain stationary start at inverse temperature beta: the mode
// variances scale by 1/beta. Draw order: modes ascending, then the index.
inline EcmcState ecmc_stationary_start(const GaussianTarget& target, double beta,
                                       RefreshKind refresh, RngStream& rng) {
  if (beta <= 0.0)
    throw std::domain_error("ecmc_stationary_start: beta must be positive");
  Vec z = sample_mu_modes(target, rng);
  double scale = 1.0 / std::sqrt(beta);
  for (double& v : z) v *= scale;
  Vec y = synthesize_modes(*target.table, z);
  int active = static_cast<int>(rng.uniform_index(target.n()));
  return make_ecmc_state(target.table->lattice, std::move(y), beta, refresh,
                         active);
}

namespace detail {

// First arrival of an inhomogeneous clock by thinning. rate_at(s) is the
// true rate after stretching by s; bound_on(s0, s1) must dominate it on
// [s0, s1]. Returns infinity if nothing fires before s_cap.
template <class RateFn, class BoundFn>
double thinned_first_arrival(RateFn&& rate_at, BoundFn&& bound_on, double s_cap,
                             RngStream& rng, ThinningTrace* trace) {
  double s = 0.0;
  double window = 0.5;
  while (s < s_cap) {
    double w0 = s;
    double s1 = std::min(s + window, s_cap);
    double bound = bound_on(w0, s1);
    if (bound <= 0.0) {
      s = s1;
      window *= 2.0;
      continue;
    }
    double advance = rng.exponential() / bound;
    if (s + advance > s1) {
      s = s1;
      window *= 2.0;
      continue;
    }
    s += advance;
    double r = rate_at(s);
    if (r > bound * (1.0 + 1e-9)) {
      throw EnvelopeViolation(
          "ecmc thinning: rate " + std::to_string(r) + " exceeds bound " +
          std::to_string(bound) + " on stretch interval [" + std::to_string(w0) +
          ", " + std::to_string(s1) + "]");
    }
    if (trace) trace->proposals.push_back({r, bound});
    if (rng.uniform01() * bound <= r) return s;
  }
  return std::numeric_limits<double>::infinity();
}

// Right then left arrival, then the refresh clock, mirroring the walk's
// draw order so harmonic beta = 1 runs are draw-for-draw identical.
inline std::pair<EventKind, double> ecmc_next_event(
    const EcmcState& state, const InteractionPotential& potential,
    RngStream& rng, double s_cap, ThinningTrace* trace) {
  const Vec& y = state.positions;
  int x = state.active;
  double gap_right = y[state.lattice.next(x)] - y[x];
  double gap_left = y[x] - y[state.lattice.prev(x)];

  double t_right, t_left;
  if (potential.harmonic) {
    t_right = ramp_first_arrival(-gap_right, state.beta, rng.exponential());
    t_left = ramp_first_arrival(gap_left, state.beta, rng.exponential());
  } else {
    double beta = state.beta;
    const auto& dw = potential.w_prime;
    const auto& bound = potential.dw_abs_bound;
    t_right = thinned_first_arrival(
        [&](double s) { return beta * std::max(-dw(gap_right - s), 0.0); },
        [&](double s0, double s1) {
          return beta * bound(gap_right - s1, gap_right - s0);
        },
        s_cap, rng, trace);
    t_left = thinned_first_arrival(
        [&](double s) { return beta * std::max(dw(gap_left + s), 0.0); },
        [&](double s0, double s1) {
          return beta * bound(gap_left + s0, gap_left + s1);
        },
        s_cap, rng, trace);
  }

  double t_refresh = std::numeric_limits<double>::infinity();
  if (state.refresh.active()) t_refresh = rng.exponential() / state.refresh.gamma;

  EventKind kind = EventKind::JumpRight;
  double wait = t_right;
  if (t_left < wait) {
    kind = EventKind::JumpLeft;
    wait = t_left;
  }
  if (t_refresh < wait) {
    kind = EventKind::Refresh;
    wait = t_refresh;
  }
  return {kind, wait};
}

inline void ecmc_apply_event(EcmcState& state, EventKind kind, RngStream& rng) {
  switch (kind) {
    case EventKind::JumpRight:
      state.active = state.lattice.next(state.active);
      break;
    case EventKind::JumpLeft:
      state.active = state.lattice.prev(state.active);
      break;
    case EventKind::Refresh:
      if (state.refresh.variant == RefreshKind::Variant::Uniform) {
        state.active = static_cast<int>(rng.uniform_index(state.lattice.n));
      } else {
        state.active = rng.uniform01() < 0.5 ? state.lattice.prev(state.active)
                                             : state.lattice.next(state.active);
      }
      break;
  }
}

inline void ecmc_flow(EcmcState& state, double dt) {
  state.positions[state.active] += dt;
  state.wall_clock += dt;
}

inline void ecmc_renorm_tick(EcmcState& state) {
  if (--state.renorm_countdown == 0) {
    maybe_renormalize(state.positions, state.offset_correction);
    state.renorm_countdown = renorm_check_interval;
  }
}

}  // namespace detail

// One event. With no refresh and a gradient that never turns on, no event
// exists and the thinning search would not terminate; callers wanting a cap
// should use ecmc_simulate.
inline EventRecord ecmc_step(EcmcState& state,
                             const InteractionPotential& potential,
                             RngStream& rng, ThinningTrace* trace = nullptr) {
  auto [kind, wait] = detail::ecmc_next_event(
      state, potential, rng, std::numeric_limits<double>::infinity(), trace);
  detail::ecmc_flow(state, wait);
  detail::ecmc_apply_event(state, kind, rng);
  detail::ecmc_renorm_tick(state);
  return EventRecord{state.wall_clock, kind, state.active};
}

struct EcmcResult {
  TrajectorySeries series;
  std::vector<EventRecord> events;
  std::uint64_t event_count = 0;
  EcmcState final_state;
};

// Same loop shape as the walk's simulate; the work column counts events,
// each of which costs O(1) site work.
inline EcmcResult ecmc_simulate(EcmcState state,
                                const InteractionPotential& potential,
                                double horizon, const ObserverSchedule& observer,
                                RngStream& rng, const SimulateOptions& options = {},
                                ThinningTrace* trace = nullptr) {
  if (horizon < 0.0) throw std::domain_error("ecmc_simulate: negative horizon");
  TrajectorySeries series;
  series.obs_names = observer.set.names();
  series.obs.resize(observer.set.size());
  std::vector<EventRecord> events;
  std::uint64_t event_count = 0;

  double start = state.wall_clock;
  double end = start + horizon;
  bool emitting = std::isfinite(observer.spacing) && observer.spacing > 0.0;
  std::uint64_t next_emit = 0;

  auto emit_due = [&](double up_to) {
    if (!emitting) return;
    while (true) {
      double t_emit = start + static_cast<double>(next_emit) * observer.spacing;
      if (t_emit > up_to || t_emit > end) break;
      detail::ecmc_flow(state, t_emit - state.wall_clock);
      series.times.push_back(state.wall_clock);
      series.positions.push_back(state.active);
      Vec profile = state.profile();
      for (int j = 0; j < observer.set.size(); ++j)
        series.obs[j].push_back(observer.set.eval(j, profile, state.active));
      series.work.push_back(static_cast<double>(event_count));
      ++next_emit;
    }
  };

  bool capped = false;
  while (true) {
    if (event_count >= options.max_events) {
      capped = true;
      break;
    }
    double s_cap = end - state.wall_clock;
    auto [kind, wait] =
        detail::ecmc_next_event(state, potential, rng, s_cap, trace);
    double t_event = state.wall_clock + wait;
    if (t_event > end) break;
    emit_due(t_event);
    detail::ecmc_flow(state, t_event - state.wall_clock);
    detail::ecmc_apply_event(state, kind, rng);
    ++event_count;
    if (options.record_events)
      events.push_back(EventRecord{state.wall_clock, kind, state.active});
    detail::ecmc_renorm_tick(state);
  }

  if (!capped) {
    emit_due(end);
    detail::ecmc_flow(state, end - state.wall_clock);
  }
  return EcmcResult{std::move(series), std::move(events), event_count,
                    std::move(state)};
}

}  // namespace liftlab
