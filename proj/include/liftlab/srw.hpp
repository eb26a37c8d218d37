#pragma once

// Piecewise-deterministic simulation of the self-repellent walk on the
// circle, tracked through its lifted state: raw local times L (growing at
// unit rate at the walker), wall clock t, and walker position x. The
// centered profile is L + offset - t/n; jump rates depend only on
// differences of L, so every clock is sampled exactly.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "liftlab/gaussian.hpp"
#include "liftlab/lattice.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/ramp_clock.hpp"
#include "liftlab/rng.hpp"

namespace liftlab {

enum class EventKind : std::uint8_t { JumpRight = 0, JumpLeft = 1, Refresh = 2 };

struct EventRecord {
  double time = 0.0;
  EventKind kind = EventKind::JumpRight;
  int new_position = 0;
};

struct RefreshKind {
  enum class Variant : std::uint8_t { None = 0, Uniform = 1, NeighborWalk = 2 };

  Variant variant = Variant::None;
  double gamma = 0.0;

  static RefreshKind none() { return RefreshKind{}; }

  static RefreshKind uniform(double gamma) {
    if (gamma < 0.0) throw std::domain_error("RefreshKind: negative rate");
    return RefreshKind{Variant::Uniform, gamma};
  }

  static RefreshKind neighbor_walk(double gamma) {
    if (gamma < 0.0) throw std::domain_error("RefreshKind: negative rate");
    return RefreshKind{Variant::NeighborWalk, gamma};
  }

  bool active() const { return variant != Variant::None; }
};

// Raw local times renormalize once their minimum clears this threshold;
// subtracting an integer below every entry is exact in double precision,
// so event times are bit-identical with or without the shift.
inline constexpr double renorm_threshold = 1048576.0;  // 2^20
inline constexpr int renorm_check_interval = 4096;

struct LiftedState {
  CircleLattice lattice;
  Vec raw_local_time;
  double wall_clock = 0.0;
  int position = 0;
  double offset_correction = 0.0;
  int renorm_countdown = renorm_check_interval;

  double profile_entry(int i) const {
    return raw_local_time[i] + offset_correction - wall_clock / lattice.n;
  }

  Vec profile() const {
    Vec out(lattice.n);
    double shift = offset_correction - wall_clock / lattice.n;
    for (int i = 0; i < lattice.n; ++i) out[i] = raw_local_time[i] + shift;
    return out;
  }
};

inline LiftedState cold_start(CircleLattice lattice) {
  return LiftedState{lattice, Vec(lattice.n, 0.0)};
}

// Stationary start: profile from mu, walker position uniform. Draw order
// is modes ascending, then the position index.
inline LiftedState stationary_start(const GaussianTarget& target, RngStream& rng) {
  MeanZeroProfile p = sample_mu(target, rng);
  LiftedState state{target.table->lattice, std::move(p.entries)};
  state.position = static_cast<int>(rng.uniform_index(target.n()));
  return state;
}

// (right rate, left rate) at the current instant.
inline std::pair<double, double> jump_rates(const LiftedState& state) {
  const Vec& l = state.raw_local_time;
  int x = state.position;
  double right = std::max(l[x] - l[state.lattice.next(x)], 0.0);
  double left = std::max(l[x] - l[state.lattice.prev(x)], 0.0);
  return {right, left};
}

inline void deterministic_flow(LiftedState& state, double dt) {
  if (dt < 0.0) throw std::domain_error("deterministic_flow: negative duration");
  state.raw_local_time[state.position] += dt;
  state.wall_clock += dt;
}

struct StepOptions {
  bool corrupt_minus_rate = false;  // test hook: breaks stationarity on purpose
};

namespace detail {

// Both jump clocks are ramps in the flow time s: the right rate is
// (c_plus + s)_+ with c_plus = L_x - L_{x+1}, the left rate (c_minus + s)_+
// with c_minus = L_x - L_{x-1}. Draw order: right budget, then left budget.
inline std::pair<double, double> srw_jump_times(const LiftedState& state,
                                                RngStream& rng,
                                                bool corrupt_minus_rate) {
  const Vec& l = state.raw_local_time;
  int x = state.position;
  double c_plus = l[x] - l[state.lattice.next(x)];
  double c_minus = l[x] - l[state.lattice.prev(x)];
  if (corrupt_minus_rate) c_minus = -c_minus;
  double t_plus = ramp_first_arrival(c_plus, 1.0, rng.exponential());
  double t_minus = ramp_first_arrival(c_minus, 1.0, rng.exponential());
  return {t_plus, t_minus};
}

// Earliest of the three clocks; ties resolve jump-right, jump-left, refresh.
inline std::pair<EventKind, double> srw_next_event(const LiftedState& state,
                                                   const RefreshKind& refresh,
                                                   RngStream& rng,
                                                   bool corrupt_minus_rate) {
  auto [t_plus, t_minus] = srw_jump_times(state, rng, corrupt_minus_rate);
  double t_refresh = std::numeric_limits<double>::infinity();
  if (refresh.active()) t_refresh = rng.exponential() / refresh.gamma;
  EventKind kind = EventKind::JumpRight;
  double wait = t_plus;
  if (t_minus < wait) {
    kind = EventKind::JumpLeft;
    wait = t_minus;
  }
  if (t_refresh < wait) {
    kind = EventKind::Refresh;
    wait = t_refresh;
  }
  return {kind, wait};
}

// Post-flow position update. Refresh draws come after both jump budgets.
inline void srw_apply_event(LiftedState& state, EventKind kind,
                            const RefreshKind& refresh, RngStream& rng) {
  switch (kind) {
    case EventKind::JumpRight:
      state.position = state.lattice.next(state.position);
      break;
    case EventKind::JumpLeft:
      state.position = state.lattice.prev(state.position);
      break;
    case EventKind::Refresh:
      if (refresh.variant == RefreshKind::Variant::Uniform) {
        state.position = static_cast<int>(rng.uniform_index(state.lattice.n));
      } else {
        state.position = rng.uniform01() < 0.5
                             ? state.lattice.prev(state.position)
                             : state.lattice.next(state.position);
      }
      break;
  }
}

inline void maybe_renormalize(Vec& values, double& offset_correction) {
  double lo = values[0];
  for (double v : values) lo = std::min(lo, v);
  if (lo <= renorm_threshold) return;
  double shift = std::floor(lo);
  for (double& v : values) v -= shift;
  offset_correction += shift;
}

inline void srw_renorm_tick(LiftedState& state) {
  if (--state.renorm_countdown == 0) {
    maybe_renormalize(state.raw_local_time, state.offset_correction);
    state.renorm_countdown = renorm_check_interval;
  }
}

}  // namespace detail

inline std::pair<double, double> next_jump_times(const LiftedState& state,
                                                 RngStream& rng) {
  return detail::srw_jump_times(state, rng, false);
}

// One event: sample all competing clocks, flow to the earliest, apply it.
inline EventRecord step(LiftedState& state, const RefreshKind& refresh,
                        RngStream& rng, const StepOptions& options = {}) {
  auto [kind, wait] =
      detail::srw_next_event(state, refresh, rng, options.corrupt_minus_rate);
  deterministic_flow(state, wait);
  detail::srw_apply_event(state, kind, refresh, rng);
  detail::srw_renorm_tick(state);
  return EventRecord{state.wall_clock, kind, state.position};
}

struct SimulateOptions {
  bool record_events = false;
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
  bool corrupt_minus_rate = false;
};

struct SimulateResult {
  TrajectorySeries series;
  std::vector<EventRecord> events;
  std::uint64_t event_count = 0;
  LiftedState final_state;
};

// Run until the horizon (or an event cap), emitting observable rows on the
// regular grid. Emissions materialize the centered profile; the event loop
// itself never does. An emission landing exactly on an event time sees the
// pre-event state. A run stopped by the event cap ends at its last event.
inline SimulateResult simulate(LiftedState state, double horizon,
                               const RefreshKind& refresh,
                               const ObserverSchedule& observer, RngStream& rng,
                               const SimulateOptions& options = {}) {
  if (horizon < 0.0) throw std::domain_error("simulate: negative horizon");
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
      deterministic_flow(state, t_emit - state.wall_clock);
      series.times.push_back(state.wall_clock);
      series.positions.push_back(state.position);
      Vec profile = state.profile();
      for (int j = 0; j < observer.set.size(); ++j)
        series.obs[j].push_back(observer.set.eval(j, profile, state.position));
      ++next_emit;
    }
  };

  bool capped = false;
  while (true) {
    if (event_count >= options.max_events) {
      capped = true;
      break;
    }
    auto [kind, wait] = detail::srw_next_event(state, refresh, rng,
                                               options.corrupt_minus_rate);
    double t_event = state.wall_clock + wait;
    if (t_event > end) break;
    emit_due(t_event);
    deterministic_flow(state, t_event - state.wall_clock);
    detail::srw_apply_event(state, kind, refresh, rng);
    ++event_count;
    if (options.record_events)
      events.push_back(EventRecord{state.wall_clock, kind, state.position});
    detail::srw_renorm_tick(state);
  }

  if (!capped) {
    emit_due(end);
    deterministic_flow(state, end - state.wall_clock);
  }
  return SimulateResult{std::move(series), std::move(events), event_count,
                        std::move(state)};
}

}  // namespace liftlab
