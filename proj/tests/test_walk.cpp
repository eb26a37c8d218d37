#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "liftlab/ecmc.hpp"
#include "liftlab/gaussian.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/ramp_clock.hpp"
#include "liftlab/srw.hpp"

using namespace liftlab;

namespace {

std::shared_ptr<const SpectralTable> table_for(int n) {
  return std::make_shared<const SpectralTable>(build_spectral_table(CircleLattice(n)));
}

}  // namespace

TEST_CASE("ramp clock inversion") {
  CHECK(ramp_first_arrival(-1.0, 1.0, 2.0) == Catch::Approx(3.0).margin(1e-14));
  CHECK(ramp_first_arrival(-2.0, 1.0, 2.0) == Catch::Approx(4.0).margin(1e-14));
  CHECK(ramp_first_arrival(3.0, 1.0, 8.0) == Catch::Approx(2.0).margin(1e-14));

  // hazard of the returned time reproduces the budget
  RngStream rng(11, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    double c = 6.0 * (rng.uniform01() - 0.5);
    double slope = 0.25 + 2.0 * rng.uniform01();
    double e = rng.exponential();
    double t = ramp_first_arrival(c, slope, e);
    REQUIRE(t >= 0.0);
    CHECK(ramp_hazard(c, slope, t) == Catch::Approx(e).epsilon(1e-10));
  }

  CHECK(ramp_hazard(-2.0, 1.0, 1.0) == 0.0);  // still in the flat part
  CHECK(ramp_first_arrival(-5.0, 2.0, 0.0) == Catch::Approx(5.0).margin(1e-14));
  CHECK_THROWS_AS(ramp_first_arrival(0.0, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(ramp_first_arrival(0.0, -1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(ramp_first_arrival(0.0, 1.0, -1.0), std::domain_error);
}

TEST_CASE("jump rates read the local time gaps") {
  CircleLattice lat(3);
  LiftedState s = cold_start(lat);
  s.raw_local_time = {3.0, 1.0, 2.0};
  s.position = 0;
  auto [right, left] = jump_rates(s);
  CHECK(right == 2.0);  // l0 - l1
  CHECK(left == 1.0);   // l0 - l2
  s.position = 1;
  auto [r1, l1] = jump_rates(s);
  CHECK(r1 == 0.0);
  CHECK(l1 == 0.0);
}

TEST_CASE("local time accrues only at the walker") {
  LiftedState s = cold_start(CircleLattice(4));
  s.position = 2;
  deterministic_flow(s, 1.5);
  CHECK(s.raw_local_time[2] == 1.5);
  CHECK(s.raw_local_time[0] == 0.0);
  CHECK(s.wall_clock == 1.5);
  // centered profile subtracts the uniform drift
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += s.profile_entry(i);
  CHECK(sum == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("total local time grows at unit rate") {
  auto table = table_for(6);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(21, 0);
  LiftedState s = stationary_start(target, rng);
  double sum0 = 0.0;
  for (double l : s.raw_local_time) sum0 += l;
  SimulateOptions opt;
  opt.max_events = 5000;
  SimulateResult res = simulate(std::move(s), 1e7, RefreshKind::uniform(0.2),
                                ObserverSchedule::none(), rng, opt);
  double sum1 = 0.0;
  for (double l : res.final_state.raw_local_time) sum1 += l;
  double offset = res.final_state.offset_correction;
  CHECK(sum1 + offset * 6 - sum0 ==
        Catch::Approx(res.final_state.wall_clock).epsilon(1e-9));
}

TEST_CASE("renormalization is exact on the gaps") {
  double base = 1048576.0;  // 2^20
  Vec values = {base + 0.25, base + 1.50, base + 0.75, base + 3.25};
  Vec gaps;
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    gaps.push_back(values[i + 1] - values[i]);
  double offset = 0.0;
  detail::maybe_renormalize(values, offset);
  CHECK(offset == base);
  CHECK(values[0] == 0.25);
  CHECK(values[3] == 3.25);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    CHECK(values[i + 1] - values[i] == gaps[i]);  // bit-identical

  // below threshold nothing happens
  Vec small = {1.0, 2.0};
  double off2 = 0.0;
  detail::maybe_renormalize(small, off2);
  CHECK(off2 == 0.0);
  CHECK(small[0] == 1.0);
}

TEST_CASE("refresh dominance at large rate") {
  auto table = table_for(8);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(5, 0);
  LiftedState s = stationary_start(target, rng);
  SimulateOptions opt;
  opt.record_events = true;
  opt.max_events = 3000;
  SimulateResult res = simulate(std::move(s), 1e9, RefreshKind::uniform(1e6),
                                ObserverSchedule::none(), rng, opt);
  std::uint64_t refreshes = 0;
  for (const auto& e : res.events)
    if (e.kind == EventKind::Refresh) ++refreshes;
  CHECK(refreshes > res.events.size() * 9 / 10);
}

TEST_CASE("neighbor refresh moves to an adjacent site") {
  auto table = table_for(9);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(6, 0);
  LiftedState s = stationary_start(target, rng);
  CircleLattice lat = s.lattice;
  int prev_pos = s.position;
  SimulateOptions opt;
  opt.record_events = true;
  opt.max_events = 2000;
  SimulateResult res = simulate(std::move(s), 1e9, RefreshKind::neighbor_walk(50.0),
                                ObserverSchedule::none(), rng, opt);
  for (const auto& e : res.events) {
    if (e.kind == EventKind::Refresh) {
      bool adjacent = e.new_position == lat.next(prev_pos) ||
                      e.new_position == lat.prev(prev_pos);
      CHECK(adjacent);
    }
    prev_pos = e.new_position;
  }
}

TEST_CASE("event times are strictly ordered and capped runs stop early") {
  auto table = table_for(5);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(7, 0);
  LiftedState s = stationary_start(target, rng);
  SimulateOptions opt;
  opt.record_events = true;
  opt.max_events = 500;
  SimulateResult res = simulate(std::move(s), 1e9, RefreshKind::uniform(0.5),
                                ObserverSchedule::none(), rng, opt);
  CHECK(res.event_count == 500);
  REQUIRE(res.events.size() == 500);
  for (std::size_t i = 1; i < res.events.size(); ++i)
    CHECK(res.events[i].time >= res.events[i - 1].time);
}

TEST_CASE("walk and chain drive identically at unit temperature") {
  for (int n : {5, 8}) {
    auto table = table_for(n);
    GaussianTarget target = make_gaussian_target(table);
    RefreshKind refresh = RefreshKind::uniform(0.3);

    RngStream rng_walk(101, 0);
    LiftedState ws = stationary_start(target, rng_walk);
    RngStream rng_chain(101, 0);
    EcmcState cs = ecmc_stationary_start(target, 1.0, refresh, rng_chain);

    REQUIRE(ws.position == cs.active);
    for (int i = 0; i < n; ++i)
      CHECK(ws.raw_local_time[i] == Catch::Approx(cs.positions[i]).margin(1e-12));

    SimulateOptions opt;
    opt.record_events = true;
    opt.max_events = 2000;
    SimulateResult wr = simulate(std::move(ws), 1e9, refresh,
                                 ObserverSchedule::none(), rng_walk, opt);
    EcmcResult cr = ecmc_simulate(std::move(cs), harmonic_potential(), 1e9,
                                  ObserverSchedule::none(), rng_chain, opt);
    REQUIRE(wr.events.size() == 2000);
    REQUIRE(cr.events.size() == 2000);
    for (std::size_t i = 0; i < wr.events.size(); ++i) {
      CHECK(wr.events[i].kind == cr.events[i].kind);
      CHECK(wr.events[i].new_position == cr.events[i].new_position);
      CHECK(std::abs(wr.events[i].time - cr.events[i].time) <= 1e-12);
    }
  }
}

TEST_CASE("chain positions drift up at unit rate") {
  auto table = table_for(6);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(33, 0);
  EcmcState s = ecmc_stationary_start(target, 1.0, RefreshKind::uniform(0.4), rng);
  double sum0 = 0.0;
  for (double y : s.positions) sum0 += y;
  SimulateOptions opt;
  opt.max_events = 4000;
  EcmcResult res = ecmc_simulate(std::move(s), harmonic_potential(), 1e9,
                                 ObserverSchedule::none(), rng, opt);
  double sum1 = 0.0;
  for (double y : res.final_state.positions) sum1 += y;
  CHECK(sum1 + res.final_state.offset_correction * 6 - sum0 ==
        Catch::Approx(res.final_state.wall_clock).epsilon(1e-9));
}

TEST_CASE("stationary start scales with inverse temperature") {
  auto table = table_for(7);
  GaussianTarget target = make_gaussian_target(table);
  RngStream r1(55, 0), r4(55, 0);
  EcmcState a = ecmc_stationary_start(target, 1.0, RefreshKind::none(), r1);
  EcmcState b = ecmc_stationary_start(target, 4.0, RefreshKind::none(), r4);
  CHECK(a.active == b.active);
  Vec pa = a.profile(), pb = b.profile();
  for (int i = 0; i < 7; ++i)
    CHECK(pb[i] * 2.0 == Catch::Approx(pa[i]).margin(1e-12));
  CHECK_THROWS_AS(ecmc_stationary_start(target, 0.0, RefreshKind::none(), r1),
                  std::domain_error);
}

TEST_CASE("thinning respects its envelope") {
  auto table = table_for(6);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(77, 0);
  EcmcState s = ecmc_stationary_start(target, 1.0, RefreshKind::uniform(0.3), rng);
  ThinningTrace trace;
  SimulateOptions opt;
  opt.max_events = 1500;
  EcmcResult res = ecmc_simulate(std::move(s), quartic_potential(), 1e9,
                                 ObserverSchedule::none(), rng, opt, &trace);
  CHECK(res.event_count == 1500);
  REQUIRE(!trace.proposals.empty());
  std::size_t strict = 0;
  for (auto [rate, bound] : trace.proposals) {
    CHECK(rate <= bound * (1.0 + 1e-9));
    if (rate < bound * 0.999) ++strict;
  }
  CHECK(strict > 0);  // thinning actually rejects sometimes
}

TEST_CASE("a lying envelope is detected") {
  auto table = table_for(6);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(78, 0);
  EcmcState s = ecmc_stationary_start(target, 1.0, RefreshKind::none(), rng);
  InteractionPotential liar = quartic_potential();
  liar.dw_abs_bound = [](double, double) { return 1e-6; };
  SimulateOptions opt;
  opt.max_events = 200;
  CHECK_THROWS_AS(ecmc_simulate(std::move(s), liar, 1e9,
                                ObserverSchedule::none(), rng, opt),
                  EnvelopeViolation);
}

TEST_CASE("corrupted minus rate changes the event stream") {
  auto table = table_for(6);
  GaussianTarget target = make_gaussian_target(table);
  RngStream ra(91, 0), rb(91, 0);
  LiftedState sa = stationary_start(target, ra);
  LiftedState sb = stationary_start(target, rb);
  SimulateOptions plain, corrupted;
  plain.record_events = corrupted.record_events = true;
  plain.max_events = corrupted.max_events = 400;
  corrupted.corrupt_minus_rate = true;
  SimulateResult a = simulate(std::move(sa), 1e9, RefreshKind::uniform(0.3),
                              ObserverSchedule::none(), ra, plain);
  SimulateResult b = simulate(std::move(sb), 1e9, RefreshKind::uniform(0.3),
                              ObserverSchedule::none(), rb, corrupted);
  bool differs = false;
  for (std::size_t i = 0; i < a.events.size() && !differs; ++i)
    differs = a.events[i].time != b.events[i].time ||
              a.events[i].kind != b.events[i].kind;
  CHECK(differs);
}
