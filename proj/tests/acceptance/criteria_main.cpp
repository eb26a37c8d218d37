// Acceptance battery: twelve numbered criteria, one pass/fail line each.
// Every tolerance and seed is pinned here; the exit code is the number of
// failing criteria. argv[1] names the CLI binary used by the replay check.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liftlab/liftlab.hpp"

namespace {

using namespace liftlab;
namespace fs = std::filesystem;

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t k) {
  return fnv1a64_u64(k, fnv1a64_u64(master));
}

std::string fm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Gate {
  int failures = 0;
  std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

  void report(int idx, const char* name, bool ok, const std::string& detail) {
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - mark)
                      .count();
    mark = std::chrono::steady_clock::now();
    std::printf("[%2d] %s %s: %s (%.1fs)\n", idx, ok ? "PASS" : "FAIL", name,
                detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::shared_ptr<const SpectralTable> table_for(int n) {
  return std::make_shared<const SpectralTable>(
      build_spectral_table(CircleLattice(n)));
}

// ------------------------------------------------- 1: invariant measure

void criterion_covariance(Gate& gate) {
  constexpr std::uint64_t kSeed = 101;
  bool ok = true;
  std::string detail;
  for (int n : {4, 8}) {
    CovarianceCheckResult res =
        run_srw_covariance_check(table_for(n), 1.0e6, sub_seed(kSeed, n));
    ok = ok && res.pass();
    if (!detail.empty()) detail += "; ";
    detail += "n=" + std::to_string(n) + " diag " + fm(res.worst_diag_rel) +
              " offdiag " + fm(res.worst_offdiag_sigma) + "se chi2 " +
              fm(res.position_chi2) + "<" + fm(res.position_chi2_crit);
  }
  gate.report(1, "invariant-measure", ok, detail);
}

// ------------------------------------------------- 2: first-event law

double ramp_rate(double c, double t) { return std::max(c + t, 0.0); }

// Composite Simpson for the cumulative hazard of the two competing ramp
// clocks. The integrand's kinks cost O(h^2), far below the KS resolution.
double cumulative_hazard(double a, double b, double t) {
  constexpr int panels = 512;
  double h = t / panels;
  double sum = ramp_rate(a, 0.0) + ramp_rate(b, 0.0) + ramp_rate(a, t) +
               ramp_rate(b, t);
  for (int j = 1; j < panels; ++j) {
    double s = h * j;
    double w = (j % 2 == 1) ? 4.0 : 2.0;
    sum += w * (ramp_rate(a, s) + ramp_rate(b, s));
  }
  return sum * h / 3.0;
}

void criterion_event_law(Gate& gate) {
  constexpr std::uint64_t kSeed = 202;
  constexpr int kDraws = 100000;
  const std::vector<std::pair<double, double>> gaps = {
      {1.5, 0.6},  {2.0, -0.7},  {-0.4, 1.2}, {-1.0, -1.5}, {0.0, 0.8},
      {3.0, -2.5}, {-2.0, -0.3}, {0.3, 0.0},  {-0.6, 2.5},  {1.0, 1.0}};
  double crit = ks_critical_5pct(kDraws);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t s = 0; s < gaps.size(); ++s) {
    auto [a, b] = gaps[s];
    std::vector<double> times(kDraws);
    for (int i = 0; i < kDraws; ++i) {
      LiftedState st{CircleLattice(5), Vec{0.0, -a, 0.0, 0.0, -b}};
      RngStream rng(sub_seed(kSeed, s), static_cast<std::uint64_t>(i));
      times[i] = step(st, RefreshKind::none(), rng).time;
    }
    auto cdf = [a, b](double t) {
      return t <= 0.0 ? 0.0 : 1.0 - std::exp(-cumulative_hazard(a, b, t));
    };
    double d = ks_statistic(times, cdf);
    worst = std::max(worst, d);
    ok = ok && d < crit;
  }
  gate.report(2, "event-time-law", ok,
              "10 start states x " + std::to_string(kDraws) +
                  " draws, worst KS " + fm(worst) + " < " + fm(crit));
}

// ------------------------------------------------- 3: lift identities

void criterion_lift(Gate& gate) {
  constexpr std::uint64_t kSeed = 303;
  constexpr std::uint64_t kBudget = 100000;
  bool ok = true;
  int linear_pairs = 0;
  int quad_pairs = 0;
  double worst_analytic = 0.0;
  for (int n : {3, 4, 8}) {
    auto table = table_for(n);
    GaussianMoments mom(table);
    RngStream battery_rng(sub_seed(kSeed, n), 0);
    auto battery = test_function_battery(mom, battery_rng);
    RngStream mc(sub_seed(kSeed, n), 1);
    for (const TestFunctionPair& pair : battery) {
      if (pair.f.has_position_factor() || pair.g.has_position_factor())
        continue;
      bool both_linear = pair.f.deg == TestFunction::Deg::Linear &&
                         pair.g.deg == TestFunction::Deg::Linear;
      bool has_quad = pair.f.deg == TestFunction::Deg::Quadratic ||
                      pair.g.deg == TestFunction::Deg::Quadratic;
      VerifyReport rep = verify_lift(pair, table, kBudget, mc);
      for (const IdentityCheck& c : rep.checks) {
        ok = ok && c.pass;
        if (both_linear) {
          ok = ok && c.analytic;
          worst_analytic =
              std::max(worst_analytic, std::abs(c.lhs - c.rhs));
        }
      }
      linear_pairs += both_linear;
      quad_pairs += has_quad;
    }
  }
  ok = ok && linear_pairs >= 3 && quad_pairs >= 3;
  gate.report(3, "lift-identities", ok,
              std::to_string(linear_pairs) + " linear pairs worst closed-form gap " +
                  fm(worst_analytic) + ", " + std::to_string(quad_pairs) +
                  " quadratic pairs within 3se at budget " +
                  std::to_string(kBudget));
}

// ------------------------------------------------- 4: adjoint pairings

void criterion_adjoints(Gate& gate) {
  constexpr std::uint64_t kSeed = 404;
  constexpr std::uint64_t kBudget = 50000;
  bool ok = true;
  int checked = 0;
  double worst = 0.0;
  for (int n : {3, 4, 8}) {
    auto table = table_for(n);
    GaussianMoments mom(table);
    RngStream battery_rng(sub_seed(kSeed, n), 0);
    auto battery = test_function_battery(mom, battery_rng);
    RngStream mc(sub_seed(kSeed, n), 1);
    for (const TestFunctionPair& pair : battery) {
      VerifyReport rep = verify_adjoints(pair, table, kBudget, mc);
      for (const IdentityCheck& c : rep.checks) {
        if (c.label.rfind("adjoint:", 0) != 0) continue;
        ++checked;
        ok = ok && c.pass;
        if (c.has_mc && c.mc_se > 0.0)
          worst = std::max(worst, std::abs(c.mc_mean) / c.mc_se);
      }
    }
  }
  ok = ok && checked >= 250;
  gate.report(4, "adjoint-pairings", ok,
              std::to_string(checked) + " pairings, worst deviation " +
                  fm(worst) + "se");
}

// ------------------------------------------------- 5: collapse calibration

void criterion_collapse(Gate& gate) {
  constexpr std::uint64_t kSeed = 505;
  constexpr int kReplicas = 16384;
  bool ok = true;
  std::string detail;
  Vec xs, ys, ws;
  for (int n : {8, 16, 32}) {
    double gap = collapse_gap(CircleLattice(n));
    RelaxationEstimate est =
        estimate_relaxation(sampler_ou(n), Observable::fourier_mode(1),
                            kReplicas, 12.0 / gap, sub_seed(kSeed, n));
    double rel = std::abs(est.rate - gap) / gap;
    ok = ok && !est.failed && rel <= 0.10;
    if (!detail.empty()) detail += "; ";
    detail += "n=" + std::to_string(n) + " off by " + fm(100.0 * rel) + "%";
    if (!est.failed && est.rate > 0.0) {
      double se_log = std::max(est.rate_stderr / est.rate, 1e-9);
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(-std::log(est.rate));
      ws.push_back(1.0 / (se_log * se_log));
    }
  }
  double expo = 0.0;
  bool expo_ok = false;
  if (xs.size() == 3) {
    LinearFit fit = wls_fit(xs, ys, ws);
    expo = fit.slope;
    expo_ok = expo >= 2.7 && expo <= 3.3;
  }
  gate.report(5, "collapse-calibration", ok && expo_ok,
              detail + "; exponent " + fm(expo) + " in [2.7, 3.3]");
}

// ------------------------------- 6 + 7: lower bound and refresh exponent

void criterion_srw_scaling(Gate& gate) {
  constexpr std::uint64_t kSeed = 606;
  constexpr int kReplicas = 512;
  bool bound_ok = true;
  std::vector<RelaxationEstimate> ests;
  std::string detail;
  for (int n : {8, 16, 32, 64}) {
    SamplerSpec spec = sampler_srw(n, RefreshKind::uniform(1.0 / n));
    RelaxationEstimate est = estimate_relaxation(
        spec, Observable::fourier_mode(1), kReplicas,
        12.0 * anticipated_t_rel(spec), sub_seed(kSeed, n));
    double bound = lower_bound_value(n);
    bool this_ok =
        !est.failed && est.t_rel() >= bound - 3.0 * est.t_rel_stderr();
    bound_ok = bound_ok && this_ok;
    ests.push_back(est);
    if (!detail.empty()) detail += "; ";
    detail += "n=" + std::to_string(n) + " t_rel " + fm(est.t_rel()) +
              " >= " + fm(bound);
  }
  gate.report(6, "relaxation-lower-bound", bound_ok, detail);

  double expo = 0.0, se = 0.0;
  bool expo_ok = false;
  try {
    ScalingFit fit = scaling_fit(ests);
    expo = fit.exponent;
    se = fit.exponent_stderr;
    expo_ok = expo >= 1.4 && expo <= 2.2;
  } catch (const std::exception&) {
  }
  gate.report(7, "uniform-refresh-exponent", expo_ok,
              "exponent " + fm(expo) + " +/- " + fm(se) + " in [1.4, 2.2]");
}

// ------------------------------------------- 8: chain-walk identification

void criterion_identification(Gate& gate) {
  constexpr std::uint64_t kSeed = 707;
  constexpr std::uint64_t kEvents = 100000;
  bool ok = true;
  std::string detail;
  for (int n : {4, 16}) {
    auto table = table_for(n);
    GaussianTarget target = make_gaussian_target(table);
    RefreshKind refresh = RefreshKind::uniform(0.3);
    RngStream rng_walk(sub_seed(kSeed, n), 0);
    RngStream rng_chain(sub_seed(kSeed, n), 0);
    LiftedState ws = stationary_start(target, rng_walk);
    EcmcState cs = ecmc_stationary_start(target, 1.0, refresh, rng_chain);
    bool match = ws.position == cs.active;
    for (int i = 0; i < n && match; ++i)
      match = std::abs(ws.raw_local_time[i] - cs.positions[i]) <= 1e-12;

    SimulateOptions opt;
    opt.record_events = true;
    opt.max_events = kEvents;
    SimulateResult wr = simulate(std::move(ws), 1e12, refresh,
                                 ObserverSchedule::none(), rng_walk, opt);
    EcmcResult cr =
        ecmc_simulate(std::move(cs), harmonic_potential(), 1e12,
                      ObserverSchedule::none(), rng_chain, opt);
    match = match && wr.events.size() == kEvents && cr.events.size() == kEvents;
    double worst_dt = 0.0;
    std::uint64_t mismatches = 0;
    if (match) {
      for (std::size_t i = 0; i < kEvents; ++i) {
        if (wr.events[i].kind != cr.events[i].kind ||
            wr.events[i].new_position != cr.events[i].new_position)
          ++mismatches;
        worst_dt = std::max(
            worst_dt, std::abs(wr.events[i].time - cr.events[i].time));
      }
      match = mismatches == 0 && worst_dt <= 1e-12;
    }
    ok = ok && match;
    if (!detail.empty()) detail += "; ";
    detail += "n=" + std::to_string(n) + " worst |dt| " + fm(worst_dt) +
              ", " + std::to_string(mismatches) + " kind mismatches";
  }
  gate.report(8, "chain-walk-identification", ok,
              detail + " over " + std::to_string(kEvents) + " events");
}

// ------------------------------------------------- 9: hmc baseline

void criterion_hmc(Gate& gate) {
  constexpr std::uint64_t kSeed = 808;
  constexpr int kReplicas = 2048;
  bool rates_ok = true;
  std::vector<RelaxationEstimate> ests;
  for (int n : {8, 16, 32, 64}) {
    SamplerSpec spec = sampler_hmc_exact(n, 1.0 / n);
    RelaxationEstimate est = estimate_relaxation(
        spec, Observable::fourier_mode(1), kReplicas,
        12.0 * anticipated_t_rel(spec), sub_seed(kSeed, n));
    rates_ok = rates_ok && !est.failed;
    ests.push_back(est);
  }
  double expo = 0.0, se = 0.0;
  bool expo_ok = false;
  try {
    ScalingFit fit = scaling_fit(ests);
    expo = fit.exponent;
    se = fit.exponent_stderr;
    expo_ok = expo >= 0.75 && expo <= 1.25;
  } catch (const std::exception&) {
  }

  // Energy conservation between refreshes, both through the bare flow
  // composed over refresh-distributed durations and through the grid-step
  // trajectory path with refreshes pushed past the horizon.
  double worst_rel = 0.0;
  {
    int n = 16;
    double gamma = 1.0 / 16.0;
    auto table = table_for(n);
    GaussianTarget target = make_gaussian_target(table);
    InteractionPotential pot = harmonic_potential();
    RngStream rng(sub_seed(kSeed, 1000), 0);
    const double fractions[4] = {0.37, 0.11, 0.29, 0.23};
    for (int trial = 0; trial < 50; ++trial) {
      HmcState st = hmc_stationary_start(target, gamma, 1.0, rng);
      double e0 = hmc_energy(st, pot);
      double dur = rng.exponential(gamma);
      for (double f : fractions) hmc_exact_flow(st, f * dur);
      worst_rel = std::max(worst_rel,
                           std::abs(hmc_energy(st, pot) - e0) / std::abs(e0));
    }
    HmcState st = hmc_stationary_start(target, 1e-12, 1.0, rng);
    double e0 = hmc_energy(st, pot);
    HmcResult res = hmc_simulate(std::move(st), 100.0, FlowKind::exact(), pot,
                                 ObserverSchedule::none(), rng);
    double e1 = hmc_energy(res.final_state, pot);
    worst_rel = std::max(worst_rel, std::abs(e1 - e0) / std::abs(e0));
    rates_ok = rates_ok && res.refresh_count == 0;
  }
  bool energy_ok = worst_rel <= 1e-9;
  gate.report(9, "hmc-baseline", rates_ok && expo_ok && energy_ok,
              "exponent " + fm(expo) + " +/- " + fm(se) +
                  " in [0.75, 1.25]; worst energy drift " + fm(worst_rel));
}

// ------------------------------------------------- 10: work scaling

double metered_rate(const SamplerSpec& spec, double horizon,
                    std::uint64_t seed, std::uint64_t stream_id) {
  auto table = table_for(spec.n);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(seed, stream_id);
  if (spec.kind == SamplerSpec::Kind::Ecmc) {
    EcmcState st = ecmc_stationary_start(target, spec.beta, spec.refresh, rng);
    EcmcResult res = ecmc_simulate(std::move(st), harmonic_potential(),
                                   horizon, ObserverSchedule::none(), rng);
    return static_cast<double>(res.event_count) / horizon;
  }
  HmcState st = hmc_stationary_start(target, spec.hmc_gamma, spec.beta, rng);
  std::uint64_t w0 = st.work_counter;
  HmcResult res =
      hmc_simulate(std::move(st), horizon, FlowKind::verlet(spec.eta),
                   harmonic_potential(), ObserverSchedule::none(), rng);
  return static_cast<double>(res.final_state.work_counter - w0) / horizon;
}

void criterion_work_scaling(Gate& gate) {
  constexpr std::uint64_t kSeed = 909;
  constexpr int kReplicas = 512;
  const std::vector<int> grid = {8, 16, 32, 64};
  double slopes[2] = {0.0, 0.0};
  double ses[2] = {0.0, 0.0};
  bool cells_ok = true;
  for (int fam = 0; fam < 2; ++fam) {
    Vec xs, ys, ws;
    for (int n : grid) {
      double gamma = 1.0 / n;
      SamplerSpec spec =
          fam == 0 ? sampler_ecmc(n, RefreshKind::uniform(gamma))
                   : sampler_hmc_verlet(n, gamma, std::pow(n, -0.25));
      double horizon = 12.0 * anticipated_t_rel(spec);
      std::uint64_t seedc = sub_seed(kSeed + fam, n);
      RelaxationEstimate est =
          estimate_relaxation(spec, Observable::fourier_mode(1), kReplicas,
                              horizon, seedc);
      if (est.failed || !(est.rate > 0.0)) {
        cells_ok = false;
        continue;
      }
      double site_cost = fam == 0 ? 1.0 : static_cast<double>(n);
      double total_work =
          est.t_rel() * metered_rate(spec, horizon, seedc, kReplicas) *
          site_cost;
      double se_log = std::max(est.t_rel_stderr() / est.t_rel(), 1e-9);
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(total_work));
      ws.push_back(1.0 / (se_log * se_log));
    }
    if (xs.size() == grid.size()) {
      LinearFit fit = wls_fit(xs, ys, ws);
      slopes[fam] = fit.slope;
      ses[fam] = fit.slope_se;
    } else {
      cells_ok = false;
    }
  }
  bool ok = cells_ok && slopes[0] <= 2.2 && slopes[1] >= 1.9 &&
            slopes[0] < slopes[1];
  gate.report(10, "work-scaling", ok,
              "event-chain slope " + fm(slopes[0]) + " +/- " + fm(ses[0]) +
                  " <= 2.2, Verlet slope " + fm(slopes[1]) + " +/- " +
                  fm(ses[1]) + " >= 1.9");
}

// ------------------------------------------------- 11: event throughput

void criterion_throughput(Gate& gate) {
  constexpr std::uint64_t kSeed = 1010;
  double rates[2] = {0.0, 0.0};
  int idx = 0;
  for (int n : {16, 1024}) {
    auto table = table_for(n);
    GaussianTarget target = make_gaussian_target(table);
    RngStream rng(sub_seed(kSeed, n), 0);
    LiftedState st = stationary_start(target, rng);
    SimulateOptions opt;
    opt.max_events = 50000;
    SimulateResult warm = simulate(std::move(st), 1e15, RefreshKind::none(),
                                   ObserverSchedule::none(), rng, opt);
    st = std::move(warm.final_state);
    double best = 0.0;
    for (int window = 0; window < 3; ++window) {
      std::uint64_t events = 0;
      auto t0 = std::chrono::steady_clock::now();
      double elapsed = 0.0;
      while (elapsed < 0.3) {
        SimulateResult chunk =
            simulate(std::move(st), 1e15, RefreshKind::none(),
                     ObserverSchedule::none(), rng, opt);
        events += chunk.event_count;
        st = std::move(chunk.final_state);
        elapsed = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      }
      best = std::max(best, static_cast<double>(events) / elapsed);
    }
    rates[idx++] = best;
  }
  double ratio =
      std::max(rates[0], rates[1]) / std::min(rates[0], rates[1]);
  gate.report(11, "event-throughput", ratio < 2.0,
              "n=16 " + fm(rates[0]) + " ev/s vs n=1024 " + fm(rates[1]) +
                  " ev/s, ratio " + fm(ratio) + " < 2");
}

// ------------------------------------------------- 12: manifest replay

int run_cmd(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b,
                         std::string& why) {
  auto list = [](const fs::path& root) {
    std::vector<fs::path> rels;
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file())
        rels.push_back(fs::relative(entry.path(), root));
    std::sort(rels.begin(), rels.end());
    return rels;
  };
  std::vector<fs::path> ra = list(a);
  std::vector<fs::path> rb = list(b);
  if (ra != rb) {
    why = "file sets differ";
    return false;
  }
  for (const fs::path& rel : ra) {
    if (read_file(a / rel) != read_file(b / rel)) {
      why = rel.string() + " differs";
      return false;
    }
  }
  return true;
}

void criterion_replay(Gate& gate, const std::string& cli) {
  if (cli.empty()) {
    gate.report(12, "manifest-replay", false, "no CLI binary path supplied");
    return;
  }
  fs::path work = fs::current_path() / "replay-workdir";
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);
  const std::vector<std::string> runs = {
      "sample --sampler srw-uniform --n 8 --gamma preset --horizon 200 "
      "--spacing 0.5 --events --seed 11",
      "relax-scan --sampler ou --n-grid 8,12,16,24 --replicas 64 --workers 2 "
      "--seed 11",
      "compare --n-grid 6,8,12,16 --replicas 96 --seed 11",
      "verify-lift --n-grid 3,4 --budget 20000 --seed 11",
      "verify-invariant --n-grid 4 --budget 20000 --covariance-horizon 20000 "
      "--seed 11"};
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size() && ok; ++i) {
    std::string tag = "c" + std::to_string(i + 1);
    fs::path out = work / tag;
    fs::path rep = work / (tag + "-replay");
    fs::path log = work / (tag + ".log");
    int rc = run_cmd("\"" + cli + "\" " + runs[i] + " --out \"" +
                     out.string() + "\" > \"" + log.string() + "\" 2>&1");
    if (rc != 0) {
      ok = false;
      detail = "command " + std::to_string(i + 1) + " exited " +
               std::to_string(rc);
      break;
    }
    rc = run_cmd("\"" + cli + "\" replay \"" +
                 (out / "manifest.json").string() + "\" --out \"" +
                 rep.string() + "\" >> \"" + log.string() + "\" 2>&1");
    if (rc != 0) {
      ok = false;
      detail = "replay " + std::to_string(i + 1) + " exited " +
               std::to_string(rc);
      break;
    }
    std::string why;
    if (!dirs_byte_identical(out, rep, why)) {
      ok = false;
      detail = "command " + std::to_string(i + 1) + ": " + why;
    }
  }
  if (ok)
    detail = std::to_string(runs.size()) +
             " commands re-ran byte-identically from their manifests";
  gate.report(12, "manifest-replay", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  Gate gate;
  criterion_covariance(gate);
  criterion_event_law(gate);
  criterion_lift(gate);
  criterion_adjoints(gate);
  criterion_collapse(gate);
  criterion_srw_scaling(gate);
  criterion_identification(gate);
  criterion_hmc(gate);
  criterion_work_scaling(gate);
  criterion_throughput(gate);
  criterion_replay(gate, cli);
  std::printf("%d/12 criteria passed\n", 12 - gate.failures);
  return gate.failures;
}
