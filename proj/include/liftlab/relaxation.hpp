#pragma once

// Relaxation-time estimation across samplers, scaling-exponent fits over
// n-grids, the closed-form lower bound, and the refresh-rate presets. All
// estimates carry standard errors and fit-window metadata; failures are
// reported as flagged estimates with diagnostics, never silent numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "liftlab/ecmc.hpp"
#include "liftlab/gaussian.hpp"
#include "liftlab/hmc.hpp"
#include "liftlab/io.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/parallel.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/spectral.hpp"
#include "liftlab/srw.hpp"
#include "liftlab/stats.hpp"

namespace liftlab {

enum class EstimationMethod { EnsembleDecay, StationaryAutocorr };

inline const char* method_name(EstimationMethod m) {
  return m == EstimationMethod::EnsembleDecay ? "EnsembleDecay"
                                              : "StationaryAutocorr";
}

struct SamplerSpec {
  enum class Kind { Srw, Ou, Ecmc, HmcExact, HmcVerlet };

  Kind kind = Kind::Srw;
  int n = 8;
  RefreshKind refresh;   // walk and chain refresh process
  double hmc_gamma = 0;  // velocity refresh rate
  OuSpeed ou_speed = OuSpeed::Slowed;
  double beta = 1.0;
  double eta = 0.0;  // Verlet step size
  std::string potential_tag = "harmonic";

  std::string tag() const {
    switch (kind) {
      case Kind::Srw:
        switch (refresh.variant) {
          case RefreshKind::Variant::None:
            return "srw";
          case RefreshKind::Variant::Uniform:
            return "srw-uniform";
          case RefreshKind::Variant::NeighborWalk:
            return "srw-neighbor";
        }
        return "srw";
      case Kind::Ou:
        return ou_speed == OuSpeed::Slowed ? "ou-slowed" : "ou-unit";
      case Kind::Ecmc:
        switch (refresh.variant) {
          case RefreshKind::Variant::None:
            return "ecmc";
          case RefreshKind::Variant::Uniform:
            return "ecmc-uniform";
          case RefreshKind::Variant::NeighborWalk:
            return "ecmc-neighbor";
        }
        return "ecmc";
      case Kind::HmcExact:
        return "hmc-exact";
      case Kind::HmcVerlet:
        return "hmc-verlet";
    }
    return "unknown";
  }

  double gamma_value() const {
    if (kind == Kind::HmcExact || kind == Kind::HmcVerlet) return hmc_gamma;
    if (kind == Kind::Ou) return 0.0;
    return refresh.active() ? refresh.gamma : 0.0;
  }

  bool reversible() const { return kind == Kind::Ou; }
};

inline SamplerSpec sampler_srw(int n, RefreshKind refresh = RefreshKind::none()) {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::Srw;
  s.n = n;
  s.refresh = refresh;
  return s;
}

inline SamplerSpec sampler_ou(int n, OuSpeed speed = OuSpeed::Slowed) {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::Ou;
  s.n = n;
  s.ou_speed = speed;
  return s;
}

inline SamplerSpec sampler_ecmc(int n, RefreshKind refresh,
                                std::string potential_tag = "harmonic",
                                double beta = 1.0) {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::Ecmc;
  s.n = n;
  s.refresh = refresh;
  s.potential_tag = std::move(potential_tag);
  s.beta = beta;
  return s;
}

inline SamplerSpec sampler_hmc_exact(int n, double gamma, double beta = 1.0) {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::HmcExact;
  s.n = n;
  s.hmc_gamma = gamma;
  s.beta = beta;
  return s;
}

inline SamplerSpec sampler_hmc_verlet(int n, double gamma, double eta,
                                      std::string potential_tag = "harmonic",
                                      double beta = 1.0) {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::HmcVerlet;
  s.n = n;
  s.hmc_gamma = gamma;
  s.eta = eta;
  s.potential_tag = std::move(potential_tag);
  s.beta = beta;
  return s;
}

// Refresh-rate presets behind the two tuned regimes: c/n for Uniform,
// c/n^{3/2} for NeighborWalk.
inline double gamma_preset(int n, const RefreshKind& variant, double c = 1.0) {
  if (!variant.active())
    throw std::domain_error("gamma_preset: refresh variant required");
  if (n < 3) throw std::domain_error("gamma_preset: n too small");
  if (c <= 0.0) throw std::domain_error("gamma_preset: prefactor must be positive");
  double nn = static_cast<double>(n);
  return variant.variant == RefreshKind::Variant::Uniform ? c / nn
                                                          : c / std::pow(nn, 1.5);
}

// Closed-form relaxation lower bound (1 - e^{-1}) / (2 pi) * n^{3/2}.
inline double lower_bound_value(int n) {
  if (n < 3) throw std::domain_error("lower_bound_value: n too small");
  return (1.0 - std::exp(-1.0)) / (2.0 * std::numbers::pi) *
         std::pow(static_cast<double>(n), 1.5);
}

// General form: any lifting of a collapse with relaxation time t pays at
// least ((1 - e^{-1}) / sqrt(2)) sqrt(t).
inline double lower_bound_general(double collapse_t_rel) {
  if (collapse_t_rel <= 0.0)
    throw std::domain_error("lower_bound_general: need positive relaxation time");
  return (1.0 - std::exp(-1.0)) / std::sqrt(2.0) * std::sqrt(collapse_t_rel);
}

// Coarse horizon guidance from the scaling theory; estimation refuses runs
// shorter than ten anticipated relaxation times.
inline double anticipated_t_rel(const SamplerSpec& spec) {
  double n = static_cast<double>(spec.n);
  switch (spec.kind) {
    case SamplerSpec::Kind::Ou:
      return spec.ou_speed == OuSpeed::Slowed
                 ? 1.0 / collapse_gap(CircleLattice(spec.n))
                 : 1.0 / (1.0 - std::cos(2.0 * std::numbers::pi / n));
    case SamplerSpec::Kind::Srw:
    case SamplerSpec::Kind::Ecmc: {
      double gamma = spec.refresh.active() ? spec.refresh.gamma : 0.0;
      if (gamma <= 0.0) return 0.25 * n * n;
      if (spec.refresh.variant == RefreshKind::Variant::NeighborWalk)
        return 0.25 * std::pow(n, 2.5) * std::min(1.0, gamma * std::pow(n, 1.5)) +
               1.0 / gamma;
      return 0.25 * n * n + 1.0 / gamma + 0.1 * n * n * n * gamma;
    }
    case SamplerSpec::Kind::HmcExact:
    case SamplerSpec::Kind::HmcVerlet:
      if (spec.hmc_gamma <= 0.0)
        throw std::domain_error("anticipated_t_rel: refresh rate must be positive");
      return 2.0 / spec.hmc_gamma;
  }
  return 0.0;
}

struct RelaxationEstimate {
  double rate = 0.0;
  double rate_stderr = 0.0;
  double lag_lo = 0.0;
  double lag_hi = 0.0;
  EstimationMethod method = EstimationMethod::EnsembleDecay;
  int n = 0;
  double gamma = 0.0;
  std::string sampler;
  std::string observable;
  int replicas = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double work_rate = 0.0;  // events (walk/chain) or gradient evals (Verlet) per unit time
  bool failed = false;
  std::string diagnostics;

  double t_rel() const { return 1.0 / rate; }
  double t_rel_stderr() const { return rate_stderr / (rate * rate); }
};

struct EstimationOptions {
  EstimationMethod method = EstimationMethod::EnsembleDecay;
  int grid_points = 0;  // 0: 1024 for EnsembleDecay, 32768 for StationaryAutocorr
  int batches = 16;
  int workers = 1;
};

namespace detail {

struct ReplicaSeries {
  Vec values;
  double work = 0.0;
};

struct SamplerContext {
  SamplerSpec spec;
  std::shared_ptr<const SpectralTable> table;
  GaussianTarget target;
  BoundObservableSet obs;
  InteractionPotential potential;  // ecmc / hmc-verlet
  double burn_in = 0.0;
};

inline InteractionPotential potential_from_tag(const std::string& tag) {
  if (tag == "harmonic") return harmonic_potential();
  if (tag == "quartic") return quartic_potential();
  throw std::invalid_argument("unknown interaction potential: " + tag);
}

inline SamplerContext make_context(const SamplerSpec& spec,
                                   const Observable& observable,
                                   double horizon) {
  auto table = std::make_shared<const SpectralTable>(
      build_spectral_table(CircleLattice(spec.n)));
  SamplerContext ctx{spec,
                     table,
                     make_gaussian_target(table),
                     bind_observables(table, {observable}),
                     harmonic_potential(),
                     0.0};
  bool needs_potential = spec.kind == SamplerSpec::Kind::Ecmc ||
                         spec.kind == SamplerSpec::Kind::HmcVerlet;
  if (needs_potential) {
    ctx.potential = potential_from_tag(spec.potential_tag);
    // Exact stationary starts exist only for the harmonic chain; other
    // potentials burn in for a quarter horizon first.
    if (!ctx.potential.harmonic) ctx.burn_in = 0.25 * horizon;
  }
  return ctx;
}

inline ReplicaSeries run_replica(const SamplerContext& ctx, double horizon,
                                 int grid_points, RngStream& rng) {
  const SamplerSpec& spec = ctx.spec;
  double h = horizon / grid_points;
  ReplicaSeries out;
  switch (spec.kind) {
    case SamplerSpec::Kind::Ou: {
      Vec z = sample_mu_modes(ctx.target, rng);
      OuSchedule schedule{spec.ou_speed};
      OuGridStep step = make_ou_grid_step(ctx.target, schedule, h);
      out.values.reserve(grid_points + 1);
      out.values.push_back(ctx.obs.eval_modes(0, z));
      for (int j = 0; j < grid_points; ++j) {
        step.apply(z, rng);
        out.values.push_back(ctx.obs.eval_modes(0, z));
      }
      return out;
    }
    case SamplerSpec::Kind::Srw: {
      LiftedState state = stationary_start(ctx.target, rng);
      ObserverSchedule observer{h, ctx.obs};
      SimulateResult res =
          simulate(std::move(state), h * grid_points, spec.refresh, observer, rng);
      out.values = std::move(res.series.obs[0]);
      out.work = static_cast<double>(res.event_count);
      return out;
    }
    case SamplerSpec::Kind::Ecmc: {
      EcmcState state =
          ecmc_stationary_start(ctx.target, spec.beta, spec.refresh, rng);
      if (ctx.burn_in > 0.0) {
        EcmcResult burn = ecmc_simulate(std::move(state), ctx.potential,
                                        ctx.burn_in, ObserverSchedule::none(), rng);
        state = std::move(burn.final_state);
      }
      ObserverSchedule observer{h, ctx.obs};
      EcmcResult res = ecmc_simulate(std::move(state), ctx.potential,
                                     h * grid_points, observer, rng);
      out.values = std::move(res.series.obs[0]);
      out.work = static_cast<double>(res.event_count);
      return out;
    }
    case SamplerSpec::Kind::HmcExact:
    case SamplerSpec::Kind::HmcVerlet: {
      FlowKind flow = spec.kind == SamplerSpec::Kind::HmcExact
                          ? FlowKind::exact()
                          : FlowKind::verlet(spec.eta);
      HmcState state =
          hmc_stationary_start(ctx.target, spec.hmc_gamma, spec.beta, rng);
      if (ctx.burn_in > 0.0) {
        HmcResult burn = hmc_simulate(std::move(state), ctx.burn_in, flow,
                                      ctx.potential, ObserverSchedule::none(), rng);
        state = std::move(burn.final_state);
        // Burn-in leaves the field roughly stationary for the actual
        // potential; velocities refresh exactly regardless.
      }
      std::uint64_t work_before = state.work_counter;
      ObserverSchedule observer{h, ctx.obs};
      HmcResult res = hmc_simulate(std::move(state), h * grid_points, flow,
                                   ctx.potential, observer, rng);
      out.values = std::move(res.series.obs[0]);
      out.work = static_cast<double>(res.final_state.work_counter - work_before);
      return out;
    }
  }
  throw std::logic_error("run_replica: unknown sampler kind");
}

}  // namespace detail

struct CorrelationCurve {
  Vec times;
  Vec rho;
  Vec se;
};

// Least-squares rate from the log correlation magnitude on the window
// where |rho| lies in [0.1, 0.8]. Non-reversible dynamics whose correlation
// rebounds after first crossing 0.1 are oscillatory; those fit the decay of
// the peaks instead (the samples that dominate the whole remaining tail).
inline RelaxationEstimate fit_correlation_decay(const CorrelationCurve& curve,
                                                bool oscillation_aware) {
  RelaxationEstimate est;
  const Vec& rho = curve.rho;
  std::size_t m = rho.size();
  std::size_t j_start = m;
  for (std::size_t j = 1; j < m; ++j) {
    if (std::abs(rho[j]) <= 0.8) {
      j_start = j;
      break;
    }
  }
  if (j_start == m) {
    est.failed = true;
    est.diagnostics = "correlation never drops to 0.8 within the horizon";
    return est;
  }
  std::size_t j_end = m;
  for (std::size_t j = j_start; j < m; ++j) {
    if (std::abs(rho[j]) < 0.1) {
      j_end = j;
      break;
    }
  }

  std::vector<std::size_t> picked;
  if (oscillation_aware && j_end < m) {
    // An oscillatory curve rebounds past 0.2 after first dipping below 0.1.
    // Fit the peak tops that dominate everything after them (running max
    // from the right, intersected with local maxima), scanning only up to
    // the last rebound so trough and far-tail noise never enter the window.
    std::size_t j_tail = 0;
    for (std::size_t j = m; j-- > 0;) {
      if (std::abs(rho[j]) >= 0.2) {
        j_tail = j;
        break;
      }
    }
    if (j_tail > j_end) {
      double best = 0.0;
      std::vector<std::size_t> tops;
      for (std::size_t j = j_tail + 1; j-- > 1;) {
        double r = std::abs(rho[j]);
        if (r <= best) continue;
        best = r;
        if (j + 1 < m && r >= std::abs(rho[j - 1]) && r > std::abs(rho[j + 1]) &&
            r >= 0.1 && r <= 0.8)
          tops.push_back(j);
      }
      picked.assign(tops.rbegin(), tops.rend());
      if (picked.size() < 4) picked.clear();  // fall back to the plain window
    }
  }
  if (picked.empty())
    for (std::size_t j = j_start; j < j_end; ++j) picked.push_back(j);

  Vec xs, ys, ws;
  for (std::size_t j : picked) {
    double r = std::abs(rho[j]);
    if (r <= 0.0) continue;
    double se = std::max(curve.se.empty() ? 0.0 : curve.se[j], 1e-9);
    xs.push_back(curve.times[j]);
    ys.push_back(std::log(r));
    double se_log = se / r;
    ws.push_back(1.0 / (se_log * se_log));
  }
  if (xs.size() < 4) {
    est.failed = true;
    est.diagnostics =
        "fit window too small: " + std::to_string(xs.size()) +
        " usable points with |rho| in [0.1, 0.8]";
    return est;
  }
  LinearFit fit = wls_fit(xs, ys, ws);
  if (!(fit.slope < 0.0)) {
    est.failed = true;
    est.diagnostics = "no decay detected on the fit window";
    return est;
  }
  est.rate = -fit.slope;
  est.rate_stderr = fit.slope_se;
  est.lag_lo = xs.front();
  est.lag_hi = xs.back();
  return est;
}

// Stationary-path estimator on a raw, analytically centered series.
inline RelaxationEstimate estimate_from_series(std::span<const double> series,
                                               double spacing, int batches = 16,
                                               bool oscillation_aware = false) {
  if (series.size() < 64)
    throw std::invalid_argument("estimate_from_series: series too short");
  if (spacing <= 0.0)
    throw std::invalid_argument("estimate_from_series: spacing must be positive");
  std::size_t n = series.size();
  std::size_t max_lag = n / 8;
  std::vector<double> c = autocovariance_fft(series, max_lag);
  if (c.empty() || c[0] <= 0.0)
    throw std::invalid_argument("estimate_from_series: degenerate series");
  CorrelationCurve curve;
  curve.times.resize(max_lag);
  curve.rho.resize(max_lag);
  curve.se.assign(max_lag, 0.0);
  for (std::size_t k = 0; k < max_lag; ++k) {
    curve.times[k] = spacing * static_cast<double>(k);
    curve.rho[k] = c[k] / c[0];
  }
  // Batch-means error bars: independent autocorrelation estimates from
  // contiguous segments.
  std::size_t per = n / static_cast<std::size_t>(batches);
  if (per > 2 * max_lag) {
    std::vector<std::vector<double>> batch_rho(batches);
    for (int b = 0; b < batches; ++b) {
      std::span<const double> seg(series.data() + static_cast<std::size_t>(b) * per, per);
      std::vector<double> cb = autocovariance_fft(seg, max_lag);
      batch_rho[b].resize(max_lag, 0.0);
      for (std::size_t k = 0; k < max_lag && cb[0] > 0.0; ++k)
        batch_rho[b][k] = cb[k] / cb[0];
    }
    for (std::size_t k = 0; k < max_lag; ++k) {
      double mean = 0.0;
      for (int b = 0; b < batches; ++b) mean += batch_rho[b][k];
      mean /= batches;
      double var = 0.0;
      for (int b = 0; b < batches; ++b) {
        double d = batch_rho[b][k] - mean;
        var += d * d;
      }
      var /= (batches - 1.0) * batches;
      curve.se[k] = std::sqrt(var);
    }
  }
  RelaxationEstimate est = fit_correlation_decay(curve, oscillation_aware);
  est.method = EstimationMethod::StationaryAutocorr;
  return est;
}

// Full pipeline: run the sampler, form the correlation curve, fit the rate.
inline RelaxationEstimate estimate_relaxation(const SamplerSpec& spec,
                                              const Observable& observable,
                                              int replicas, double horizon,
                                              std::uint64_t seed,
                                              const EstimationOptions& options = {}) {
  RelaxationEstimate est;
  est.method = options.method;
  est.n = spec.n;
  est.gamma = spec.gamma_value();
  est.sampler = spec.tag();
  est.observable = observable.name;
  est.replicas = replicas;
  est.horizon = horizon;
  est.seed = seed;

  if (horizon <= 0.0) throw std::domain_error("estimate_relaxation: horizon must be positive");
  double anticipated = anticipated_t_rel(spec);
  if (anticipated > 0.0 && horizon < 10.0 * anticipated) {
    est.failed = true;
    est.diagnostics = "horizon " + format_double(horizon) +
                      " below 10x anticipated relaxation time " +
                      format_double(anticipated);
    return est;
  }

  bool ensemble = options.method == EstimationMethod::EnsembleDecay;
  int grid_points = options.grid_points > 0 ? options.grid_points
                                            : (ensemble ? 1024 : 32768);
  double h = horizon / grid_points;
  double effective_horizon = h * grid_points;

  detail::SamplerContext ctx = detail::make_context(spec, observable, effective_horizon);

  if (ensemble) {
    if (replicas < 32)
      throw std::invalid_argument("estimate_relaxation: EnsembleDecay needs >= 32 replicas");
    std::vector<detail::ReplicaSeries> series(replicas);
    parallel_for(replicas, options.workers, [&](std::uint64_t r) {
      RngStream stream(seed, r);
      series[r] = detail::run_replica(ctx, effective_horizon, grid_points, stream);
    });

    int batches = std::min(options.batches, replicas / 2);
    batches = std::max(batches, 2);
    std::size_t cols = static_cast<std::size_t>(grid_points) + 1;
    Vec num(cols, 0.0);
    std::vector<Vec> bnum(batches, Vec(cols, 0.0));
    Vec den_all(1, 0.0);
    Vec bden(batches, 0.0);
    double work_sum = 0.0;
    std::uint64_t per_batch = (static_cast<std::uint64_t>(replicas) + batches - 1) / batches;
    for (int r = 0; r < replicas; ++r) {
      const Vec& f = series[r].values;
      if (f.size() != cols)
        throw std::logic_error("estimate_relaxation: replica series length mismatch");
      int b = static_cast<int>(static_cast<std::uint64_t>(r) / per_batch);
      double f0 = f[0];
      for (std::size_t j = 0; j < cols; ++j) {
        num[j] += f0 * f[j];
        bnum[b][j] += f0 * f[j];
      }
      den_all[0] += f0 * f0;
      bden[b] += f0 * f0;
      work_sum += series[r].work;
    }
    if (den_all[0] <= 0.0) {
      est.failed = true;
      est.diagnostics = "degenerate ensemble: zero initial variance";
      return est;
    }
    CorrelationCurve curve;
    curve.times.resize(cols);
    curve.rho.resize(cols);
    curve.se.assign(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
      curve.times[j] = h * static_cast<double>(j);
      curve.rho[j] = num[j] / den_all[0];
    }
    for (std::size_t j = 0; j < cols; ++j) {
      double mean = 0.0;
      int used = 0;
      std::vector<double> vals;
      vals.reserve(batches);
      for (int b = 0; b < batches; ++b) {
        if (bden[b] <= 0.0) continue;
        vals.push_back(bnum[b][j] / bden[b]);
        mean += vals.back();
        ++used;
      }
      if (used >= 2) {
        mean /= used;
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= (used - 1.0) * used;
        curve.se[j] = std::sqrt(var);
      }
    }
    RelaxationEstimate fitted = fit_correlation_decay(curve, !spec.reversible());
    est.rate = fitted.rate;
    est.rate_stderr = fitted.rate_stderr;
    est.lag_lo = fitted.lag_lo;
    est.lag_hi = fitted.lag_hi;
    est.failed = fitted.failed;
    est.diagnostics = fitted.diagnostics;
    est.work_rate = work_sum / (static_cast<double>(replicas) * effective_horizon);
    return est;
  }

  // StationaryAutocorr: one long path per replica stream 0.
  RngStream stream(seed, 0);
  detail::ReplicaSeries path =
      detail::run_replica(ctx, effective_horizon, grid_points, stream);
  RelaxationEstimate fitted;
  try {
    fitted = estimate_from_series(path.values, h, options.batches, !spec.reversible());
  } catch (const std::invalid_argument& e) {
    est.failed = true;
    est.diagnostics = e.what();
    return est;
  }
  est.rate = fitted.rate;
  est.rate_stderr = fitted.rate_stderr;
  est.lag_lo = fitted.lag_lo;
  est.lag_hi = fitted.lag_hi;
  est.failed = fitted.failed;
  est.diagnostics = fitted.diagnostics;
  est.work_rate = path.work / effective_horizon;
  return est;
}

struct ScalingFit {
  double exponent = 0.0;
  double exponent_stderr = 0.0;
  int points = 0;
};

// Weighted log-log slope of t_rel against n.
inline ScalingFit scaling_fit(std::span<const RelaxationEstimate> estimates) {
  Vec xs, ys, ws;
  std::vector<int> seen;
  for (const RelaxationEstimate& e : estimates) {
    if (e.failed || !(e.rate > 0.0) || !std::isfinite(e.rate_stderr)) continue;
    if (std::find(seen.begin(), seen.end(), e.n) != seen.end()) continue;
    seen.push_back(e.n);
    xs.push_back(std::log(static_cast<double>(e.n)));
    ys.push_back(-std::log(e.rate));
    double se_log = std::max(e.rate_stderr / e.rate, 1e-9);
    ws.push_back(1.0 / (se_log * se_log));
  }
  if (xs.size() < 4)
    throw std::domain_error("scaling_fit: need at least 4 distinct usable n values");
  LinearFit fit = wls_fit(xs, ys, ws);
  return ScalingFit{fit.slope, fit.slope_se, fit.points};
}

}  // namespace liftlab
