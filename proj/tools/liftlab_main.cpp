// Command-line front end: trajectory sampling, relaxation scans, complexity
// comparisons, identity verification, and manifest replay. Exit codes:
// 0 success, 2 config error, 3 estimation failure, 4 verification failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liftlab/liftlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* tool_version = "0.1.0";

using liftlab::ConfigEntry;
using liftlab::ConfigError;
using liftlab::ConfigMap;
using liftlab::entry_where;
using liftlab::join_ints;
using liftlab::parse_bool;
using liftlab::parse_config_text;
using liftlab::parse_int64;
using liftlab::parse_int_list;
using liftlab::parse_real;
using liftlab::parse_uint64;
using liftlab::split_list;
using liftlab::trim_ws;

// -------------------------------------------------------------- settings

struct RunSettings {
  std::string sampler;
  std::vector<int> n_grid;
  std::string gamma;       // "", "preset", or a number
  double horizon = 0.0;    // 0 = derive from the anticipated relaxation time
  int replicas = 64;
  std::uint64_t seed = 1;
  std::string out = "liftlab-out";
  int workers = 0;         // 0 = LIFTLAB_WORKERS, then hardware parallelism
  std::string observables; // sample / relax-scan; "" = per-command default
  double spacing = 0.0;    // sample emission spacing; 0 = horizon / 512
  bool events = false;     // sample: also write the binary event log
  std::string method = "ensemble";  // ensemble | autocorr
  int grid_points = 0;
  int batches = 16;
  std::string potential = "harmonic";
  double beta = 1.0;
  double eta = 0.0;        // 0 = n^{-1/4}
  std::uint64_t budget = 100000;
  bool corrupt_rates = false;
  double covariance_horizon = 0.0;
};

// Full echo of every reproducibility-relevant field; the output directory is
// deliberately not part of it.
ConfigMap settings_to_config(const RunSettings& s) {
  ConfigMap cfg;
  auto put = [&cfg](const char* sec, const char* key, std::string v) {
    cfg[sec][key] = ConfigEntry{std::move(v), 0};
  };
  put("estimation", "batches", std::to_string(s.batches));
  put("estimation", "grid-points", std::to_string(s.grid_points));
  put("estimation", "method", s.method);
  put("model", "beta", liftlab::format_double(s.beta));
  put("model", "eta", liftlab::format_double(s.eta));
  put("model", "potential", s.potential);
  put("run", "events", s.events ? "true" : "false");
  put("run", "gamma", s.gamma);
  put("run", "horizon", liftlab::format_double(s.horizon));
  put("run", "n-grid", join_ints(s.n_grid));
  put("run", "observables", s.observables);
  put("run", "replicas", std::to_string(s.replicas));
  put("run", "sampler", s.sampler);
  put("run", "seed", std::to_string(s.seed));
  put("run", "spacing", liftlab::format_double(s.spacing));
  put("run", "workers", std::to_string(s.workers));
  put("verify", "budget", std::to_string(s.budget));
  put("verify", "corrupt-rates", s.corrupt_rates ? "true" : "false");
  put("verify", "covariance-horizon", liftlab::format_double(s.covariance_horizon));
  return cfg;
}

void apply_config(RunSettings& s, const ConfigMap& cfg, const std::string& origin) {
  for (const auto& [section, entries] : cfg) {
    for (const auto& [key, entry] : entries) {
      const std::string& v = entry.value;
      std::string where = entry_where(origin, entry, section, key);
      std::string full = section + "." + key;
      if (full == "run.sampler") s.sampler = v;
      else if (full == "run.n") s.n_grid = {static_cast<int>(parse_int64(v, where))};
      else if (full == "run.n-grid") s.n_grid = parse_int_list(v, where);
      else if (full == "run.gamma") s.gamma = v;
      else if (full == "run.horizon") s.horizon = parse_real(v, where);
      else if (full == "run.replicas") s.replicas = static_cast<int>(parse_int64(v, where));
      else if (full == "run.seed") s.seed = parse_uint64(v, where);
      else if (full == "run.out") s.out = v;
      else if (full == "run.workers") s.workers = static_cast<int>(parse_int64(v, where));
      else if (full == "run.observables") s.observables = v;
      else if (full == "run.spacing") s.spacing = parse_real(v, where);
      else if (full == "run.events") s.events = parse_bool(v, where);
      else if (full == "estimation.method") s.method = v;
      else if (full == "estimation.grid-points") s.grid_points = static_cast<int>(parse_int64(v, where));
      else if (full == "estimation.batches") s.batches = static_cast<int>(parse_int64(v, where));
      else if (full == "model.potential") s.potential = v;
      else if (full == "model.beta") s.beta = parse_real(v, where);
      else if (full == "model.eta") s.eta = parse_real(v, where);
      else if (full == "verify.budget") s.budget = parse_uint64(v, where);
      else if (full == "verify.corrupt-rates") s.corrupt_rates = parse_bool(v, where);
      else if (full == "verify.covariance-horizon") s.covariance_horizon = parse_real(v, where);
      else throw ConfigError(where + ": unknown configuration key");
    }
  }
}

// ----------------------------------------------------- sampler resolution

double resolve_gamma(const RunSettings& s, int n) {
  const std::string& kind = s.sampler;
  bool preset = s.gamma.empty() || s.gamma == "preset";
  auto numeric = [&]() { return parse_real(s.gamma, "--gamma"); };
  if (kind == "srw" || kind == "ou") {
    if (!preset && numeric() != 0.0)
      throw ConfigError(kind + " has no refresh process; --gamma must be 0 or omitted");
    return 0.0;
  }
  if (kind == "srw-uniform" || kind == "srw-neighbor") {
    if (preset) {
      auto variant = kind == "srw-uniform" ? liftlab::RefreshKind::uniform(1.0)
                                           : liftlab::RefreshKind::neighbor_walk(1.0);
      return liftlab::gamma_preset(n, variant);
    }
    double g = numeric();
    if (g <= 0.0) throw ConfigError(kind + ": --gamma must be positive");
    return g;
  }
  if (kind == "ecmc") {
    if (s.gamma.empty()) return 0.0;  // pure chain, no refresh
    if (s.gamma == "preset") return 1.0 / n;
    double g = numeric();
    if (g < 0.0) throw ConfigError("ecmc: --gamma must be non-negative");
    return g;
  }
  if (kind == "hmc-exact" || kind == "hmc-verlet") {
    if (preset) return 1.0 / n;
    double g = numeric();
    if (g <= 0.0) throw ConfigError(kind + ": --gamma must be positive");
    return g;
  }
  throw ConfigError("unknown sampler '" + kind +
                    "' (expected srw, srw-uniform, srw-neighbor, ou, ecmc, "
                    "hmc-exact, or hmc-verlet)");
}

double resolve_eta(const RunSettings& s, int n) {
  if (s.eta < 0.0) throw ConfigError("--eta must be positive");
  return s.eta > 0.0 ? s.eta : std::pow(static_cast<double>(n), -0.25);
}

liftlab::SamplerSpec make_spec(const RunSettings& s, int n) {
  double g = resolve_gamma(s, n);
  const std::string& kind = s.sampler;
  if (kind == "srw") return liftlab::sampler_srw(n);
  if (kind == "srw-uniform")
    return liftlab::sampler_srw(n, liftlab::RefreshKind::uniform(g));
  if (kind == "srw-neighbor")
    return liftlab::sampler_srw(n, liftlab::RefreshKind::neighbor_walk(g));
  if (kind == "ou") return liftlab::sampler_ou(n);
  if (kind == "ecmc")
    return liftlab::sampler_ecmc(n,
                                 g > 0.0 ? liftlab::RefreshKind::uniform(g)
                                         : liftlab::RefreshKind::none(),
                                 s.potential, s.beta);
  if (kind == "hmc-exact") return liftlab::sampler_hmc_exact(n, g, s.beta);
  if (kind == "hmc-verlet")
    return liftlab::sampler_hmc_verlet(n, g, resolve_eta(s, n), s.potential, s.beta);
  throw ConfigError("unknown sampler '" + kind + "'");
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& tag, int n,
                        double gamma) {
  std::uint64_t h = liftlab::fnv1a64_u64(master);
  h = liftlab::fnv1a64(tag, h);
  h = liftlab::fnv1a64_u64(static_cast<std::uint64_t>(n), h);
  std::uint64_t bits = 0;
  std::memcpy(&bits, &gamma, sizeof bits);
  return liftlab::fnv1a64_u64(bits, h);
}

int resolve_workers(const RunSettings& s) {
  if (s.workers < 0) throw ConfigError("--workers must be non-negative");
  if (s.workers > 0) return s.workers;
  if (const char* env = std::getenv("LIFTLAB_WORKERS")) {
    std::string text = trim_ws(env);
    if (!text.empty()) {
      long long v = parse_int64(text, "LIFTLAB_WORKERS");
      if (v <= 0) throw ConfigError("LIFTLAB_WORKERS must be positive");
      return static_cast<int>(v);
    }
  }
  return liftlab::hardware_workers();
}

std::vector<int> sorted_grid(std::vector<int> grid) {
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (int n : grid)
    if (n < 3) throw ConfigError("lattice size must be at least 3, got " + std::to_string(n));
  return grid;
}

// -------------------------------------------------------------- manifest

std::string timestamp_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

json config_to_json(const ConfigMap& cfg) {
  json j = json::object();
  for (const auto& [section, entries] : cfg) {
    json o = json::object();
    for (const auto& [key, entry] : entries) o[key] = entry.value;
    j[section] = o;
  }
  return j;
}

ConfigMap config_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw ConfigError(origin + ": config echo must be an object");
  ConfigMap cfg;
  for (const auto& [section, entries] : j.items()) {
    if (!entries.is_object())
      throw ConfigError(origin + ": config section " + section + " must be an object");
    for (const auto& [key, value] : entries.items()) {
      if (!value.is_string())
        throw ConfigError(origin + ": config value " + section + "." + key +
                          " must be a string");
      cfg[section][key] = ConfigEntry{value.get<std::string>(), 0};
    }
  }
  return cfg;
}

struct CellRecord {
  std::string sampler;
  int n = 0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

// Collects output files (written atomically, digested on the way out) and
// emits the reproducibility manifest.
struct ManifestWriter {
  std::string command;
  const RunSettings* settings = nullptr;
  std::string started = timestamp_utc();
  std::vector<CellRecord> cells;
  std::map<std::string, std::string> outputs;

  ManifestWriter(std::string cmd, const RunSettings* s)
      : command(std::move(cmd)), settings(s) {}

  void add_output(const std::string& rel, const std::string& content) {
    liftlab::atomic_write_file(fs::path(settings->out) / rel, content);
    outputs[rel] = liftlab::digest_hex(liftlab::digest_bytes(content));
  }

  void write() {
    json m;
    m["schema_version"] = 1;
    m["tool_version"] = tool_version;
    m["command"] = command;
    m["config"] = config_to_json(settings_to_config(*settings));
    m["master_seed"] = settings->seed;
    m["started"] = started;
    m["finished"] = timestamp_utc();
    json cj = json::array();
    for (const CellRecord& c : cells)
      cj.push_back(json{{"sampler", c.sampler}, {"n", c.n}, {"gamma", c.gamma}, {"seed", c.seed}});
    m["cells"] = cj;
    m["outputs"] = json(outputs);
    liftlab::atomic_write_file(fs::path(settings->out) / "manifest.json",
                               m.dump(2) + "\n");
  }
};

// ------------------------------------------------------------- reporting

const std::vector<std::string> results_header = {
    "sampler", "n",      "gamma",   "observable", "method",  "rate",
    "stderr",  "lag_lo", "lag_hi",  "replicas",   "horizon", "seed"};

std::vector<std::string> estimate_row(const liftlab::RelaxationEstimate& e) {
  using liftlab::format_double;
  return {e.sampler,
          std::to_string(e.n),
          format_double(e.gamma),
          e.observable,
          e.failed ? "failed" : liftlab::method_name(e.method),
          format_double(e.rate),
          format_double(e.rate_stderr),
          format_double(e.lag_lo),
          format_double(e.lag_hi),
          std::to_string(e.replicas),
          format_double(e.horizon),
          std::to_string(e.seed)};
}

void report_estimate(const liftlab::RelaxationEstimate& e) {
  if (e.failed) {
    std::cout << e.sampler << " n=" << e.n << " gamma=" << liftlab::format_double(e.gamma)
              << " FAILED: " << e.diagnostics << "\n";
    return;
  }
  std::cout << e.sampler << " n=" << e.n << " gamma=" << liftlab::format_double(e.gamma)
            << " rate=" << liftlab::format_double(e.rate) << " +- "
            << liftlab::format_double(e.rate_stderr)
            << " t_rel=" << liftlab::format_double(e.t_rel()) << "\n";
}

// ------------------------------------------------------------ observables

std::vector<liftlab::Observable> parse_observables(const std::string& list,
                                                   const std::string& sampler,
                                                   const std::string& fallback) {
  std::string text = list.empty() ? fallback : list;
  bool has_walker = sampler.rfind("srw", 0) == 0 || sampler == "ecmc";
  std::vector<liftlab::Observable> out;
  for (const std::string& tok : split_list(text)) {
    if (tok == "potential") {
      out.push_back(liftlab::Observable::potential_observable());
    } else if (tok.rfind("mode:", 0) == 0) {
      out.push_back(liftlab::Observable::fourier_mode(
          static_cast<int>(parse_int64(tok.substr(5), "--observables"))));
    } else if (tok.rfind("posind:", 0) == 0) {
      if (!has_walker)
        throw ConfigError("observable " + tok + " needs a walker sampler, not " + sampler);
      out.push_back(liftlab::Observable::position_indicator(
          static_cast<int>(parse_int64(tok.substr(7), "--observables"))));
    } else {
      throw ConfigError("unknown observable '" + tok +
                        "' (expected mode:K, potential, or posind:J)");
    }
  }
  if (out.empty()) throw ConfigError("--observables resolved to an empty list");
  return out;
}

// ---------------------------------------------------------------- sample

int cmd_sample(RunSettings s) {
  if (s.sampler.empty()) throw ConfigError("sample: --sampler is required");
  if (s.n_grid.empty()) s.n_grid = {8};
  s.n_grid = sorted_grid(s.n_grid);
  if (s.n_grid.size() != 1)
    throw ConfigError("sample: exactly one lattice size expected");
  int n = s.n_grid[0];
  if (!(s.horizon > 0.0)) throw ConfigError("sample: --horizon must be positive");
  if (s.spacing < 0.0) throw ConfigError("sample: --spacing must be positive");

  using namespace liftlab;
  SamplerSpec spec = make_spec(s, n);
  double gamma = spec.gamma_value();
  std::uint64_t seedc = cell_seed(s.seed, spec.tag(), n, gamma);
  double spacing = s.spacing > 0.0 ? s.spacing : s.horizon / 512.0;

  bool event_driven = spec.kind == SamplerSpec::Kind::Srw ||
                      spec.kind == SamplerSpec::Kind::Ecmc;
  if (s.events && !event_driven)
    throw ConfigError("--events requires an event-driven sampler (srw*, ecmc)");

  auto table = std::make_shared<const SpectralTable>(
      build_spectral_table(CircleLattice(n)));
  GaussianTarget target = make_gaussian_target(table);
  BoundObservableSet obs =
      bind_observables(table, parse_observables(s.observables, spec.tag(),
                                                "mode:1,mode:2,potential"));
  ObserverSchedule observer{spacing, obs};
  RngStream rng(seedc, 0);

  TrajectorySeries series;
  std::vector<EventRecord> events;
  SimulateOptions opts;
  opts.record_events = s.events;

  switch (spec.kind) {
    case SamplerSpec::Kind::Srw: {
      SimulateResult res = simulate(stationary_start(target, rng), s.horizon,
                                    spec.refresh, observer, rng, opts);
      series = std::move(res.series);
      events = std::move(res.events);
      break;
    }
    case SamplerSpec::Kind::Ou: {
      Vec z = sample_mu_modes(target, rng);
      OuGridStep step = make_ou_grid_step(target, OuSchedule{spec.ou_speed}, spacing);
      int steps = static_cast<int>(std::floor(s.horizon / spacing + 1e-9));
      series.obs_names = obs.names();
      series.obs.resize(obs.size());
      auto emit = [&](double t) {
        series.times.push_back(t);
        series.positions.push_back(-1);
        for (int j = 0; j < obs.size(); ++j)
          series.obs[j].push_back(obs.eval_modes(j, z));
      };
      emit(0.0);
      for (int i = 1; i <= steps; ++i) {
        step.apply(z, rng);
        emit(i * spacing);
      }
      break;
    }
    case SamplerSpec::Kind::Ecmc: {
      InteractionPotential pot = detail::potential_from_tag(s.potential);
      EcmcState state = ecmc_stationary_start(target, spec.beta, spec.refresh, rng);
      if (!pot.harmonic) {
        EcmcResult burn = ecmc_simulate(std::move(state), pot, 0.25 * s.horizon,
                                        ObserverSchedule::none(), rng);
        state = std::move(burn.final_state);
      }
      EcmcResult res =
          ecmc_simulate(std::move(state), pot, s.horizon, observer, rng, opts);
      series = std::move(res.series);
      events = std::move(res.events);
      break;
    }
    case SamplerSpec::Kind::HmcExact:
    case SamplerSpec::Kind::HmcVerlet: {
      FlowKind flow = spec.kind == SamplerSpec::Kind::HmcExact
                          ? FlowKind::exact()
                          : FlowKind::verlet(spec.eta);
      InteractionPotential pot = detail::potential_from_tag(s.potential);
      HmcState state = hmc_stationary_start(target, spec.hmc_gamma, spec.beta, rng);
      if (!pot.harmonic && spec.kind == SamplerSpec::Kind::HmcVerlet) {
        HmcResult burn = hmc_simulate(std::move(state), 0.25 * s.horizon, flow,
                                      pot, ObserverSchedule::none(), rng);
        state = std::move(burn.final_state);
      }
      HmcResult res = hmc_simulate(std::move(state), s.horizon, flow, pot,
                                   observer, rng);
      series = std::move(res.series);
      break;
    }
  }

  std::vector<std::string> header = {"time", "position"};
  for (const std::string& name : series.obs_names) header.push_back(name);
  bool have_work = !series.work.empty();
  if (have_work) header.push_back("work");
  CsvWriter w(header);
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::string> row = {format_double(series.times[i]),
                                    std::to_string(series.positions[i])};
    for (const Vec& col : series.obs) row.push_back(format_double(col[i]));
    if (have_work) row.push_back(format_double(series.work[i]));
    w.append_row(row);
  }

  ManifestWriter man("sample", &s);
  man.cells.push_back({spec.tag(), n, gamma, seedc});
  man.add_output("trajectory.csv", w.text());
  if (s.events) man.add_output("events.bin", encode_event_log(n, events));
  man.write();

  std::cout << "sample: " << series.size() << " rows";
  if (s.events) std::cout << ", " << events.size() << " events";
  std::cout << " -> " << s.out << "\n";
  return 0;
}

// ------------------------------------------------------------ relax-scan

liftlab::EstimationMethod parse_method(const std::string& m) {
  if (m == "ensemble") return liftlab::EstimationMethod::EnsembleDecay;
  if (m == "autocorr") return liftlab::EstimationMethod::StationaryAutocorr;
  throw ConfigError("unknown estimation method '" + m +
                    "' (expected ensemble or autocorr)");
}

liftlab::RelaxationEstimate run_cell(const RunSettings& s,
                                     const liftlab::SamplerSpec& spec,
                                     const liftlab::Observable& observable,
                                     int workers) {
  double horizon =
      s.horizon > 0.0 ? s.horizon : 10.5 * liftlab::anticipated_t_rel(spec);
  liftlab::EstimationOptions opt;
  opt.method = parse_method(s.method);
  opt.grid_points = s.grid_points;
  opt.batches = s.batches;
  opt.workers = workers;
  std::uint64_t seedc = cell_seed(s.seed, spec.tag(), spec.n, spec.gamma_value());
  return liftlab::estimate_relaxation(spec, observable, s.replicas, horizon,
                                      seedc, opt);
}

int cmd_relax_scan(RunSettings s) {
  if (s.sampler.empty()) throw ConfigError("relax-scan: --sampler is required");
  if (s.n_grid.empty())
    throw ConfigError("relax-scan: --n-grid is required (at least 4 sizes)");
  s.n_grid = sorted_grid(s.n_grid);
  if (s.n_grid.size() < 4)
    throw ConfigError("relax-scan: the exponent fit needs at least 4 distinct sizes");
  liftlab::EstimationMethod method = parse_method(s.method);
  auto obs_items = parse_observables(s.observables, s.sampler, "mode:1");
  if (obs_items.size() != 1)
    throw ConfigError("relax-scan: exactly one observable expected");
  int workers = resolve_workers(s);

  std::vector<liftlab::RelaxationEstimate> ests(s.n_grid.size());
  auto job = [&](std::uint64_t i, int inner) {
    ests[i] = run_cell(s, make_spec(s, s.n_grid[i]), obs_items[0], inner);
  };
  if (method == liftlab::EstimationMethod::EnsembleDecay) {
    for (std::uint64_t i = 0; i < s.n_grid.size(); ++i) job(i, workers);
  } else {
    liftlab::parallel_for(s.n_grid.size(), workers,
                          [&](std::uint64_t i) { job(i, 1); });
  }

  liftlab::CsvWriter w(results_header);
  int usable = 0;
  for (const auto& e : ests) {
    w.append_row(estimate_row(e));
    report_estimate(e);
    if (!e.failed && e.rate > 0.0) ++usable;
  }

  int rc = 0;
  if (usable >= 4) {
    liftlab::ScalingFit fit = liftlab::scaling_fit(ests);
    w.append_row({s.sampler, "0", "0", "scaling-exponent", s.method,
                  liftlab::format_double(fit.exponent),
                  liftlab::format_double(fit.exponent_stderr), "0", "0",
                  std::to_string(fit.points), "0", std::to_string(s.seed)});
    std::cout << "scaling exponent " << liftlab::format_double(fit.exponent)
              << " +- " << liftlab::format_double(fit.exponent_stderr) << " ("
              << fit.points << " sizes)\n";
  } else {
    std::cout << "only " << usable
              << " usable cells; exponent fit needs 4 -- estimation failed\n";
    rc = 3;
  }

  ManifestWriter man("relax-scan", &s);
  for (std::size_t i = 0; i < ests.size(); ++i)
    man.cells.push_back({ests[i].sampler, ests[i].n, ests[i].gamma, ests[i].seed});
  man.add_output("results.csv", w.text());
  man.write();
  return rc;
}

// --------------------------------------------------------------- compare

struct FamilyResult {
  std::string tag;
  std::vector<liftlab::RelaxationEstimate> ests;
  std::vector<double> total_work;  // t_rel * work_rate * per-unit site cost
};

// Observer emissions force partial Verlet steps, which inflates small-n
// gradient counts; work rates therefore come from a dedicated unobserved
// run on the stream one past the estimation replicas.
double metered_work_rate(const RunSettings& s, const liftlab::SamplerSpec& spec) {
  using namespace liftlab;
  double horizon =
      s.horizon > 0.0 ? s.horizon : 10.5 * anticipated_t_rel(spec);
  std::uint64_t seedc = cell_seed(s.seed, spec.tag(), spec.n, spec.gamma_value());
  RngStream rng(seedc, static_cast<std::uint64_t>(s.replicas));
  auto table = std::make_shared<const SpectralTable>(
      build_spectral_table(CircleLattice(spec.n)));
  GaussianTarget target = make_gaussian_target(table);
  InteractionPotential pot = detail::potential_from_tag(spec.potential_tag);
  double burn = pot.harmonic ? 0.0 : 0.25 * horizon;
  if (spec.kind == SamplerSpec::Kind::Ecmc) {
    EcmcState state = ecmc_stationary_start(target, spec.beta, spec.refresh, rng);
    if (burn > 0.0) {
      EcmcResult b = ecmc_simulate(std::move(state), pot, burn,
                                   ObserverSchedule::none(), rng);
      state = std::move(b.final_state);
    }
    EcmcResult res = ecmc_simulate(std::move(state), pot, horizon,
                                   ObserverSchedule::none(), rng);
    return static_cast<double>(res.event_count) / horizon;
  }
  FlowKind flow = FlowKind::verlet(spec.eta);
  HmcState state = hmc_stationary_start(target, spec.hmc_gamma, spec.beta, rng);
  if (burn > 0.0) {
    HmcResult b = hmc_simulate(std::move(state), burn, flow, pot,
                               ObserverSchedule::none(), rng);
    state = std::move(b.final_state);
  }
  std::uint64_t before = state.work_counter;
  HmcResult res = hmc_simulate(std::move(state), horizon, flow, pot,
                               ObserverSchedule::none(), rng);
  return static_cast<double>(res.final_state.work_counter - before) / horizon;
}

int cmd_compare(RunSettings s) {
  if (!s.sampler.empty())
    throw ConfigError("compare runs the fixed ecmc / hmc-verlet families; drop --sampler");
  if (s.n_grid.empty()) s.n_grid = {8, 16, 32, 64};
  s.n_grid = sorted_grid(s.n_grid);
  if (s.n_grid.size() < 4)
    throw ConfigError("compare: the slope fits need at least 4 distinct sizes");
  int workers = resolve_workers(s);
  liftlab::Observable observable = liftlab::Observable::fourier_mode(1);

  auto family_gamma = [&](int n) {
    if (s.gamma.empty() || s.gamma == "preset") return 1.0 / n;
    double g = parse_real(s.gamma, "--gamma");
    if (g <= 0.0) throw ConfigError("compare: --gamma must be positive");
    return g;
  };

  FamilyResult ecmc{"ecmc", {}, {}};
  FamilyResult hmc{"hmc-verlet", {}, {}};
  bool any_failed = false;
  for (int n : s.n_grid) {
    double g = family_gamma(n);
    liftlab::SamplerSpec se = liftlab::sampler_ecmc(
        n, liftlab::RefreshKind::uniform(g), s.potential, s.beta);
    liftlab::SamplerSpec sh = liftlab::sampler_hmc_verlet(
        n, g, resolve_eta(s, n), s.potential, s.beta);
    for (auto* fam : {&ecmc, &hmc}) {
      const liftlab::SamplerSpec& spec = fam == &ecmc ? se : sh;
      liftlab::RelaxationEstimate e = run_cell(s, spec, observable, workers);
      if (!e.failed) e.work_rate = metered_work_rate(s, spec);
      report_estimate(e);
      // Events cost O(1) site work each; a Verlet gradient sweep costs n.
      double site_cost = fam == &ecmc ? 1.0 : static_cast<double>(n);
      fam->total_work.push_back(e.failed ? 0.0
                                         : e.t_rel() * e.work_rate * site_cost);
      fam->ests.push_back(std::move(e));
      any_failed = any_failed || fam->ests.back().failed;
    }
  }

  liftlab::CsvWriter w({"sampler", "n", "gamma", "rate", "stderr", "t_rel",
                        "t_rel_stderr", "work_rate", "total_work"});
  for (const FamilyResult* fam : {&ecmc, &hmc})
    for (std::size_t i = 0; i < fam->ests.size(); ++i) {
      const auto& e = fam->ests[i];
      using liftlab::format_double;
      w.append_row({e.sampler, std::to_string(e.n), format_double(e.gamma),
                    format_double(e.rate), format_double(e.rate_stderr),
                    format_double(e.failed ? 0.0 : e.t_rel()),
                    format_double(e.failed ? 0.0 : e.t_rel_stderr()),
                    format_double(e.work_rate),
                    format_double(fam->total_work[i])});
    }

  ManifestWriter man("compare", &s);
  for (const FamilyResult* fam : {&ecmc, &hmc})
    for (const auto& e : fam->ests)
      man.cells.push_back({e.sampler, e.n, e.gamma, e.seed});
  man.add_output("compare.csv", w.text());

  if (any_failed) {
    std::cout << "compare: estimation failed for at least one cell\n";
    man.write();
    return 3;
  }

  liftlab::CsvWriter summary({"sampler", "total_work_slope", "total_work_slope_stderr",
                              "work_rate_slope", "work_rate_slope_stderr", "points"});
  std::map<std::string, double> slopes;
  for (const FamilyResult* fam : {&ecmc, &hmc}) {
    liftlab::Vec xs, ys, ws, yr, wr;
    for (std::size_t i = 0; i < fam->ests.size(); ++i) {
      const auto& e = fam->ests[i];
      xs.push_back(std::log(static_cast<double>(e.n)));
      ys.push_back(std::log(fam->total_work[i]));
      double se_log = std::max(e.rate_stderr / e.rate, 1e-9);
      ws.push_back(1.0 / (se_log * se_log));
      yr.push_back(std::log(e.work_rate));
      wr.push_back(1.0);
    }
    liftlab::LinearFit work_fit = liftlab::wls_fit(xs, ys, ws);
    liftlab::LinearFit rate_fit = liftlab::wls_fit(xs, yr, wr);
    slopes[fam->tag] = work_fit.slope;
    summary.append_row({fam->tag, liftlab::format_double(work_fit.slope),
                        liftlab::format_double(work_fit.slope_se),
                        liftlab::format_double(rate_fit.slope),
                        liftlab::format_double(rate_fit.slope_se),
                        std::to_string(work_fit.points)});
    std::cout << fam->tag << ": total-work slope "
              << liftlab::format_double(work_fit.slope) << " +- "
              << liftlab::format_double(work_fit.slope_se) << ", work-rate slope "
              << liftlab::format_double(rate_fit.slope) << "\n";
  }
  std::cout << (slopes["ecmc"] < slopes["hmc-verlet"]
                    ? "ordering: ecmc scales better than hmc-verlet\n"
                    : "ordering: NOT satisfied on this grid\n");
  man.add_output("compare_summary.csv", summary.text());
  man.write();
  return 0;
}

// ---------------------------------------------------------------- verify

const std::vector<std::string> verify_header = {
    "n",  "pair",    "identity", "route", "lhs",    "rhs",
    "mc_mean", "mc_se", "status", "detail"};

struct VerifyTally {
  liftlab::CsvWriter w{verify_header};
  int passes = 0;
  int fails = 0;
  int skips = 0;

  void add(int n, const std::string& pair, const liftlab::IdentityCheck& c) {
    using liftlab::format_double;
    std::string route = c.analytic ? (c.has_mc ? "analytic+mc" : "analytic") : "mc";
    w.append_row({std::to_string(n), pair, c.label, route, format_double(c.lhs),
                  format_double(c.rhs), format_double(c.mc_mean),
                  format_double(c.mc_se), c.pass ? "pass" : "fail", c.detail});
    if (c.pass) {
      ++passes;
    } else {
      ++fails;
      std::cout << "FAIL n=" << n << " " << pair << " " << c.label << ": "
                << c.detail << "\n";
    }
  }

  void skip(int n, const std::string& pair, const std::string& identity,
            const std::string& why) {
    w.append_row({std::to_string(n), pair, identity, "none", "0", "0", "0", "0",
                  "skip", why});
    ++skips;
  }

  void summary(int n) const {
    std::cout << "n=" << n << ": " << passes << " passed, " << skips
              << " skipped, " << fails << " failed so far\n";
  }
};

std::vector<int> verify_grid(RunSettings& s, std::vector<int> fallback) {
  if (s.n_grid.empty()) s.n_grid = std::move(fallback);
  s.n_grid = sorted_grid(s.n_grid);
  for (int n : s.n_grid)
    if (n > 64) throw ConfigError("verification needs n <= 64, got " + std::to_string(n));
  return s.n_grid;
}

int cmd_verify_lift(RunSettings s) {
  std::vector<int> grid = verify_grid(s, {3, 4, 8});
  if (s.budget < 100) throw ConfigError("--budget must be at least 100");
  VerifyTally tally;
  for (int n : grid) {
    auto table = std::make_shared<const liftlab::SpectralTable>(
        liftlab::build_spectral_table(liftlab::CircleLattice(n)));
    liftlab::GaussianMoments mom(table);
    liftlab::RngStream battery_rng(cell_seed(s.seed, "battery", n, 0.0), 0);
    auto battery = liftlab::test_function_battery(mom, battery_rng);
    liftlab::RngStream rng(cell_seed(s.seed, "verify-lift", n, 0.0), 0);
    for (const auto& pair : battery) {
      if (!pair.f.has_position_factor() && !pair.g.has_position_factor()) {
        liftlab::VerifyReport rep = liftlab::verify_lift(pair, table, s.budget, rng);
        for (const auto& c : rep.checks) tally.add(n, rep.label, c);
      } else {
        tally.skip(n, pair.label(), "lift", "position-factored pair is outside the lifted-identity domain");
      }
      liftlab::VerifyReport rep = liftlab::verify_adjoints(pair, table, s.budget, rng);
      for (const auto& c : rep.checks) tally.add(n, rep.label, c);
    }
    tally.summary(n);
  }

  ManifestWriter man("verify-lift", &s);
  for (int n : grid)
    man.cells.push_back({"verify", n, 0.0, cell_seed(s.seed, "verify-lift", n, 0.0)});
  man.add_output("verify_lift.csv", tally.w.text());
  man.write();
  std::cout << (tally.fails == 0 ? "verify-lift: all identities hold\n"
                                 : "verify-lift: FAILURES detected\n");
  return tally.fails == 0 ? 0 : 4;
}

int cmd_verify_invariant(RunSettings s) {
  std::vector<int> grid = verify_grid(s, {4, 8});
  if (s.budget < 100) throw ConfigError("--budget must be at least 100");
  if (s.covariance_horizon > 0.0)
    for (int n : grid)
      if (n > 11)
        throw ConfigError("the covariance check supports n <= 11, got " +
                          std::to_string(n));

  liftlab::RateModel model;
  model.corrupt_minus = s.corrupt_rates;
  VerifyTally tally;
  for (int n : grid) {
    auto table = std::make_shared<const liftlab::SpectralTable>(
        liftlab::build_spectral_table(liftlab::CircleLattice(n)));
    liftlab::GaussianMoments mom(table);
    liftlab::RngStream battery_rng(cell_seed(s.seed, "battery", n, 0.0), 0);
    auto battery = liftlab::test_function_battery(mom, battery_rng);
    liftlab::RngStream rng(cell_seed(s.seed, "verify-invariant", n, 0.0), 0);
    std::map<std::string, const liftlab::TestFunction*> unique;
    for (const auto& pair : battery) {
      unique.emplace(pair.f.name, &pair.f);
      unique.emplace(pair.g.name, &pair.g);
    }
    for (const auto& [name, fn] : unique) {
      liftlab::VerifyReport rep =
          liftlab::verify_invariance(*fn, table, s.budget, rng, model);
      for (const auto& c : rep.checks) tally.add(n, name, c);
    }
    if (s.covariance_horizon > 0.0) {
      auto res = liftlab::run_srw_covariance_check(
          table, s.covariance_horizon, cell_seed(s.seed, "covariance", n, 0.0));
      liftlab::IdentityCheck diag{"covariance:diag", false, res.worst_diag_rel,
                                  0.05, false, 0.0, 0.0, res.diag_pass,
                                  "worst relative diagonal error vs 5% budget"};
      liftlab::IdentityCheck off{"covariance:offdiag", false,
                                 res.worst_offdiag_sigma, 3.0, false, 0.0, 0.0,
                                 res.offdiag_pass,
                                 "worst off-diagonal deviation in batch SEs vs 3"};
      liftlab::IdentityCheck pos{"covariance:position", false, res.position_chi2,
                                 res.position_chi2_crit, false, 0.0, 0.0,
                                 res.position_pass,
                                 "position chi-square vs 95% quantile"};
      tally.add(n, "(long-run)", diag);
      tally.add(n, "(long-run)", off);
      tally.add(n, "(long-run)", pos);
    }
    tally.summary(n);
  }

  ManifestWriter man("verify-invariant", &s);
  for (int n : grid)
    man.cells.push_back({"verify", n, 0.0, cell_seed(s.seed, "verify-invariant", n, 0.0)});
  man.add_output("verify_invariant.csv", tally.w.text());
  man.write();
  std::cout << (tally.fails == 0 ? "verify-invariant: stationarity holds\n"
                                 : "verify-invariant: FAILURES detected\n");
  return tally.fails == 0 ? 0 : 4;
}

// ---------------------------------------------------------------- replay

int dispatch(const std::string& command, RunSettings s) {
  if (command == "sample") return cmd_sample(std::move(s));
  if (command == "relax-scan") return cmd_relax_scan(std::move(s));
  if (command == "compare") return cmd_compare(std::move(s));
  if (command == "verify-lift") return cmd_verify_lift(std::move(s));
  if (command == "verify-invariant") return cmd_verify_invariant(std::move(s));
  throw ConfigError("manifest names unknown command '" + command + "'");
}

int cmd_replay(const std::string& manifest_path, const std::string& out_override,
               int workers_override) {
  json m;
  try {
    m = json::parse(liftlab::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw ConfigError(manifest_path + ": " + e.what());
  }
  if (!m.is_object() || !m.contains("schema_version"))
    throw ConfigError(manifest_path + ": not a run manifest");
  if (m["schema_version"].get<int>() != 1)
    throw ConfigError(manifest_path + ": unsupported manifest schema");
  std::string command = m.at("command").get<std::string>();

  RunSettings s;
  apply_config(s, config_from_json(m.at("config"), manifest_path), manifest_path);
  std::uint64_t master = m.at("master_seed").get<std::uint64_t>();
  if (master != s.seed)
    throw ConfigError(manifest_path + ": master_seed disagrees with the config echo");
  fs::path replay_dir = out_override.empty()
                            ? fs::path(manifest_path).parent_path() / "replay-check"
                            : fs::path(out_override);
  s.out = replay_dir.string();
  if (workers_override > 0) s.workers = workers_override;

  fs::create_directories(replay_dir);
  int rc = dispatch(command, s);

  bool all_ok = true;
  for (const auto& [rel, digest] : m.at("outputs").items()) {
    std::string fresh;
    try {
      fresh = liftlab::digest_hex(liftlab::digest_file(replay_dir / rel));
    } catch (const std::exception&) {
      fresh = "(missing)";
    }
    bool ok = fresh == digest.get<std::string>();
    all_ok = all_ok && ok;
    std::cout << (ok ? "match    " : "MISMATCH ") << rel << "\n";
  }
  if (!all_ok) {
    std::cout << "replay: outputs diverged from the manifest\n";
    return 4;
  }
  std::cout << "replay: all outputs byte-identical\n";
  return rc;
}

// ------------------------------------------------------------------ main

struct FlagBundle {
  RunSettings v;
  int n_single = 0;
  std::string config_path;
  std::string manifest_path;
};

void add_run_options(CLI::App* sub, FlagBundle& f) {
  sub->add_option("--config", f.config_path, "configuration file; flags override its values");
  sub->add_option("--sampler", f.v.sampler,
                  "srw | srw-uniform | srw-neighbor | ou | ecmc | hmc-exact | hmc-verlet");
  sub->add_option("--n", f.n_single, "single lattice size");
  sub->add_option("--n-grid", f.v.n_grid, "comma-separated lattice sizes")->delimiter(',');
  sub->add_option("--gamma", f.v.gamma, "refresh rate: a number or 'preset'");
  sub->add_option("--horizon", f.v.horizon, "time horizon (0 = derive from scaling theory)");
  sub->add_option("--replicas", f.v.replicas, "ensemble replicas");
  sub->add_option("--seed", f.v.seed, "master seed");
  sub->add_option("--out", f.v.out, "output directory");
  sub->add_option("--workers", f.v.workers, "worker threads (0 = LIFTLAB_WORKERS, then hardware)");
}

void add_model_options(CLI::App* sub, FlagBundle& f) {
  sub->add_option("--potential", f.v.potential, "interaction potential: harmonic | quartic");
  sub->add_option("--beta", f.v.beta, "inverse temperature");
  sub->add_option("--eta", f.v.eta, "Verlet step size (0 = n^(-1/4))");
}

void add_estimation_options(CLI::App* sub, FlagBundle& f) {
  sub->add_option("--method", f.v.method, "ensemble | autocorr");
  sub->add_option("--grid-points", f.v.grid_points, "correlation grid points (0 = default)");
  sub->add_option("--batches", f.v.batches, "batches for error bars");
}

void merge_flags(RunSettings& s, const CLI::App* sub, const FlagBundle& f) {
  auto got = [&](const char* name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (got("--n") && got("--n-grid"))
    throw ConfigError("--n and --n-grid are mutually exclusive");
  if (got("--sampler")) s.sampler = f.v.sampler;
  if (got("--n")) s.n_grid = {f.n_single};
  if (got("--n-grid")) s.n_grid = f.v.n_grid;
  if (got("--gamma")) s.gamma = f.v.gamma;
  if (got("--horizon")) s.horizon = f.v.horizon;
  if (got("--replicas")) s.replicas = f.v.replicas;
  if (got("--seed")) s.seed = f.v.seed;
  if (got("--out")) s.out = f.v.out;
  if (got("--workers")) s.workers = f.v.workers;
  if (got("--observables")) s.observables = f.v.observables;
  if (got("--spacing")) s.spacing = f.v.spacing;
  if (got("--events")) s.events = f.v.events;
  if (got("--method")) s.method = f.v.method;
  if (got("--grid-points")) s.grid_points = f.v.grid_points;
  if (got("--batches")) s.batches = f.v.batches;
  if (got("--potential")) s.potential = f.v.potential;
  if (got("--beta")) s.beta = f.v.beta;
  if (got("--eta")) s.eta = f.v.eta;
  if (got("--budget")) s.budget = f.v.budget;
  if (got("--corrupt-rates")) s.corrupt_rates = f.v.corrupt_rates;
  if (got("--covariance-horizon")) s.covariance_horizon = f.v.covariance_horizon;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-repellent walk and oscillator-chain sampling laboratory"};
  app.require_subcommand(1);

  FlagBundle f;
  CLI::App* sample = app.add_subcommand("sample", "write one trajectory to CSV");
  add_run_options(sample, f);
  add_model_options(sample, f);
  sample->add_option("--observables", f.v.observables,
                     "comma list: mode:K, potential, posind:J");
  sample->add_option("--spacing", f.v.spacing, "emission spacing (0 = horizon/512)");
  sample->add_flag("--events", f.v.events, "also write the binary event log");

  CLI::App* scan = app.add_subcommand("relax-scan",
                                      "estimate relaxation rates over an n grid");
  add_run_options(scan, f);
  add_model_options(scan, f);
  add_estimation_options(scan, f);
  scan->add_option("--observables", f.v.observables, "observable to track (one)");

  CLI::App* compare = app.add_subcommand(
      "compare", "event-chain vs Verlet-HMC work-to-relaxation scaling");
  add_run_options(compare, f);
  add_model_options(compare, f);
  add_estimation_options(compare, f);

  CLI::App* vlift = app.add_subcommand("verify-lift",
                                       "lifted-generator and adjoint identities");
  add_run_options(vlift, f);
  vlift->add_option("--budget", f.v.budget, "Monte Carlo sample budget");

  CLI::App* vinv = app.add_subcommand("verify-invariant",
                                      "stationarity and long-run covariance checks");
  add_run_options(vinv, f);
  vinv->add_option("--budget", f.v.budget, "Monte Carlo sample budget");
  vinv->add_flag("--corrupt-rates", f.v.corrupt_rates,
                 "negative control: corrupt the left jump rate");
  vinv->add_option("--covariance-horizon", f.v.covariance_horizon,
                   "if positive, run the long-run covariance check this long");

  CLI::App* replay = app.add_subcommand("replay",
                                        "re-run a manifest and compare digests");
  replay->add_option("manifest", f.manifest_path, "path to manifest.json")->required();
  replay->add_option("--out", f.v.out, "directory for the replayed outputs");
  replay->add_option("--workers", f.v.workers, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == replay) {
      return cmd_replay(f.manifest_path,
                        sub->count("--out") > 0 ? f.v.out : std::string(),
                        sub->count("--workers") > 0 ? f.v.workers : 0);
    }
    RunSettings s;
    if (!f.config_path.empty())
      apply_config(s, parse_config_text(liftlab::read_file(f.config_path), f.config_path),
                   f.config_path);
    merge_flags(s, sub, f);
    fs::create_directories(s.out);
    return dispatch(sub->get_name(), std::move(s));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
