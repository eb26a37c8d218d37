#pragma once

// Numerical verification of the structural identities of the lifted walk:
// stationarity of the product measure, adjoint formulas for the drift and
// jump parts, and the two inner-product identities tying the lift to the
// slowed heat flow on the circle. Each check pairs an analytic route
// (Gaussian moment formulas) with a Monte Carlo route where applicable.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liftlab/gaussian.hpp"
#include "liftlab/lattice.hpp"
#include "liftlab/matrix.hpp"
#include "liftlab/rng.hpp"
#include "liftlab/spectral.hpp"
#include "liftlab/srw.hpp"
#include "liftlab/stats.hpp"
#include "liftlab/wick.hpp"

namespace liftlab {

inline constexpr double analytic_tol = 1e-12;
inline constexpr double mc_sigmas = 3.0;
inline constexpr double mc_floor = 1e-10;

// The jump-rate model; corrupt_minus flips the sign convention of the left
// rate, used as a deliberate fault to demonstrate that the invariance check
// has teeth.
struct RateModel {
  bool corrupt_minus = false;
};

namespace detail {

inline double pos_part(double a) { return a > 0.0 ? a : 0.0; }

inline double q_plus_of(std::span<const double> l, const CircleLattice& lat, int x) {
  return pos_part(l[static_cast<std::size_t>(x)] -
                  l[static_cast<std::size_t>(lat.next(x))]);
}

inline double q_minus_of(std::span<const double> l, const CircleLattice& lat, int x,
                         const RateModel& model) {
  double c = l[static_cast<std::size_t>(x)] -
             l[static_cast<std::size_t>(lat.prev(x))];
  if (model.corrupt_minus) c = -c;
  return pos_part(c);
}

inline double lap_at(std::span<const double> l, const CircleLattice& lat, int x) {
  return l[static_cast<std::size_t>(lat.next(x))] +
         l[static_cast<std::size_t>(lat.prev(x))] -
         2.0 * l[static_cast<std::size_t>(x)];
}

}  // namespace detail

// Drift part: psi(x) times the profile derivative of phi along the flow
// (unit growth at the walker site, uniform -1/n drain).
inline double apply_T(const TestFunction& f, std::span<const double> l,
                      const CircleLattice& lat, int x) {
  double gsum = 0.0;
  for (int i = 0; i < lat.n; ++i) gsum += f.grad(l, i);
  return f.psi_at(x) * (f.grad(l, x) - gsum / lat.n);
}

inline double apply_Jplus(const TestFunction& f, std::span<const double> l,
                          const CircleLattice& lat, int x) {
  if (!f.has_position_factor()) return 0.0;
  return detail::q_plus_of(l, lat, x) * f.phi(l) *
         (f.psi_at(lat.next(x)) - f.psi_at(x));
}

inline double apply_Jminus(const TestFunction& f, std::span<const double> l,
                           const CircleLattice& lat, int x,
                           const RateModel& model = {}) {
  if (!f.has_position_factor()) return 0.0;
  return detail::q_minus_of(l, lat, x, model) * f.phi(l) *
         (f.psi_at(lat.prev(x)) - f.psi_at(x));
}

inline double apply_gen(const TestFunction& f, std::span<const double> l,
                        const CircleLattice& lat, int x,
                        const RateModel& model = {}) {
  return apply_T(f, l, lat, x) + apply_Jplus(f, l, lat, x) +
         apply_Jminus(f, l, lat, x, model);
}

inline double apply_T_star(const TestFunction& f, std::span<const double> l,
                           const CircleLattice& lat, int x) {
  return -apply_T(f, l, lat, x) - detail::lap_at(l, lat, x) * f.eval(l, x);
}

inline double apply_Jplus_star(const TestFunction& f, std::span<const double> l,
                               const CircleLattice& lat, int x) {
  return detail::q_plus_of(l, lat, lat.prev(x)) * f.eval(l, lat.prev(x)) -
         detail::q_plus_of(l, lat, x) * f.eval(l, x);
}

inline double apply_Jminus_star(const TestFunction& f, std::span<const double> l,
                                const CircleLattice& lat, int x) {
  return detail::q_minus_of(l, lat, lat.next(x), {}) * f.eval(l, lat.next(x)) -
         detail::q_minus_of(l, lat, x, {}) * f.eval(l, x);
}

inline double apply_gen_star(const TestFunction& f, std::span<const double> l,
                             const CircleLattice& lat, int x) {
  return apply_T_star(f, l, lat, x) + apply_Jplus_star(f, l, lat, x) +
         apply_Jminus_star(f, l, lat, x);
}

// Slowed heat generator on position-free members:
// (1/2n) [ (Delta l) . grad phi + tr(P_S Hess phi) ].
inline double apply_collapse_gen(const TestFunction& f, std::span<const double> l,
                                 const CircleLattice& lat) {
  if (f.has_position_factor())
    throw std::invalid_argument("apply_collapse_gen: position-free members only");
  double inv = 1.0 / (2.0 * lat.n);
  switch (f.deg) {
    case TestFunction::Deg::Constant:
      return 0.0;
    case TestFunction::Deg::Linear: {
      double s = 0.0;
      for (int x = 0; x < lat.n; ++x)
        s += detail::lap_at(l, lat, x) * f.v[static_cast<std::size_t>(x)];
      return inv * s;
    }
    case TestFunction::Deg::Quadratic: {
      double s = 0.0;
      for (int x = 0; x < lat.n; ++x) s += detail::lap_at(l, lat, x) * f.grad(l, x);
      // A is projected onto the mean-zero sector, so tr(P_S Hess) = 2 tr(A).
      return inv * (s + 2.0 * trace(f.A));
    }
  }
  return 0.0;
}

struct IdentityCheck {
  std::string label;
  bool analytic = false;  // closed-form route evaluated
  double lhs = 0.0;       // analytic values when analytic = true
  double rhs = 0.0;
  bool has_mc = false;
  double mc_mean = 0.0;  // Monte Carlo estimate of lhs - rhs (or of the value)
  double mc_se = 0.0;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::string label;
  std::vector<IdentityCheck> checks;

  bool all_pass() const {
    for (const IdentityCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

struct McAccumulator {
  double sum = 0.0, sumsq = 0.0;
  std::uint64_t count = 0;

  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double se() const {
    if (count < 2) return 0.0;
    double m = mean();
    double var = (sumsq - static_cast<double>(count) * m * m) /
                 static_cast<double>(count - 1);
    return var > 0.0 ? std::sqrt(var / static_cast<double>(count)) : 0.0;
  }
};

inline bool mc_consistent(const McAccumulator& acc, double target) {
  double scale = std::max(1.0, std::abs(target));
  if (acc.se() == 0.0) return std::abs(acc.mean() - target) <= analytic_tol * scale;
  return std::abs(acc.mean() - target) <= mc_sigmas * acc.se() + mc_floor * scale;
}

inline bool analytic_consistent(double lhs, double rhs) {
  double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return std::abs(lhs - rhs) <= analytic_tol * scale;
}

// E[phi (Z)_+] for Z = d . l, by degree.
inline double phi_pos_part(const GaussianMoments& mom, const TestFunction& f,
                           const Vec& d) {
  double sigma = std::sqrt(quad_form(d, mom.C, d));
  switch (f.deg) {
    case TestFunction::Deg::Constant:
      return GaussianMoments::mean_pos_part(sigma);
    case TestFunction::Deg::Linear:
      return GaussianMoments::lin_pos_part(quad_form(f.v, mom.C, d));
    case TestFunction::Deg::Quadratic:
      return mom.quad_pos_part(f.A, d) -
             f.center * GaussianMoments::mean_pos_part(sigma);
  }
  return 0.0;
}

// Closed-form E[T h], E[J+ h], E[J- h] under the stationary product law;
// their sum is the analytic stationarity defect and vanishes for every
// family member.
inline double analytic_generator_mean(const GaussianMoments& mom,
                                      const TestFunction& h) {
  const CircleLattice& lat = mom.table->lattice;
  int n = lat.n;
  double drift = 0.0;
  if (h.deg == TestFunction::Deg::Linear) {
    double vbar = 0.0;
    for (double a : h.v) vbar += a;
    vbar /= n;
    for (int x = 0; x < n; ++x)
      drift += h.psi_at(x) * (h.v[static_cast<std::size_t>(x)] - vbar);
    drift /= n;
  }
  double jumps = 0.0;
  for (int x = 0; x < n; ++x) {
    Vec dp = right_gap_vector(lat, x);
    Vec dm = left_gap_vector(lat, x);
    jumps += (h.psi_at(lat.next(x)) - h.psi_at(x)) * phi_pos_part(mom, h, dp);
    jumps += (h.psi_at(lat.prev(x)) - h.psi_at(x)) * phi_pos_part(mom, h, dm);
  }
  jumps /= n;
  return drift + jumps;
}

}  // namespace detail

// Analytic two-sided adjoint pairing <f, A g> and <A* f, g> for linear f, g
// (with arbitrary position factors), per operator. Returns {lhs, rhs}.
struct AdjointPairing {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline AdjointPairing analytic_jump_pairing(const GaussianMoments& mom,
                                            const TestFunction& f,
                                            const TestFunction& g, bool plus) {
  if (f.deg != TestFunction::Deg::Linear || g.deg != TestFunction::Deg::Linear)
    throw std::invalid_argument("analytic_jump_pairing: linear members only");
  const CircleLattice& lat = mom.table->lattice;
  int n = lat.n;
  double cov_fg = quad_form(f.v, mom.C, g.v);
  auto expect = [&](int x) {
    Vec d = plus ? right_gap_vector(lat, x) : left_gap_vector(lat, x);
    double sigma = std::sqrt(quad_form(d, mom.C, d));
    return GaussianMoments::linlin_pos_part(cov_fg, quad_form(f.v, mom.C, d),
                                            quad_form(g.v, mom.C, d), sigma);
  };
  AdjointPairing out;
  for (int x = 0; x < n; ++x) {
    int to = plus ? lat.next(x) : lat.prev(x);
    out.lhs += f.psi_at(x) * (g.psi_at(to) - g.psi_at(x)) * expect(x);
    int from = plus ? lat.prev(x) : lat.next(x);
    out.rhs += f.psi_at(from) * g.psi_at(x) * expect(from) -
               f.psi_at(x) * g.psi_at(x) * expect(x);
  }
  out.lhs /= n;
  out.rhs /= n;
  return out;
}

// Checks <f, A g> = <A* f, g> for A in {T, J+, J-, full generator} by paired
// Monte Carlo under the stationary law, with closed-form routes for linear
// pairs, plus the stationarity consequence E[generator applied to each
// member] = 0 both analytically and by Monte Carlo.
inline VerifyReport verify_adjoints(const TestFunctionPair& pair,
                                    std::shared_ptr<const SpectralTable> table,
                                    std::uint64_t mc_budget, RngStream& rng) {
  if (mc_budget < 100)
    throw std::invalid_argument("verify_adjoints: budget too small");
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);
  const CircleLattice& lat = table->lattice;
  const TestFunction& f = pair.f;
  const TestFunction& g = pair.g;

  VerifyReport report;
  report.label = pair.label();

  detail::McAccumulator diff_T, diff_Jp, diff_Jm, diff_gen, inv_f, inv_g;
  for (std::uint64_t it = 0; it < mc_budget; ++it) {
    MeanZeroProfile prof = sample_mu(target, rng);
    std::span<const double> l(prof.entries);
    int x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(lat.n)));
    double fv = f.eval(l, x);
    double gv = g.eval(l, x);
    diff_T.add(fv * apply_T(g, l, lat, x) - apply_T_star(f, l, lat, x) * gv);
    diff_Jp.add(fv * apply_Jplus(g, l, lat, x) -
                apply_Jplus_star(f, l, lat, x) * gv);
    diff_Jm.add(fv * apply_Jminus(g, l, lat, x) -
                apply_Jminus_star(f, l, lat, x) * gv);
    diff_gen.add(fv * apply_gen(g, l, lat, x) - apply_gen_star(f, l, lat, x) * gv);
    inv_f.add(apply_gen(f, l, lat, x));
    inv_g.add(apply_gen(g, l, lat, x));
  }

  bool linear_pair = f.deg == TestFunction::Deg::Linear &&
                     g.deg == TestFunction::Deg::Linear;
  auto push_op = [&](const std::string& name, const detail::McAccumulator& acc,
                     bool have_analytic, AdjointPairing pairing) {
    IdentityCheck c;
    c.label = "adjoint:" + name;
    c.has_mc = true;
    c.mc_mean = acc.mean();
    c.mc_se = acc.se();
    c.pass = detail::mc_consistent(acc, 0.0);
    if (have_analytic) {
      c.analytic = true;
      c.lhs = pairing.lhs;
      c.rhs = pairing.rhs;
      c.pass = c.pass && detail::analytic_consistent(pairing.lhs, pairing.rhs);
    }
    if (!c.pass) c.detail = "pairing mismatch";
    report.checks.push_back(std::move(c));
  };

  push_op("T", diff_T, linear_pair, AdjointPairing{0.0, 0.0});
  push_op("J+", diff_Jp, linear_pair,
          linear_pair ? analytic_jump_pairing(mom, f, g, true) : AdjointPairing{});
  push_op("J-", diff_Jm, linear_pair,
          linear_pair ? analytic_jump_pairing(mom, f, g, false) : AdjointPairing{});
  AdjointPairing gen_pairing;
  if (linear_pair) {
    AdjointPairing jp = analytic_jump_pairing(mom, f, g, true);
    AdjointPairing jm = analytic_jump_pairing(mom, f, g, false);
    gen_pairing = AdjointPairing{jp.lhs + jm.lhs, jp.rhs + jm.rhs};
  }
  push_op("generator", diff_gen, linear_pair, gen_pairing);

  auto push_invariance = [&](const std::string& name, const TestFunction& h,
                             const detail::McAccumulator& acc) {
    IdentityCheck c;
    c.label = "invariance:" + name;
    c.analytic = true;
    c.lhs = detail::analytic_generator_mean(mom, h);
    c.rhs = 0.0;
    c.has_mc = true;
    c.mc_mean = acc.mean();
    c.mc_se = acc.se();
    c.pass = detail::analytic_consistent(c.lhs, 0.0) && detail::mc_consistent(acc, 0.0);
    if (!c.pass) c.detail = "stationarity defect";
    report.checks.push_back(std::move(c));
  };
  push_invariance(f.name, f, inv_f);
  push_invariance(g.name, g, inv_g);
  return report;
}

namespace detail {

// Analytic value of <lifted-generator (f . pi), g . pi>; zero by the
// vector-sum identity, but assembled from Gaussian moments as a real check.
inline double analytic_deflift1(const GaussianMoments& mom, const TestFunction& f,
                                const TestFunction& g) {
  int n = mom.n();
  switch (f.deg) {
    case TestFunction::Deg::Constant:
      return 0.0;
    case TestFunction::Deg::Linear: {
      // Gradient is constant; pairs with E[phi_g] = 0 unless g is constant.
      double s = 0.0;
      for (double a : f.v) s += a;
      double mean_g = g.deg == TestFunction::Deg::Constant ? 1.0 : 0.0;
      return s / n * mean_g;
    }
    case TestFunction::Deg::Quadratic: {
      if (g.deg != TestFunction::Deg::Linear) return 0.0;  // odd moments vanish
      // (1/n) sum_x E[(2 A l)_x (w . l)] = (2/n) 1^T A C w
      Vec acw = matvec(mom.C, g.v);
      acw = matvec(f.A, acw);
      double s = 0.0;
      for (double a : acw) s += a;
      return 2.0 * s / n;
    }
  }
  return 0.0;
}

// LHS of the second lift identity: (1/2n) sum_x E[d_x phi_f d_x phi_g].
inline double analytic_deflift2_lhs(const GaussianMoments& mom,
                                    const TestFunction& f, const TestFunction& g) {
  int n = mom.n();
  if (f.deg == TestFunction::Deg::Constant || g.deg == TestFunction::Deg::Constant)
    return 0.0;
  if (f.deg == TestFunction::Deg::Linear && g.deg == TestFunction::Deg::Linear)
    return dot(f.v, g.v) / (2.0 * n);
  if (f.deg == TestFunction::Deg::Quadratic &&
      g.deg == TestFunction::Deg::Quadratic) {
    Matrix acb = matmul(f.A, matmul(mom.C, g.A));
    return 2.0 * trace(acb) / n;
  }
  return 0.0;  // mixed degrees: first moments of centered Gaussians
}

// RHS: -<f, collapse-generator g>.
inline double analytic_deflift2_rhs(const GaussianMoments& mom,
                                    const TestFunction& f, const TestFunction& g) {
  const CircleLattice& lat = mom.table->lattice;
  int n = lat.n;
  if (g.deg == TestFunction::Deg::Constant) return 0.0;
  if (g.deg == TestFunction::Deg::Linear) {
    if (f.deg != TestFunction::Deg::Linear) return 0.0;
    Vec lap_w(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
      lap_w[static_cast<std::size_t>(x)] = lap_at(g.v, lat, x);
    return -quad_form(f.v, mom.C, lap_w) / (2.0 * n);
  }
  // g quadratic
  if (f.deg != TestFunction::Deg::Quadratic) return 0.0;
  Matrix lap = neg_laplacian_matrix(lat);
  for (double& a : lap.a) a = -a;
  Matrix sym_lap_b = symmetrize(matmul(lap, g.A));
  Matrix prod = matmul(f.A, matmul(mom.C, matmul(sym_lap_b, mom.C)));
  return -2.0 * trace(prod) / n;
}

}  // namespace detail

// Verifies the two lift identities on position-free pairs:
//   <gen-hat (f . pi), g . pi> = 0
//   (1/2) <gen-hat (f . pi), gen-hat (g . pi)> = -<f, collapse-gen g>
// analytically (Gaussian moments) and by Monte Carlo under the stationary
// law.
inline VerifyReport verify_lift(const TestFunctionPair& pair,
                                std::shared_ptr<const SpectralTable> table,
                                std::uint64_t mc_budget, RngStream& rng) {
  if (pair.f.has_position_factor() || pair.g.has_position_factor())
    throw std::invalid_argument(
        "verify_lift: members must be position-free (functions of the profile)");
  if (mc_budget < 100) throw std::invalid_argument("verify_lift: budget too small");
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);
  const CircleLattice& lat = table->lattice;
  const TestFunction& f = pair.f;
  const TestFunction& g = pair.g;

  VerifyReport report;
  report.label = pair.label();

  double a1 = detail::analytic_deflift1(mom, f, g);
  double a2_lhs = detail::analytic_deflift2_lhs(mom, f, g);
  double a2_rhs = detail::analytic_deflift2_rhs(mom, f, g);

  detail::McAccumulator mc1, mc2_lhs, mc2_rhs;
  for (std::uint64_t it = 0; it < mc_budget; ++it) {
    MeanZeroProfile prof = sample_mu(target, rng);
    std::span<const double> l(prof.entries);
    int x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(lat.n)));
    double lf = apply_gen(f, l, lat, x);
    double lg = apply_gen(g, l, lat, x);
    mc1.add(lf * g.phi(l));
    mc2_lhs.add(0.5 * lf * lg);
    mc2_rhs.add(-f.phi(l) * apply_collapse_gen(g, l, lat));
  }

  IdentityCheck c1;
  c1.label = "lift:first";
  c1.analytic = true;
  c1.lhs = a1;
  c1.rhs = 0.0;
  c1.has_mc = true;
  c1.mc_mean = mc1.mean();
  c1.mc_se = mc1.se();
  c1.pass = detail::analytic_consistent(a1, 0.0) && detail::mc_consistent(mc1, 0.0);
  if (!c1.pass) c1.detail = "projection pairing nonzero";
  report.checks.push_back(std::move(c1));

  IdentityCheck c2;
  c2.label = "lift:second";
  c2.analytic = true;
  c2.lhs = a2_lhs;
  c2.rhs = a2_rhs;
  c2.has_mc = true;
  c2.mc_mean = mc2_lhs.mean() - mc2_rhs.mean();
  c2.mc_se = std::sqrt(mc2_lhs.se() * mc2_lhs.se() + mc2_rhs.se() * mc2_rhs.se());
  bool mc_lhs_ok = detail::mc_consistent(mc2_lhs, a2_lhs);
  bool mc_rhs_ok = detail::mc_consistent(mc2_rhs, a2_rhs);
  c2.pass = detail::analytic_consistent(a2_lhs, a2_rhs) && mc_lhs_ok && mc_rhs_ok;
  if (!c2.pass) c2.detail = "second-order pairing mismatch";
  report.checks.push_back(std::move(c2));
  return report;
}

// Long-run stationarity of the walk itself: time-averaged profile
// covariance against the pseudo-inverse of -Delta (diagonal relative,
// off-diagonal within batch-means error bars), and a chi-square uniformity
// test of the position marginal.
struct CovarianceCheckResult {
  double worst_diag_rel = 0.0;       // max_i |S_ii - C_ii| / C_ii
  double worst_offdiag_sigma = 0.0;  // max_{i<j} |S_ij - C_ij| / se_ij
  double position_chi2 = 0.0;
  double position_chi2_crit = 0.0;
  bool diag_pass = false;
  bool offdiag_pass = false;
  bool position_pass = false;

  bool pass() const { return diag_pass && offdiag_pass && position_pass; }
};

inline CovarianceCheckResult run_srw_covariance_check(
    std::shared_ptr<const SpectralTable> table, double horizon,
    std::uint64_t seed, double spacing = 1.0, int batches = 16,
    double diag_tol = 0.05, double offdiag_sigmas = 3.0) {
  const CircleLattice& lat = table->lattice;
  int n = lat.n;
  if (horizon <= 0.0 || spacing <= 0.0)
    throw std::domain_error("run_srw_covariance_check: need positive horizon");
  if (n - 1 > 10)
    throw std::domain_error(
        "run_srw_covariance_check: position test tabulated up to n = 11");
  std::uint64_t samples = static_cast<std::uint64_t>(horizon / spacing);
  if (samples < 1000)
    throw std::domain_error("run_srw_covariance_check: horizon too short");

  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(seed);
  LiftedState state = stationary_start(target, rng);

  Matrix total(n, n);
  std::vector<Matrix> batch_sums(static_cast<std::size_t>(batches), Matrix(n, n));
  std::vector<std::uint64_t> batch_counts(static_cast<std::size_t>(batches), 0);
  std::vector<std::uint64_t> pos_counts(static_cast<std::size_t>(n), 0);
  std::uint64_t per_batch = (samples + batches - 1) / batches;
  // Chi-square needs near-independent draws; thin the position samples to
  // roughly one relaxation time apart.
  std::uint64_t pos_stride = static_cast<std::uint64_t>(
      std::ceil(static_cast<double>(n) * n / spacing));
  if (pos_stride == 0) pos_stride = 1;

  for (std::uint64_t s = 0; s < samples; ++s) {
    SimulateResult chunk = simulate(std::move(state), spacing,
                                    RefreshKind::none(),
                                    ObserverSchedule::none(), rng);
    state = std::move(chunk.final_state);
    Vec prof = state.profile();
    std::size_t b = static_cast<std::size_t>(s / per_batch);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = prof[static_cast<std::size_t>(i)] *
                   prof[static_cast<std::size_t>(j)];
        total(i, j) += v;
        batch_sums[b](i, j) += v;
      }
    ++batch_counts[b];
    if (s % pos_stride == 0)
      ++pos_counts[static_cast<std::size_t>(state.position)];
  }

  Matrix mean(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mean(i, j) = total(i, j) / static_cast<double>(samples);

  Matrix cov = stationary_covariance(*table);
  CovarianceCheckResult out;
  out.diag_pass = true;
  for (int i = 0; i < n; ++i) {
    double rel = std::abs(mean(i, i) - cov(i, i)) / cov(i, i);
    out.worst_diag_rel = std::max(out.worst_diag_rel, rel);
  }
  out.diag_pass = out.worst_diag_rel <= diag_tol;

  out.offdiag_pass = true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Vec bm;
      for (int b = 0; b < batches; ++b)
        if (batch_counts[static_cast<std::size_t>(b)] > 0)
          bm.push_back(batch_sums[static_cast<std::size_t>(b)](i, j) /
                       static_cast<double>(batch_counts[static_cast<std::size_t>(b)]));
      MeanVar mv = mean_var(bm);
      double se = std::sqrt(mv.var / static_cast<double>(bm.size()));
      if (se <= 0.0) continue;
      double sigma = std::abs(mean(i, j) - cov(i, j)) / se;
      out.worst_offdiag_sigma = std::max(out.worst_offdiag_sigma, sigma);
    }
  out.offdiag_pass = out.worst_offdiag_sigma <= offdiag_sigmas;

  out.position_chi2 = chi2_uniform_statistic(pos_counts);
  out.position_chi2_crit = chi2_quantile_95(n - 1);
  out.position_pass = out.position_chi2 <= out.position_chi2_crit;
  return out;
}

// Stationarity check E[generator h] = 0 for a battery member, optionally
// with deliberately corrupted left rates; the corrupted model must fail.
inline VerifyReport verify_invariance(const TestFunction& h,
                                      std::shared_ptr<const SpectralTable> table,
                                      std::uint64_t mc_budget, RngStream& rng,
                                      const RateModel& model = {}) {
  if (mc_budget < 100)
    throw std::invalid_argument("verify_invariance: budget too small");
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);
  const CircleLattice& lat = table->lattice;

  detail::McAccumulator acc;
  for (std::uint64_t it = 0; it < mc_budget; ++it) {
    MeanZeroProfile prof = sample_mu(target, rng);
    std::span<const double> l(prof.entries);
    int x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(lat.n)));
    acc.add(apply_gen(h, l, lat, x, model));
  }

  VerifyReport report;
  report.label = h.name;
  IdentityCheck c;
  c.label = "invariance:" + h.name;
  c.has_mc = true;
  c.mc_mean = acc.mean();
  c.mc_se = acc.se();
  c.pass = detail::mc_consistent(acc, 0.0);
  if (!model.corrupt_minus) {
    c.analytic = true;
    c.lhs = detail::analytic_generator_mean(mom, h);
    c.rhs = 0.0;
    c.pass = c.pass && detail::analytic_consistent(c.lhs, 0.0);
  }
  if (!c.pass) c.detail = "stationarity defect";
  report.checks.push_back(std::move(c));
  return report;
}

}  // namespace liftlab
