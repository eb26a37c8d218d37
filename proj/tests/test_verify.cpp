#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "liftlab/gaussian.hpp"
#include "liftlab/observables.hpp"
#include "liftlab/verify.hpp"
#include "liftlab/wick.hpp"

using namespace liftlab;

namespace {

std::shared_ptr<const SpectralTable> table_for(int n) {
  return std::make_shared<const SpectralTable>(build_spectral_table(CircleLattice(n)));
}

}  // namespace

TEST_CASE("gaussian half moments against brute force") {
  int n = 5;
  auto table = table_for(n);
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);
  CircleLattice lat = table->lattice;

  Vec v = project_to_S(Vec{1.0, -0.5, 0.25, 0.75, -0.3}, lat).entries;
  Vec w = project_to_S(Vec{-0.2, 0.9, -1.1, 0.3, 0.4}, lat).entries;
  Vec d = right_gap_vector(lat, 1);  // Z = l_1 - l_2
  Matrix B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = 1.0 / (1.0 + i + j);
  B = symmetrize(B);

  double sigma_z = std::sqrt(mom.cov_lin(d, d));

  int R = 400000;
  RngStream rng(2024, 0);
  double s_xz = 0.0, s_xyz = 0.0, s_z = 0.0, s_qz = 0.0, s_xyq = 0.0;
  for (int r = 0; r < R; ++r) {
    Vec x = synthesize_modes(*table, sample_mu_modes(target, rng));
    double zx = dot(v, x), zy = dot(w, x), zz = std::max(dot(d, x), 0.0);
    double q = quad_form(x, B, x);
    s_z += zz;
    s_xz += zx * zz;
    s_xyz += zx * zy * zz;
    s_qz += q * zz;
    s_xyq += zx * zy * q;
  }
  double inv = 1.0 / R;

  // E[Z_+]
  CHECK(s_z * inv ==
        Catch::Approx(GaussianMoments::mean_pos_part(sigma_z)).margin(4.0 * sigma_z / std::sqrt(double(R))));
  // E[X Z_+] = cov/2
  double se_xz = 2.5 / std::sqrt(double(R));
  CHECK(s_xz * inv ==
        Catch::Approx(GaussianMoments::lin_pos_part(mom.cov_lin(v, d))).margin(4.0 * se_xz));
  // E[X Y Z_+]
  double se_xyz = 6.0 / std::sqrt(double(R));
  CHECK(s_xyz * inv ==
        Catch::Approx(GaussianMoments::linlin_pos_part(
            mom.cov_lin(v, w), mom.cov_lin(v, d), mom.cov_lin(w, d), sigma_z))
            .margin(4.0 * se_xyz));
  // E[(x^T B x) Z_+]
  double se_qz = 8.0 / std::sqrt(double(R));
  CHECK(s_qz * inv == Catch::Approx(mom.quad_pos_part(B, d)).margin(4.0 * se_qz));

  // Isserlis: E[X Y (x^T B x)] = Cov(X,Y) tr(BC) + 2 v^T C B C w
  Matrix cbc = matmul(mom.C, matmul(B, mom.C));
  double isserlis = mom.cov_lin(v, w) * mom.mean_quad(B) +
                    2.0 * quad_form(v, cbc, w);
  double se_is = 10.0 / std::sqrt(double(R));
  CHECK(s_xyq * inv == Catch::Approx(isserlis).margin(4.0 * se_is));
}

TEST_CASE("quadratic covariance formula against brute force") {
  int n = 4;
  auto table = table_for(n);
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);

  Matrix A(n, n), B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      A(i, j) = (i == j) ? 1.0 : 0.2;
      B(i, j) = 0.5 / (1.0 + std::abs(i - j));
    }
  A = symmetrize(A);
  B = symmetrize(B);

  int R = 400000;
  RngStream rng(2025, 0);
  double sa = 0.0, sb = 0.0, sab = 0.0;
  for (int r = 0; r < R; ++r) {
    Vec x = synthesize_modes(*table, sample_mu_modes(target, rng));
    double qa = quad_form(x, A, x), qb = quad_form(x, B, x);
    sa += qa;
    sb += qb;
    sab += qa * qb;
  }
  double mean_a = sa / R, mean_b = sb / R;
  double cov = sab / R - mean_a * mean_b;
  CHECK(mean_a == Catch::Approx(mom.mean_quad(A)).margin(0.02));
  CHECK(mean_b == Catch::Approx(mom.mean_quad(B)).margin(0.02));
  CHECK(cov == Catch::Approx(mom.cov_quad(A, B)).margin(0.05));
}

TEST_CASE("gap vectors pick out the jump arguments") {
  CircleLattice lat(5);
  Vec l = {3.0, 1.0, 4.0, 1.0, 5.0};
  Vec dr = right_gap_vector(lat, 1);
  CHECK(dot(dr, l) == Catch::Approx(1.0 - 4.0));
  Vec dl = left_gap_vector(lat, 1);
  CHECK(dot(dl, l) == Catch::Approx(1.0 - 3.0));
  Vec wrap = right_gap_vector(lat, 4);
  CHECK(dot(wrap, l) == Catch::Approx(5.0 - 3.0));
}

TEST_CASE("battery composition") {
  auto table = table_for(6);
  GaussianMoments mom(table);
  RngStream rng(7, 0);
  auto battery = test_function_battery(mom, rng);
  CHECK(battery.size() >= 20);
  int position_factored = 0, position_free = 0;
  for (const auto& pair : battery) {
    if (pair.f.has_position_factor() || pair.g.has_position_factor())
      ++position_factored;
    else
      ++position_free;
    CHECK(!pair.label().empty());
  }
  CHECK(position_free >= 10);
  CHECK(position_factored >= 3);
}

TEST_CASE("test functions center to zero mean") {
  int n = 6;
  auto table = table_for(n);
  GaussianMoments mom(table);
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(9, 0);
  auto battery = test_function_battery(mom, rng);

  int R = 200000;
  std::vector<double> sums(battery.size(), 0.0);
  RngStream draw(10, 0);
  for (int r = 0; r < R; ++r) {
    Vec x = synthesize_modes(*table, sample_mu_modes(target, draw));
    int pos = static_cast<int>(draw.uniform_index(n));
    for (std::size_t p = 0; p < battery.size(); ++p)
      sums[p] += battery[p].f.eval(x, pos);
  }
  for (std::size_t p = 0; p < battery.size(); ++p) {
    const TestFunction& f = battery[p].f;
    if (f.deg == TestFunction::Deg::Constant && !f.has_position_factor())
      continue;  // bare constants are not centered
    INFO(f.name);
    CHECK(std::abs(sums[p] / R) < 0.05);
  }
}

TEST_CASE("lift identities hold for a linear pair") {
  auto table = table_for(4);
  GaussianMoments mom(table);
  TestFunctionPair pair{linear_function(mom.table->modes[1], "m1"),
                        linear_function(mom.table->modes[2], "m2")};
  RngStream rng(31, 0);
  VerifyReport rep = verify_lift(pair, table, 20000, rng);
  REQUIRE(rep.checks.size() >= 2);
  for (const auto& c : rep.checks) {
    INFO(c.label << ": " << c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("lift rejects position factored input") {
  auto table = table_for(4);
  GaussianMoments mom(table);
  TestFunction f = linear_function(mom.table->modes[1], "m1");
  TestFunction pf = with_position_factor(f, Vec{1.0, 0.0, 0.0, 0.0}, "ind0");
  TestFunctionPair pair{pf, f};
  RngStream rng(32, 0);
  CHECK_THROWS_AS(verify_lift(pair, table, 20000, rng), std::invalid_argument);
}

TEST_CASE("adjoint pairings hold for linear and quadratic pairs") {
  auto table = table_for(4);
  GaussianMoments mom(table);
  RngStream rng(33, 0);

  TestFunctionPair linear{linear_function(mom.table->modes[1], "m1"),
                          linear_function(mom.table->modes[3], "m3")};
  VerifyReport rl = verify_adjoints(linear, table, 20000, rng);
  bool any_analytic = false;
  for (const auto& c : rl.checks) {
    INFO(c.label << ": " << c.detail);
    CHECK(c.pass);
    any_analytic = any_analytic || c.analytic;
  }
  CHECK(any_analytic);  // linear pairs carry the closed-form route

  Matrix a(4, 4);
  a(0, 0) = 1.0;
  a(1, 2) = 0.5;
  TestFunctionPair quad{quadratic_function(a, mom, "q1"),
                        linear_function(mom.table->modes[1], "m1")};
  VerifyReport rq = verify_adjoints(quad, table, 60000, rng);
  for (const auto& c : rq.checks) {
    INFO(c.label << ": " << c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("stationarity fails under a corrupted rate") {
  auto table = table_for(4);
  GaussianMoments mom(table);
  // The corrupted left rate only bites through the jump part, so the probe
  // needs a position factor.
  Vec ind0{1.0, 0.0, 0.0, 0.0};
  TestFunction h = with_position_factor(
      linear_function(mom.table->modes[1], "m1"), ind0, "ind0");

  RngStream rng(35, 0);
  RateModel broken;
  broken.corrupt_minus = true;
  VerifyReport rep = verify_invariance(h, table, 60000, rng, broken);
  CHECK_FALSE(rep.all_pass());

  RngStream rng2(35, 0);
  VerifyReport ok = verify_invariance(h, table, 60000, rng2);
  for (const auto& c : ok.checks) {
    INFO(c.label << ": " << c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("walk covariance check at small size") {
  auto table = table_for(4);
  CovarianceCheckResult res = run_srw_covariance_check(table, 120000.0, 7778);
  INFO("diag " << res.worst_diag_rel << " offdiag " << res.worst_offdiag_sigma
               << " chi2 " << res.position_chi2 << " crit "
               << res.position_chi2_crit);
  CHECK(res.pass());

  CHECK_THROWS_AS(run_srw_covariance_check(table_for(16), 120000.0, 1),
                  std::domain_error);
  CHECK_THROWS_AS(run_srw_covariance_check(table, 10.0, 1), std::domain_error);
}

TEST_CASE("bound observables agree between profile and mode routes") {
  int n = 8;
  auto table = table_for(n);
  GaussianTarget target = make_gaussian_target(table);
  auto obs = bind_observables(
      table, {Observable::fourier_mode(1), Observable::fourier_mode(3),
              Observable::potential_observable()});
  RngStream rng(41, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec z = sample_mu_modes(target, rng);
    Vec x = synthesize_modes(*table, z);
    for (int j = 0; j < obs.size(); ++j)
      CHECK(obs.eval(j, x, -1) == Catch::Approx(obs.eval_modes(j, z)).margin(1e-12));
  }
}

TEST_CASE("observable centers") {
  int n = 8;
  auto table = table_for(n);
  auto obs = bind_observables(table, {Observable::potential_observable(),
                                      Observable::position_indicator(3)});
  GaussianTarget target = make_gaussian_target(table);
  RngStream rng(43, 0);
  int R = 200000;
  double s_pot = 0.0, s_ind = 0.0;
  for (int r = 0; r < R; ++r) {
    Vec x = synthesize_modes(*table, sample_mu_modes(target, rng));
    int pos = static_cast<int>(rng.uniform_index(n));
    s_pot += obs.eval(0, x, pos);
    s_ind += obs.eval(1, x, pos);
  }
  // centered observables average to zero in stationarity
  CHECK(std::abs(s_pot / R) < 0.05);
  CHECK(std::abs(s_ind / R) < 0.005);
}
