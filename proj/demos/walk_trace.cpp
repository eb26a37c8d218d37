// Short tour of the lifted self-repellent walk: prints the first few jump
// events on a small circle, then checks the long-run profile covariance and
// position marginal against their closed forms.

#include <cstdio>

#include "liftlab/liftlab.hpp"

using namespace liftlab;

int main() {
  int n = 8;
  auto table =
      std::make_shared<const SpectralTable>(build_spectral_table(CircleLattice(n)));
  GaussianTarget target = make_gaussian_target(table);

  RngStream rng(12345);
  LiftedState state = stationary_start(target, rng);
  std::printf("start position %d, profile:", state.position);
  for (int i = 0; i < n; ++i) std::printf(" %+.3f", state.profile_entry(i));
  std::printf("\n\nfirst events\n%10s  %-6s  %s\n", "time", "kind", "position");

  SimulateOptions opts;
  opts.record_events = true;
  opts.max_events = 12;
  SimulateResult run = simulate(std::move(state), 1e9, RefreshKind::none(),
                                ObserverSchedule::none(), rng, opts);
  for (const EventRecord& ev : run.events)
    std::printf("%10.4f  %-6s  %d\n", ev.time,
                ev.kind == EventKind::JumpRight ? "right" : "left",
                ev.new_position);

  Matrix cov = stationary_covariance(*table);
  std::printf("\nstationary covariance by circular distance:");
  for (int d = 0; d < n / 2 + 1; ++d) std::printf(" %+.4f", cov(0, d));
  std::printf("\n\nlong-run check (horizon 2e5)...\n");

  CovarianceCheckResult res = run_srw_covariance_check(table, 2e5, 777);
  std::printf("worst diagonal rel error   %.4f  (tol 0.05)\n", res.worst_diag_rel);
  std::printf("worst off-diagonal sigmas  %.2f  (tol 3)\n", res.worst_offdiag_sigma);
  std::printf("position chi-square        %.2f  (crit %.2f)\n", res.position_chi2,
              res.position_chi2_crit);
  std::printf("%s\n", res.pass() ? "PASS" : "FAIL");
  return res.pass() ? 0 : 1;
}
