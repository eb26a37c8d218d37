// Identity report: runs the adjoint pairings over the polynomial test
// battery and the two lift identities over its position-free pairs, printing
// one line per check with the analytic and Monte Carlo routes side by side.

#include <cstdio>

#include "liftlab/liftlab.hpp"

using namespace liftlab;

namespace {

int print_report(const VerifyReport& rep) {
  int failures = 0;
  for (const IdentityCheck& c : rep.checks) {
    std::printf("  %-22s", c.label.c_str());
    if (c.analytic)
      std::printf("  lhs %+11.4e  rhs %+11.4e", c.lhs, c.rhs);
    else
      std::printf("  %-30s", "(no closed form)");
    if (c.has_mc) std::printf("  mc %+9.2e +- %8.2e", c.mc_mean, c.mc_se);
    std::printf("  %s\n", c.pass ? "ok" : "FAIL");
    if (!c.pass) ++failures;
  }
  return failures;
}

}  // namespace

int main() {
  int n = 4;
  auto table =
      std::make_shared<const SpectralTable>(build_spectral_table(CircleLattice(n)));
  GaussianMoments mom(table);
  RngStream battery_rng(99);
  auto battery = test_function_battery(mom, battery_rng);

  int failures = 0;
  RngStream rng(2026);

  std::printf("adjoint pairings, n = %d, budget 2e4 per pair\n", n);
  for (const TestFunctionPair& pair : battery) {
    std::printf("[%s]\n", pair.label().c_str());
    failures += print_report(verify_adjoints(pair, table, 20000, rng));
  }

  std::printf("\nlift identities on position-free pairs\n");
  for (const TestFunctionPair& pair : battery) {
    if (pair.f.has_position_factor() || pair.g.has_position_factor()) continue;
    std::printf("[%s]\n", pair.label().c_str());
    failures += print_report(verify_lift(pair, table, 20000, rng));
  }

  std::printf("\n%d failing checks\n", failures);
  return failures == 0 ? 0 : 1;
}
